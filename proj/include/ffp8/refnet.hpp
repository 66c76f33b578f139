// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

/*
 * Reference dense/ReLU classifier used to measure what FFP8 storage does to
 * accuracy. Weights and activations may live in FFP8 between layers; every
 * multiply-accumulate runs in FP32.
 *
 * Dataset generator (make_dataset):
 *   - std::mt19937_64 seeded with `seed`
 *   - class centers: n_classes x n_features, each coordinate
 *     N(0, kCenterSpread^2), drawn row by row
 *   - sample i has label i % n_classes, features center + N(0, 1)
 *   - features standardized to zero mean / unit variance per column
 *   - samples shuffled once, the first floor(0.2 N) become the validation split
 *
 * Trainer (train_baseline): He-normal init drawn layer by layer with
 * std::mt19937_64(seed), zero biases, plain mini-batch SGD on softmax cross
 * entropy, training order reshuffled every epoch from the same generator.
 */

#ifndef FFP8_REFNET_HPP
#define FFP8_REFNET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ffp8/analysis.hpp"
#include "ffp8/assignment.hpp"
#include "ffp8/bundle.hpp"
#include "ffp8/error.hpp"
#include "ffp8/tensor.hpp"

namespace ffp8::refnet {

inline constexpr double kCenterSpread = 1.0;
inline constexpr double kValidationFraction = 0.2;

/// Row-major FP32 matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}

  float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const float> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct Dataset {
  std::uint64_t seed = 0;
  int n_classes = 0;
  Matrix train_x;
  std::vector<int> train_y;
  Matrix val_x;
  std::vector<int> val_y;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline Dataset make_dataset(std::uint64_t seed, int n_samples, int n_features, int n_classes) {
  if (n_samples <= 0 || n_features <= 0 || n_classes <= 0 || n_samples < n_classes)
    throw Error(Errc::BadSizes, "make_dataset needs positive sizes and at least one sample per class");
  const auto n = static_cast<std::size_t>(n_samples);
  const auto d = static_cast<std::size_t>(n_features);
  const auto c = static_cast<std::size_t>(n_classes);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centers(c * d);
  for (double& v : centers) v = kCenterSpread * normal(rng);

  std::vector<double> x(n * d);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % c);
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = centers[(i % c) * d + j] + normal(rng);
  }
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i * d + j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i * d + j] - mean) * (x[i * d + j] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) x[i * d + j] = sd > 0.0 ? (x[i * d + j] - mean) / sd : 0.0;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_val = static_cast<std::size_t>(std::floor(kValidationFraction * static_cast<double>(n)));
  Dataset ds;
  ds.seed = seed;
  ds.n_classes = n_classes;
  ds.val_x = Matrix(n_val, d);
  ds.train_x = Matrix(n - n_val, d);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    Matrix& dst = k < n_val ? ds.val_x : ds.train_x;
    const std::size_t r = k < n_val ? k : k - n_val;
    for (std::size_t j = 0; j < d; ++j) dst(r, j) = static_cast<float>(x[src * d + j]);
    (k < n_val ? ds.val_y : ds.train_y).push_back(y[src]);
  }
  return ds;
}

struct TrainConfig {
  std::vector<std::size_t> hidden{32, 32};
  int epochs = 30;
  std::size_t batch = 32;
  float learning_rate = 0.05f;
  std::uint64_t seed = 7;
};

/// A dense layer resolved from a bundle, weights already in FP32.
struct DenseLayer {
  std::string name;
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;  // [out, in]
  std::vector<float> bias;    // [out]
  bool relu = false;
  bool weight_is_fp32 = true;
};

/// Resolves the linear dense/ReLU chain of a bundle.
inline std::vector<DenseLayer> dense_layers(const ModelBundle& model) {
  std::vector<DenseLayer> out;
  for (const Layer& l : model.layers) {
    if (l.kind == LayerKind::relu) {
      if (out.empty() || out.back().relu) throw Error(Errc::ShapeMismatch, "relu '" + l.name + "' without a dense input");
      out.back().relu = true;
      continue;
    }
    if (l.kind != LayerKind::dense) continue;
    if (l.tensors.size() != 2) throw Error(Errc::ShapeMismatch, "dense '" + l.name + "' needs weight and bias");
    const Tensor* w = model.find(l.tensors[0]);
    const Tensor* b = model.find(l.tensors[1]);
    if (!w || !b) throw Error(Errc::UnresolvedReference, "dense '" + l.name + "' has a missing tensor");
    if (w->shape.size() != 2 || b->element_count() != w->shape[0])
      throw Error(Errc::ShapeMismatch, "dense '" + l.name + "' has inconsistent weight/bias shapes");
    DenseLayer d;
    d.name = l.name;
    d.out = w->shape[0];
    d.in = w->shape[1];
    d.weight_is_fp32 = w->is_fp32();
    d.weight = w->is_fp32() ? w->values() : dequantize_tensor(*w).values();
    d.bias = b->is_fp32() ? b->values() : dequantize_tensor(*b).values();
    if (!out.empty() && out.back().out != d.in)
      throw Error(Errc::ShapeMismatch, "dense '" + d.name + "' input width does not match the previous layer");
    out.push_back(std::move(d));
  }
  if (out.empty()) throw Error(Errc::EmptyModel, "bundle has no dense layers");
  return out;
}

struct ForwardTrace {
  std::vector<Matrix> pre;   // per dense layer, before ReLU
  std::vector<Matrix> post;  // per dense layer, after ReLU (same as pre without one)
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

namespace detail {

inline Matrix affine(const Matrix& x, const DenseLayer& l, std::span<const float> weight) {
  Matrix y(x.rows, l.out);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t o = 0; o < l.out; ++o) {
      float acc = l.bias[o];
      const float* w = weight.data() + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) acc += w[i] * x(r, i);
      y(r, o) = acc;
    }
  return y;
}

}  // namespace detail

/// FP32 forward when `assignment` is null. Otherwise every dense layer's
/// input is quantize-dequantized in its activation format and FP32 weights
/// are quantize-dequantized in its weight format; weights already stored as
/// FFP8 codes are used as decoded. Logits are never quantized.
inline ForwardResult forward(const ModelBundle& model, const Matrix& batch, const Assignment* assignment = nullptr) {
  const std::vector<DenseLayer> layers = dense_layers(model);
  if (batch.cols != layers.front().in)
    throw Error(Errc::ShapeMismatch, "batch has " + std::to_string(batch.cols) + " features, model expects " +
                                         std::to_string(layers.front().in));
  ForwardResult res;
  Matrix x = batch;
  for (const DenseLayer& l : layers) {
    std::vector<float> weight = l.weight;
    if (assignment) {
      const LayerFormats* f = assignment->find(l.name);
      if (!f) throw Error(Errc::MissingAssignment, "no formats assigned to layer '" + l.name + "'");
      fake_quantize(x.data, f->activation);
      if (l.weight_is_fp32) fake_quantize(weight, f->weight);
    }
    Matrix pre = detail::affine(x, l, weight);
    Matrix post = pre;
    if (l.relu)
      for (float& v : post.data) v = std::max(v, 0.0f);
    x = post;
    res.trace.pre.push_back(std::move(pre));
    res.trace.post.push_back(std::move(post));
  }
  res.logits = std::move(x);
  return res;
}

inline std::vector<int> predict(const Matrix& logits) {
  std::vector<int> out(logits.rows);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    auto row = logits.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

inline double accuracy(const ModelBundle& model, const Assignment* assignment, const Matrix& x,
                       const std::vector<int>& y) {
  if (x.rows == 0) return 0.0;
  const std::vector<int> pred = predict(forward(model, x, assignment).logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// Top-1 accuracy on the validation split.
inline double evaluate(const ModelBundle& model, const Assignment* assignment, const Dataset& ds) {
  return accuracy(model, assignment, ds.val_x, ds.val_y);
}

/// Stats of every dense layer's input under FP32 forward: entry 0 is the
/// network input, entry i the ReLU output of dense layer i-1.
inline std::vector<TensorStats> collect_activation_stats(const ModelBundle& model, const Matrix& batch) {
  const ForwardResult res = forward(model, batch);
  std::vector<TensorStats> out;
  out.push_back(tensor_stats(batch.data));
  for (std::size_t i = 0; i + 1 < res.trace.post.size(); ++i) out.push_back(tensor_stats(res.trace.post[i].data));
  return out;
}

/// Freshly initialized network, as train_baseline would start from.
inline ModelBundle init_model(std::size_t n_features, std::size_t n_classes, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  ModelBundle m;
  m.layers.push_back({"input", LayerKind::input, {}});
  std::vector<std::size_t> widths{n_features};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(n_classes);
  std::string arch = std::to_string(n_features);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k];
    const std::size_t out = widths[k + 1];
    arch += "-" + std::to_string(out);
    const std::string name = "fc" + std::to_string(k + 1);
    std::normal_distribution<float> normal(0.0f, std::sqrt(2.0f / static_cast<float>(in)));
    std::vector<float> w(in * out);
    for (float& v : w) v = normal(rng);
    m.tensors.push_back(make_fp32_tensor(name + ".weight", Role::weight,
                                         {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)}, std::move(w)));
    m.tensors.push_back(make_fp32_tensor(name + ".bias", Role::weight, {static_cast<std::uint32_t>(out)},
                                         std::vector<float>(out, 0.0f)));
    m.layers.push_back({name, LayerKind::dense, {name + ".weight", name + ".bias"}});
    if (k + 2 < widths.size()) m.layers.push_back({"relu" + std::to_string(k + 1), LayerKind::relu, {}});
  }
  m.layers.push_back({"output", LayerKind::output, {}});
  m.set_meta("refnet.arch", arch);
  return m;
}

/// Trains the default classifier. Deterministic for a fixed dataset and
/// config; `epochs == 0` returns the initial weights.
inline ModelBundle train_baseline(const Dataset& ds, const TrainConfig& cfg) {
  if (ds.train_x.rows == 0) throw Error(Errc::BadSizes, "empty training split");
  ModelBundle model = init_model(ds.train_x.cols, static_cast<std::size_t>(ds.n_classes), cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);

  // Views into the bundle's tensors, in layer order.
  struct Params {
    Tensor* w;
    Tensor* b;
    std::size_t in, out;
    bool relu;
  };
  std::vector<Params> params;
  for (const DenseLayer& l : dense_layers(model))
    params.push_back({model.find(l.name + ".weight"), model.find(l.name + ".bias"), l.in, l.out, l.relu});

  const std::size_t n = ds.train_x.rows;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t bs = std::min(cfg.batch, n - start);
      // forward, keeping every layer's input and output
      std::vector<Matrix> acts;
      Matrix x(bs, ds.train_x.cols);
      for (std::size_t r = 0; r < bs; ++r)
        std::copy_n(ds.train_x.row(order[start + r]).begin(), x.cols, x.data.begin() + r * x.cols);
      acts.push_back(x);
      for (const Params& p : params) {
        Matrix y(bs, p.out);
        const auto& w = p.w->values();
        const auto& b = p.b->values();
        for (std::size_t r = 0; r < bs; ++r)
          for (std::size_t o = 0; o < p.out; ++o) {
            float acc = b[o];
            for (std::size_t i = 0; i < p.in; ++i) acc += w[o * p.in + i] * acts.back()(r, i);
            y(r, o) = p.relu ? std::max(acc, 0.0f) : acc;
          }
        acts.push_back(std::move(y));
      }

      // softmax cross-entropy gradient w.r.t. logits
      Matrix grad = acts.back();
      for (std::size_t r = 0; r < bs; ++r) {
        float mx = grad(r, 0);
        for (std::size_t c = 1; c < grad.cols; ++c) mx = std::max(mx, grad(r, c));
        float sum = 0.0f;
        for (std::size_t c = 0; c < grad.cols; ++c) sum += grad(r, c) = std::exp(grad(r, c) - mx);
        const int label = ds.train_y[order[start + r]];
        for (std::size_t c = 0; c < grad.cols; ++c) grad(r, c) /= sum;
        epoch_loss -= std::log(std::max(grad(r, static_cast<std::size_t>(label)), 1e-30f));
        grad(r, static_cast<std::size_t>(label)) -= 1.0f;
        for (std::size_t c = 0; c < grad.cols; ++c) grad(r, c) /= static_cast<float>(bs);
      }

      for (std::size_t k = params.size(); k-- > 0;) {
        const Params& p = params[k];
        const Matrix& in = acts[k];
        auto& w = p.w->values();
        auto& b = p.b->values();
        Matrix grad_in(bs, p.in);
        for (std::size_t r = 0; r < bs; ++r)
          for (std::size_t o = 0; o < p.out; ++o) {
            const float g = grad(r, o);
            if (g == 0.0f) continue;
            for (std::size_t i = 0; i < p.in; ++i) grad_in(r, i) += g * w[o * p.in + i];
          }
        for (std::size_t o = 0; o < p.out; ++o) {
          float gb = 0.0f;
          for (std::size_t r = 0; r < bs; ++r) gb += grad(r, o);
          b[o] -= cfg.learning_rate * gb;
          for (std::size_t i = 0; i < p.in; ++i) {
            float gw = 0.0f;
            for (std::size_t r = 0; r < bs; ++r) gw += grad(r, o) * in(r, i);
            w[o * p.in + i] -= cfg.learning_rate * gw;
          }
        }
        // ReLU mask of the layer below
        if (k > 0 && params[k - 1].relu)
          for (std::size_t j = 0; j < grad_in.data.size(); ++j)
            if (in.data[j] <= 0.0f) grad_in.data[j] = 0.0f;
        grad = std::move(grad_in);
      }
    }
    if (!std::isfinite(epoch_loss))
      throw Error(Errc::DivergedTraining, "loss became non-finite in epoch " + std::to_string(epoch));
  }

  model.set_meta("dataset.seed", std::to_string(ds.seed));
  model.set_meta("train.seed", std::to_string(cfg.seed));
  model.set_meta("train.epochs", std::to_string(cfg.epochs));
  model.set_meta("train.batch", std::to_string(cfg.batch));
  return model;
}

}  // namespace ffp8::refnet

#endif  // FFP8_REFNET_HPP
