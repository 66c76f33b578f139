// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#include "ffp8/refnet.hpp"

#include <gtest/gtest.h>

#include <random>

#include "ffp8/search.hpp"

namespace ffp8::refnet {
namespace {

const Dataset& default_dataset() {
  static const Dataset ds = make_dataset(7, 2000, 16, 3);
  return ds;
}

const ModelBundle& default_model() {
  static const ModelBundle m = train_baseline(default_dataset(), TrainConfig{});
  return m;
}

Assignment uniform_assignment(const ModelBundle& m, const Format& w, const Format& a) {
  Assignment out;
  for (const DenseLayer& l : dense_layers(m)) out.layers.push_back({l.name, w, a});
  return out;
}

TEST(RefnetTest, DatasetIsDeterministic) {
  EXPECT_EQ(make_dataset(7, 1000, 16, 3), make_dataset(7, 1000, 16, 3));
  EXPECT_FALSE(make_dataset(7, 1000, 16, 3) == make_dataset(8, 1000, 16, 3));
}

TEST(RefnetTest, ClassesAreBalanced) {
  const Dataset ds = make_dataset(1, 999, 4, 3);
  std::vector<int> counts(3);
  for (int y : ds.train_y) ++counts[static_cast<std::size_t>(y)];
  for (int y : ds.val_y) ++counts[static_cast<std::size_t>(y)];
  EXPECT_EQ(counts, (std::vector<int>{333, 333, 333}));
  const Dataset uneven = make_dataset(1, 10, 4, 3);
  std::vector<int> c2(3);
  for (int y : uneven.train_y) ++c2[static_cast<std::size_t>(y)];
  for (int y : uneven.val_y) ++c2[static_cast<std::size_t>(y)];
  EXPECT_LE(*std::max_element(c2.begin(), c2.end()) - *std::min_element(c2.begin(), c2.end()), 1);
}

TEST(RefnetTest, ValidationSplitSize) {
  for (int n : {5, 10, 99, 1000, 2001}) {
    const Dataset ds = make_dataset(static_cast<std::uint64_t>(n), n, 3, 2);
    EXPECT_EQ(ds.val_x.rows, static_cast<std::size_t>(n / 5));
    EXPECT_EQ(ds.val_x.rows + ds.train_x.rows, static_cast<std::size_t>(n));
    EXPECT_EQ(ds.val_y.size(), ds.val_x.rows);
  }
}

TEST(RefnetTest, FeaturesAreStandardized) {
  const Dataset& ds = default_dataset();
  for (std::size_t j = 0; j < ds.train_x.cols; ++j) {
    double sum = 0, sq = 0;
    const std::size_t n = ds.train_x.rows + ds.val_x.rows;
    for (std::size_t i = 0; i < ds.train_x.rows; ++i) {
      sum += ds.train_x(i, j);
      sq += ds.train_x(i, j) * ds.train_x(i, j);
    }
    for (std::size_t i = 0; i < ds.val_x.rows; ++i) {
      sum += ds.val_x(i, j);
      sq += ds.val_x(i, j) * ds.val_x(i, j);
    }
    EXPECT_NEAR(sum / n, 0.0, 1e-5);
    EXPECT_NEAR(sq / n, 1.0, 1e-4);
  }
}

TEST(RefnetTest, BadSizes) {
  for (auto [n, d, c] : {std::tuple{0, 4, 2}, {10, 0, 2}, {10, 4, 0}, {2, 4, 3}}) {
    try {
      make_dataset(1, n, d, c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BadSizes);
    }
  }
}

TEST(RefnetTest, TrainingIsDeterministic) {
  const Dataset ds = make_dataset(3, 300, 8, 3);
  TrainConfig cfg;
  cfg.epochs = 3;
  EXPECT_EQ(write_bundle(train_baseline(ds, cfg)), write_bundle(train_baseline(ds, cfg)));
}

TEST(RefnetTest, ZeroEpochsReturnsInitialWeights) {
  const Dataset ds = make_dataset(3, 300, 8, 3);
  TrainConfig cfg;
  cfg.epochs = 0;
  const ModelBundle trained = train_baseline(ds, cfg);
  const ModelBundle init = init_model(8, 3, cfg);
  EXPECT_EQ(trained.tensors, init.tensors);
  EXPECT_EQ(trained.layers, init.layers);
}

TEST(RefnetTest, DefaultModelReachesTargetAccuracy) {
  EXPECT_GE(evaluate(default_model(), nullptr, default_dataset()), 0.95);
  EXPECT_EQ(*default_model().meta("refnet.arch"), "16-32-32-3");
}

TEST(RefnetTest, DivergenceIsReported) {
  const Dataset ds = make_dataset(3, 100, 4, 2);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 1e30f;
  try {
    train_baseline(ds, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DivergedTraining);
  }
}

TEST(RefnetTest, MemorizesTinyTrainingSet) {
  const Dataset ds = make_dataset(4, 10, 4, 2);
  TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch = 4;
  cfg.learning_rate = 0.1f;
  const ModelBundle m = train_baseline(ds, cfg);
  EXPECT_EQ(accuracy(m, nullptr, ds.train_x, ds.train_y), 1.0);
}

TEST(RefnetTest, EvaluateIsRepeatable) {
  EXPECT_EQ(evaluate(default_model(), nullptr, default_dataset()),
            evaluate(default_model(), nullptr, default_dataset()));
}

TEST(RefnetTest, ZeroBatchGivesBiasRow) {
  ModelBundle m = default_model();
  const Matrix zeros(5, 16);
  const ForwardResult r = forward(m, zeros);
  const std::vector<float>& bias = m.find("fc1.bias")->values();
  for (std::size_t row = 0; row < 5; ++row)
    for (std::size_t o = 0; o < bias.size(); ++o) EXPECT_EQ(r.trace.pre[0](row, o), bias[o]);
}

TEST(RefnetTest, TraceShapesAndRelu) {
  const ForwardResult r = forward(default_model(), default_dataset().val_x);
  ASSERT_EQ(r.trace.pre.size(), 3u);
  EXPECT_EQ(r.trace.pre[0].cols, 32u);
  EXPECT_EQ(r.trace.pre[1].cols, 32u);
  EXPECT_EQ(r.trace.pre[2].cols, 3u);
  for (std::size_t i = 0; i < 2; ++i)
    for (float v : r.trace.post[i].data) EXPECT_GE(v, 0.0f);
  EXPECT_EQ(r.trace.post[2].data, r.trace.pre[2].data);
  EXPECT_EQ(r.logits.data, r.trace.post[2].data);
}

// A small network with quarter-integer parameters and small integer inputs.
// Every intermediate value then fits an 11-bit significand.
TEST(RefnetTest, WideAssignmentReproducesFp32Logits) {
  std::mt19937_64 rng(1);
  TrainConfig cfg;
  cfg.hidden = {4, 4};
  ModelBundle m = init_model(4, 3, cfg);
  for (Tensor& t : m.tensors)
    for (float& v : t.values()) v = static_cast<float>(static_cast<int>(rng() % 9) - 4) / 4.0f;
  Matrix x(50, 4);
  for (float& v : x.data) v = static_cast<float>(static_cast<int>(rng() % 9) - 4);
  const Format wide = Format::make(1, 5, 10, 15);
  const ForwardResult fp32 = forward(m, x);
  // representability of everything that will be quantized
  for (const DenseLayer& l : dense_layers(m))
    for (float v : l.weight) ASSERT_EQ(round_trip(wide, v), v);
  for (float v : x.data) ASSERT_EQ(round_trip(wide, v), v);
  for (std::size_t i = 0; i + 1 < fp32.trace.post.size(); ++i)
    for (float v : fp32.trace.post[i].data) ASSERT_EQ(round_trip(wide, v), v);
  const Assignment a = uniform_assignment(m, wide, wide);
  EXPECT_EQ(forward(m, x, &a).logits.data, fp32.logits.data);
}

TEST(RefnetTest, QuantizedForwardUsesEncodedWeights) {
  const ModelBundle& m = default_model();
  const Format w = Format::make(1, 3, 4, 4);
  const Format act = Format::make(1, 4, 3, 5);
  ModelBundle stored = m;
  for (Tensor& t : stored.tensors)
    if (t.name.ends_with(".weight")) t = quantize_tensor(t, w).first;
  const Assignment a = uniform_assignment(m, w, act);
  EXPECT_EQ(forward(stored, default_dataset().val_x, &a).logits.data,
            forward(m, default_dataset().val_x, &a).logits.data);
}

TEST(RefnetTest, MissingAssignmentAndShapeErrors) {
  const ModelBundle& m = default_model();
  Assignment partial = uniform_assignment(m, Format::make(1, 4, 3, 7), Format::make(1, 4, 3, 7));
  partial.layers.pop_back();
  try {
    forward(m, default_dataset().val_x, &partial);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingAssignment);
  }
  try {
    forward(m, Matrix(2, 15));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
}

TEST(RefnetTest, ActivationStats) {
  const ModelBundle& m = default_model();
  const std::vector<TensorStats> a = collect_activation_stats(m, default_dataset().train_x);
  const std::vector<TensorStats> b = collect_activation_stats(m, default_dataset().train_x);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a, b);
  EXPECT_GT(a[0].negative_count, 0u);
  EXPECT_FALSE(elide_sign(a[0]));
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_EQ(a[i].negative_count, 0u);
    EXPECT_TRUE(elide_sign(a[i]));
  }
}

TEST(RefnetTest, ArgmaxSurvivesOrderPreservingMaps) {
  std::mt19937_64 rng(2);
  std::normal_distribution<float> nd(0.0f, 3.0f);
  Matrix logits(200, 5);
  for (float& v : logits.data) v = nd(rng);
  const std::vector<int> before = predict(logits);
  Matrix mapped = logits;
  // a strictly increasing map applied to every logit
  for (float& v : mapped.data) v = std::cbrt(v) * 2.0f + 1.0f;
  EXPECT_EQ(predict(mapped), before);
  // coarse rounding that keeps each row's order keeps the prediction
  const Format f = Format::make(1, 4, 3, 7);
  Matrix rounded = logits;
  fake_quantize(rounded.data, f);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    bool order_kept = true;
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        if (logits(r, i) < logits(r, j) && !(rounded(r, i) < rounded(r, j))) order_kept = false;
    if (order_kept) {
      EXPECT_EQ(predict(rounded)[r], before[r]);
    }
  }
}

}  // namespace
}  // namespace ffp8::refnet
