// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

/*
 * Best-fit format search and layer-wise optimization.
 *
 * Candidates for a tensor are anchored at bias_star, the largest bias whose
 * window still holds the tensor's maximum magnitude, and sweep K biases
 * below it; the conventional bias of each exponent width is always tried
 * as well. Layer-wise optimization then runs, in order:
 *
 *   1. FP32 calibration pass: weight and activation stats per dense layer
 *   2. one global format per role from the whole-model data
 *   3. per-layer bias_star on top of the global (x, y, z)
 *   4. sign elision for activation inputs that are never negative, using
 *      the best unsigned format over all such layers as the base
 *   5. with the accuracy objective, a per-layer change is kept only if the
 *      calibration accuracy does not drop; with the SQNR objective, only if
 *      the layer's MSE does not grow
 */

#ifndef FFP8_SEARCH_HPP
#define FFP8_SEARCH_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ffp8/analysis.hpp"
#include "ffp8/assignment.hpp"
#include "ffp8/bundle.hpp"
#include "ffp8/error.hpp"
#include "ffp8/format.hpp"
#include "ffp8/refnet.hpp"
#include "ffp8/tensor.hpp"

namespace ffp8 {

enum class Objective { sqnr, accuracy };

struct SearchConfig {
  int width = 8;
  int y_min = 1;
  int y_max = 6;
  int bias_sweep = 8;  // K
  bool allow_unsigned = true;
  Objective objective = Objective::sqnr;
  bool parallel = true;
};

struct BiasStar {
  int bias;
  bool clamped;  // the unconstrained answer fell outside [-128, 127]
};

/// Largest b with (2 - 2^-z) * 2^(2^y - 1 - b) >= max_mag.
inline BiasStar bias_star(int exp_bits, int frac_bits, double max_mag) {
  if (!(max_mag > 0.0) || !std::isfinite(max_mag))
    throw Error(Errc::NonPositiveMax, "bias_star needs a positive finite maximum");
  if (exp_bits < 1 || exp_bits > 16 || frac_bits < 0 || frac_bits > 52)
    throw Error(Errc::BadExponent, "bias_star field widths out of range");
  const double top = 2.0 - std::ldexp(1.0, -frac_bits);
  const long emax = (1L << exp_bits) - 1;
  const auto covers = [&](long b) { return std::ldexp(top, static_cast<int>(std::clamp(emax - b, -2000L, 2000L))) >= max_mag; };

  // max_mag in [2^k, 2^(k+1)) puts the answer at emax - k or emax - k - 1.
  long b = emax - std::ilogb(max_mag);
  while (!covers(b)) --b;
  while (covers(b + 1)) ++b;
  if (b > kMaxBias) return {kMaxBias, true};
  if (b < kMinBias) return {kMinBias, true};
  return {static_cast<int>(b), false};
}

/// True when no element is negative.
inline bool elide_sign(const TensorStats& stats) { return stats.negative_count == 0; }

/// Per exponent width: bias_star, then K biases below it, then the
/// conventional bias. A sweep depth of 0 means bias_star alone.
inline std::vector<Format> candidate_formats(const TensorStats& stats, const SearchConfig& cfg) {
  const int x = elide_sign(stats) && cfg.allow_unsigned ? 0 : 1;
  std::vector<Format> out;
  const auto push = [&](int y, int z, int b) {
    if (b < kMinBias || b > kMaxBias) return;
    try {
      const Format f = Format::make(x, y, z, b, cfg.width);
      if (std::find(out.begin(), out.end(), f) == out.end()) out.push_back(f);
    } catch (const Error&) {
    }
  };
  for (int y = cfg.y_min; y <= cfg.y_max; ++y) {
    const int z = cfg.width - x - y;
    if (z < 0) continue;
    if (stats.max_mag > 0.0) {
      const int star = bias_star(y, z, stats.max_mag).bias;
      for (int k = 0; k <= cfg.bias_sweep; ++k) push(y, z, star - k);
    }
    if (cfg.bias_sweep > 0 || stats.max_mag == 0.0) push(y, z, default_bias(y));
  }
  return out;
}

struct Selection {
  Format format;
  QuantReport report;
  double objective;
};

/// Fixed total order: higher objective, then smaller y, then larger b,
/// then unsigned before signed.
inline bool better(const Selection& a, const Selection& b) {
  if (a.objective != b.objective) return a.objective > b.objective;
  if (a.format.exp_bits() != b.format.exp_bits()) return a.format.exp_bits() < b.format.exp_bits();
  if (a.format.bias() != b.format.bias()) return a.format.bias() > b.format.bias();
  if (a.format.sign_bits() != b.format.sign_bits()) return a.format.sign_bits() < b.format.sign_bits();
  return a.format.frac_bits() > b.format.frac_bits();
}

/// Scores every candidate with `score(format, report)` and returns the best
/// under `better`. Candidates whose window cuts off the largest magnitude
/// are dropped whenever another candidate covers it. The result does not
/// depend on evaluation order.
template <typename ScoreFn>
Selection select_among(std::span<const float> values, std::vector<Format> candidates, bool parallel,
                       ScoreFn&& score) {
  if (candidates.empty()) throw Error(Errc::EmptyCandidates, "no candidate formats to evaluate");
  double max_mag = 0.0;
  for (float v : values) max_mag = std::max(max_mag, static_cast<double>(std::fabs(v)));
  const auto covers = [&](const Format& f) { return range_window(f).max >= max_mag; };
  if (std::any_of(candidates.begin(), candidates.end(), covers))
    std::erase_if(candidates, [&](const Format& f) { return !covers(f); });
  const auto eval = [&](const Format& f) {
    QuantReport r = error_report(values, f);
    const double obj = score(f, r);
    return Selection{f, r, obj};
  };
  std::vector<Selection> scored;
  scored.reserve(candidates.size());
  if (parallel && candidates.size() > 1 && values.size() > 4096) {
    std::vector<std::future<Selection>> jobs;
    for (const Format& f : candidates) jobs.push_back(std::async(std::launch::async, eval, std::cref(f)));
    for (auto& j : jobs) scored.push_back(j.get());
  } else {
    for (const Format& f : candidates) scored.push_back(eval(f));
  }
  Selection best = scored.front();
  for (const Selection& s : scored)
    if (better(s, best)) best = s;
  return best;
}

/// SQNR-driven best-fit format for one tensor.
inline Selection select_format(std::span<const float> values, const SearchConfig& cfg) {
  const TensorStats stats = tensor_stats(values);
  return select_among(values, candidate_formats(stats, cfg), cfg.parallel,
                      [](const Format&, const QuantReport& r) { return r.sqnr_db; });
}

/// Model accuracy under a candidate assignment, for the accuracy objective.
using AccuracyFn = std::function<double(const Assignment&)>;

namespace detail {

inline std::vector<float> concat(const std::vector<std::vector<float>>& parts) {
  std::vector<float> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline Format with_bias(const Format& f, int b) {
  return Format::make(f.sign_bits(), f.exp_bits(), f.frac_bits(), b, f.width());
}

/// Same (x, y, z) as `base`, bias from the * rule for `max_mag`.
inline Format star_format(const Format& base, double max_mag) {
  if (!(max_mag > 0.0)) return base;
  return with_bias(base, bias_star(base.exp_bits(), base.frac_bits(), max_mag).bias);
}

inline Assignment uniform(const std::vector<refnet::DenseLayer>& layers, const Format& weight,
                          const std::vector<Format>& activation) {
  Assignment a;
  for (std::size_t i = 0; i < layers.size(); ++i) a.layers.push_back({layers[i].name, weight, activation[i]});
  return a;
}

}  // namespace detail

/// Per-layer, per-role formats for a refnet bundle. `calibration` feeds the
/// FP32 stats pass; `accuracy_fn` is required for Objective::accuracy.
inline Assignment layerwise_optimize(const ModelBundle& model, const refnet::Matrix& calibration,
                                     const SearchConfig& cfg, const AccuracyFn& accuracy_fn = {}) {
  if (model.layers.empty() || model.tensors.empty()) throw Error(Errc::EmptyModel, "model has no layers");
  if (calibration.rows == 0) throw Error(Errc::EmptyCalibration, "calibration batch is empty");
  if (cfg.objective == Objective::accuracy && !accuracy_fn)
    throw Error(Errc::EmptyCalibration, "accuracy objective needs an accuracy callback");
  const std::vector<refnet::DenseLayer> layers = refnet::dense_layers(model);
  for (const auto& l : layers)
    if (!l.weight_is_fp32) throw Error(Errc::ShapeMismatch, "layer '" + l.name + "' weights are already encoded");

  // 1. calibration stats
  const refnet::ForwardResult fp32 = refnet::forward(model, calibration);
  std::vector<std::vector<float>> weights;
  std::vector<std::vector<float>> acts;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    weights.push_back(layers[i].weight);
    acts.push_back(i == 0 ? calibration.data : fp32.trace.post[i - 1].data);
  }
  std::vector<TensorStats> wstats;
  std::vector<TensorStats> astats;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    wstats.push_back(tensor_stats(weights[i]));
    astats.push_back(tensor_stats(acts[i]));
  }

  // 2. global format per role
  const std::vector<float> all_w = detail::concat(weights);
  const std::vector<float> all_a = detail::concat(acts);
  std::vector<std::size_t> nonneg;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (cfg.allow_unsigned && elide_sign(astats[i])) nonneg.push_back(i);
  std::vector<std::vector<float>> nonneg_parts;
  for (std::size_t i : nonneg) nonneg_parts.push_back(acts[i]);
  const std::vector<float> all_nonneg = detail::concat(nonneg_parts);

  Format global_w = select_format(all_w, cfg).format;
  Format global_a = select_format(all_a, cfg).format;
  std::optional<Format> global_u;
  if (!nonneg.empty() && nonneg.size() < layers.size()) global_u = select_format(all_nonneg, cfg).format;
  if (nonneg.size() == layers.size()) global_u = global_a;  // all_a is nonnegative, already unsigned

  std::vector<Format> act_base(layers.size(), global_a);
  for (std::size_t i : nonneg) act_base[i] = *global_u;

  if (cfg.objective == Objective::accuracy) {
    // Global choices ranked by model accuracy instead of SQNR.
    const auto rank = [&](std::span<const float> data, const auto& make) {
      const std::vector<Format> cands = candidate_formats(tensor_stats(data), cfg);
      return select_among(data, cands, false, [&](const Format& f, const QuantReport&) { return accuracy_fn(make(f)); })
          .format;
    };
    global_w = rank(all_w, [&](const Format& f) { return detail::uniform(layers, f, act_base); });
    std::vector<Format> acts_signed = act_base;
    std::vector<std::size_t> signed_layers;
    for (std::size_t i = 0; i < layers.size(); ++i)
      if (std::find(nonneg.begin(), nonneg.end(), i) == nonneg.end()) signed_layers.push_back(i);
    if (!signed_layers.empty()) {
      std::vector<std::vector<float>> parts;
      for (std::size_t i : signed_layers) parts.push_back(acts[i]);
      global_a = rank(detail::concat(parts), [&](const Format& f) {
        std::vector<Format> a = act_base;
        for (std::size_t i : signed_layers) a[i] = f;
        return detail::uniform(layers, global_w, a);
      });
      for (std::size_t i : signed_layers) act_base[i] = global_a;
    }
    if (!nonneg.empty()) {
      global_u = rank(all_nonneg, [&](const Format& f) {
        std::vector<Format> a = act_base;
        for (std::size_t i : nonneg) a[i] = f;
        return detail::uniform(layers, global_w, a);
      });
      for (std::size_t i : nonneg) act_base[i] = *global_u;
      if (signed_layers.empty()) global_a = *global_u;
    }
  }

  Assignment out = detail::uniform(layers, global_w, act_base);
  out.global_weight = global_w;
  out.global_activation = global_a;

  // 3-5. per-layer * rule, gated by the objective
  double current = cfg.objective == Objective::accuracy ? accuracy_fn(out) : 0.0;
  const auto try_refine = [&](std::size_t i, bool weight_role) {
    LayerFormats& lf = out.layers[i];
    Format& slot = weight_role ? lf.weight : lf.activation;
    const TensorStats& st = weight_role ? wstats[i] : astats[i];
    const Format refined = detail::star_format(slot, st.max_mag);
    if (refined == slot) return;
    if (cfg.objective == Objective::sqnr) {
      const std::vector<float>& data = weight_role ? weights[i] : acts[i];
      if (error_report(data, refined).mse <= error_report(data, slot).mse) slot = refined;
      return;
    }
    const Format previous = slot;
    slot = refined;
    const double acc = accuracy_fn(out);
    if (acc >= current)
      current = acc;
    else
      slot = previous;
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try_refine(i, true);
    try_refine(i, false);
  }
  return out;
}

}  // namespace ffp8

#endif  // FFP8_SEARCH_HPP
