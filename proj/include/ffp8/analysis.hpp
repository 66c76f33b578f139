// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FFP8_ANALYSIS_HPP
#define FFP8_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>

#include "ffp8/error.hpp"
#include "ffp8/format.hpp"
#include "ffp8/tensor.hpp"

namespace ffp8 {

/// Magnitude summary of one tensor. Bin k of the histogram counts the
/// nonzero elements with 2^k <= |v| < 2^(k+1).
struct TensorStats {
  double max_mag = 0.0;
  double min_nonzero_mag = 0.0;  // 0 when every element is zero
  std::uint64_t zero_count = 0;
  std::uint64_t negative_count = 0;
  std::uint64_t total_count = 0;
  std::map<int, std::uint64_t> log2_hist;

  std::uint64_t nonzero_count() const noexcept { return total_count - zero_count; }

  /// Associative and commutative, so partial stats reduce in any order.
  void merge(const TensorStats& other) {
    if (other.nonzero_count() > 0) {
      min_nonzero_mag = nonzero_count() > 0 ? std::min(min_nonzero_mag, other.min_nonzero_mag) : other.min_nonzero_mag;
      max_mag = std::max(max_mag, other.max_mag);
    }
    zero_count += other.zero_count;
    negative_count += other.negative_count;
    total_count += other.total_count;
    for (const auto& [bin, n] : other.log2_hist) log2_hist[bin] += n;
  }

  friend bool operator==(const TensorStats&, const TensorStats&) = default;
};

/// floor(log2 |v|) by exponent extraction; exact for subnormals too.
inline int log2_bin(double v) { return std::ilogb(v); }

inline TensorStats tensor_stats(std::span<const float> values) {
  TensorStats s;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float v = values[i];
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteInput, "element " + std::to_string(i) + " is not finite");
    ++s.total_count;
    if (v < 0.0f) ++s.negative_count;
    if (v == 0.0f) {
      ++s.zero_count;
      continue;
    }
    const double a = std::fabs(static_cast<double>(v));
    if (s.nonzero_count() == 1) {
      s.max_mag = s.min_nonzero_mag = a;
    } else {
      s.max_mag = std::max(s.max_mag, a);
      s.min_nonzero_mag = std::min(s.min_nonzero_mag, a);
    }
    ++s.log2_hist[log2_bin(a)];
  }
  return s;
}

inline TensorStats tensor_stats(const Tensor& t) {
  if (!t.is_fp32()) throw Error(Errc::ShapeMismatch, t.name + " is not an FP32 tensor");
  return tensor_stats(t.values());
}

/// Where the nonzero elements fall relative to a format's range window.
/// Zeros are counted apart and excluded from the fractions.
struct Coverage {
  std::uint64_t below_window = 0;  // |v| < min_subnormal
  std::uint64_t in_denorm = 0;     // min_subnormal <= |v| < min_normal
  std::uint64_t in_norm = 0;       // min_normal <= |v| <= max
  std::uint64_t above_window = 0;  // |v| > max
  std::uint64_t zero_count = 0;

  std::uint64_t nonzero_count() const noexcept { return below_window + in_denorm + in_norm + above_window; }
  double fraction(std::uint64_t part) const noexcept {
    const std::uint64_t n = nonzero_count();
    return n == 0 ? 0.0 : static_cast<double>(part) / static_cast<double>(n);
  }
  double below_window_frac() const noexcept { return fraction(below_window); }
  double in_denorm_frac() const noexcept { return fraction(in_denorm); }
  double in_norm_frac() const noexcept { return fraction(in_norm); }
  double above_window_frac() const noexcept { return fraction(above_window); }

  friend bool operator==(const Coverage&, const Coverage&) = default;
};

/// Exact classification from raw values.
inline Coverage coverage(std::span<const float> values, const Format& fmt) {
  const RangeWindow w = range_window(fmt);
  Coverage c;
  for (float f : values) {
    if (!std::isfinite(f)) throw Error(Errc::NonFiniteInput, "non-finite element in coverage");
    const double a = std::fabs(static_cast<double>(f));
    if (a == 0.0)
      ++c.zero_count;
    else if (a < w.min_subnormal)
      ++c.below_window;
    else if (a < w.min_normal)
      ++c.in_denorm;
    else if (a <= w.max)
      ++c.in_norm;
    else
      ++c.above_window;
  }
  return c;
}

/// Classification from the histogram alone. A bin is only charged to a
/// region that contains all of [2^k, 2^(k+1)): it is below the window only
/// if 2^(k+1) <= min_subnormal and above only if 2^k > max. Bins that
/// straddle a boundary go to the in-window side (denorm when the bin starts
/// below min_normal, norm otherwise).
inline Coverage coverage(const TensorStats& stats, const Format& fmt) {
  const RangeWindow w = range_window(fmt);
  Coverage c;
  c.zero_count = stats.zero_count;
  for (const auto& [bin, n] : stats.log2_hist) {
    const double lo = std::ldexp(1.0, bin);
    const double hi = std::ldexp(1.0, bin + 1);
    if (hi <= w.min_subnormal)
      c.below_window += n;
    else if (lo > w.max)
      c.above_window += n;
    else if (lo < w.min_normal)
      c.in_denorm += n;
    else
      c.in_norm += n;
  }
  return c;
}

/// Round-trip error of encoding `values` in `fmt`.
inline QuantReport error_metrics(std::span<const float> values, const Format& fmt) { return error_report(values, fmt); }

inline QuantReport error_metrics(const Tensor& t, const Format& fmt) {
  if (!t.is_fp32()) throw Error(Errc::ShapeMismatch, t.name + " is not an FP32 tensor");
  return error_report(t.values(), fmt);
}

}  // namespace ffp8

#endif  // FFP8_ANALYSIS_HPP
