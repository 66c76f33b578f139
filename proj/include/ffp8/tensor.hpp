// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FFP8_TENSOR_HPP
#define FFP8_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ffp8/error.hpp"
#include "ffp8/format.hpp"

namespace ffp8 {

enum class Role : std::uint8_t { weight = 0, activation = 1 };

inline const char* role_name(Role r) { return r == Role::weight ? "weight" : "activation"; }

/// FFP8 codes together with the format that gives them meaning.
struct EncodedPayload {
  Format format;
  std::vector<Code> codes;

  friend bool operator==(const EncodedPayload&, const EncodedPayload&) = default;
};

struct Tensor {
  std::string name;
  Role role = Role::weight;
  std::vector<std::uint32_t> shape;
  std::variant<std::vector<float>, EncodedPayload> payload;

  std::size_t element_count() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t acc, std::uint32_t d) { return acc * d; });
  }

  bool is_fp32() const noexcept { return std::holds_alternative<std::vector<float>>(payload); }
  bool is_encoded() const noexcept { return std::holds_alternative<EncodedPayload>(payload); }

  const std::vector<float>& values() const { return std::get<std::vector<float>>(payload); }
  std::vector<float>& values() { return std::get<std::vector<float>>(payload); }
  const EncodedPayload& encoded() const { return std::get<EncodedPayload>(payload); }

  /// FP32 payloads compare by bit pattern.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    if (a.name != b.name || a.role != b.role || a.shape != b.shape) return false;
    if (a.is_fp32() != b.is_fp32()) return false;
    if (a.is_encoded()) return a.encoded() == b.encoded();
    const auto& va = a.values();
    const auto& vb = b.values();
    return va.size() == vb.size() && (va.empty() || std::memcmp(va.data(), vb.data(), va.size() * sizeof(float)) == 0);
  }
};

inline Tensor make_fp32_tensor(std::string name, Role role, std::vector<std::uint32_t> shape,
                               std::vector<float> values) {
  Tensor t{std::move(name), role, std::move(shape), std::move(values)};
  if (t.element_count() != t.values().size())
    throw Error(Errc::ShapeMismatch, t.name + ": shape holds " + std::to_string(t.element_count()) +
                                         " elements, payload " + std::to_string(t.values().size()));
  return t;
}

/// Window statistics and error of one quantization pass.
struct QuantReport {
  std::uint64_t below_window_count = 0;  // 0 < |v| < min_subnormal
  std::uint64_t above_window_count = 0;  // |v| > max
  std::uint64_t in_window_count = 0;     // everything else, zeros included
  double mse = 0.0;
  double max_abs_err = 0.0;
  /// 10 log10(signal / noise); +infinity when the noise power is zero.
  double sqnr_db = std::numeric_limits<double>::infinity();

  std::uint64_t element_count() const noexcept { return below_window_count + above_window_count + in_window_count; }
};

/// Encodes `values` into `out` (same length) and reports window counts and
/// error of the round trip.
inline QuantReport quantize_values(std::span<const float> values, const Format& fmt, std::span<Code> out) {
  if (out.size() != values.size())
    throw Error(Errc::ShapeMismatch, "output span length differs from input length");
  const RangeWindow w = range_window(fmt);
  QuantReport r;
  double signal = 0.0;
  double noise = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteInput, "element " + std::to_string(i) + " is not finite");
    const Code c = encode_rne(fmt, v);
    out[i] = c;
    const double a = std::fabs(v);
    if (a > w.max)
      ++r.above_window_count;
    else if (a > 0.0 && a < w.min_subnormal)
      ++r.below_window_count;
    else
      ++r.in_window_count;
    const double err = decode(fmt, c) - v;
    signal += v * v;
    noise += err * err;
    r.max_abs_err = std::max(r.max_abs_err, std::fabs(err));
  }
  if (!values.empty()) r.mse = noise / static_cast<double>(values.size());
  r.sqnr_db = noise > 0.0 ? 10.0 * std::log10(signal / noise) : std::numeric_limits<double>::infinity();
  return r;
}

inline QuantReport error_report(std::span<const float> values, const Format& fmt) {
  std::vector<Code> scratch(values.size());
  return quantize_values(values, fmt, scratch);
}

inline std::pair<Tensor, QuantReport> quantize_tensor(const Tensor& t, const Format& fmt) {
  if (!t.is_fp32()) throw Error(Errc::ShapeMismatch, t.name + " is already encoded");
  EncodedPayload enc{fmt, std::vector<Code>(t.values().size())};
  QuantReport report = quantize_values(t.values(), fmt, enc.codes);
  return {Tensor{t.name, t.role, t.shape, std::move(enc)}, report};
}

/// Exact expansion of an encoded tensor through the FP32 converter.
inline Tensor dequantize_tensor(const Tensor& t) {
  if (!t.is_encoded()) throw Error(Errc::ShapeMismatch, t.name + " is not encoded");
  const EncodedPayload& enc = t.encoded();
  std::vector<float> out(enc.codes.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fp32_from_bits(to_fp32_bits(enc.format, enc.codes[i]));
  return Tensor{t.name, t.role, t.shape, std::move(out)};
}

/// Quantize-then-dequantize in place; the FP32 simulation of an FFP8 store.
inline void fake_quantize(std::span<float> values, const Format& fmt) {
  for (float& v : values) {
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteInput, "non-finite value in fake_quantize");
    v = fp32_from_bits(to_fp32_bits(fmt, encode_rne(fmt, v)));
  }
}

}  // namespace ffp8

#endif  // FFP8_TENSOR_HPP
