// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

/*
 * Flexible 8-bit floating point (FFP8) value semantics.
 *
 * A format is the tuple (x, y, z, b) over an n = x + y + z bit code:
 *
 *   [ sign: x bits ][ exponent: y bits ][ fraction: z bits ]
 *
 * with x in {0, 1} and an arbitrary integer exponent bias b. Exponent field
 * zero holds the denormals 0.f * 2^(1-b); every other exponent field value,
 * including all-ones, holds the normal number 1.f * 2^(e-b). No code is
 * reserved for Inf or NaN, so an n-bit format has 2^n ordinary codes.
 *
 * All values are dyadic rationals with at most z + 1 significant bits, so
 * they are carried around exactly as doubles.
 */

#ifndef FFP8_FORMAT_HPP
#define FFP8_FORMAT_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "ffp8/error.hpp"

namespace ffp8 {

/// Raw code of an n-bit format, right-aligned. n never exceeds 16.
using Code = std::uint16_t;

inline constexpr int kMinWidth = 4;
inline constexpr int kMaxWidth = 16;
inline constexpr int kMinBias = -128;
inline constexpr int kMaxBias = 127;

/// Conventional bias of a y-bit exponent field.
constexpr int default_bias(int exp_bits) noexcept { return (1 << (exp_bits - 1)) - 1; }

class Format {
 public:
  /// Validates and builds (x, y, z, b) at total width n.
  static Format make(int sign_bits, int exp_bits, int frac_bits, int bias, int width) {
    if (sign_bits != 0 && sign_bits != 1)
      throw Error(Errc::BadSign, "sign bit count must be 0 or 1, got " + std::to_string(sign_bits));
    if (exp_bits < 1)
      throw Error(Errc::BadExponent, "exponent needs at least one bit, got " + std::to_string(exp_bits));
    if (frac_bits < 0)
      throw Error(Errc::BadFraction, "negative fraction width " + std::to_string(frac_bits));
    if (width < kMinWidth || width > kMaxWidth)
      throw Error(Errc::BadWidth, "width must lie in [4, 16], got " + std::to_string(width));
    if (bias < kMinBias || bias > kMaxBias)
      throw Error(Errc::BadBias, "bias must lie in [-128, 127], got " + std::to_string(bias));
    if (sign_bits + exp_bits + frac_bits != width)
      throw Error(Errc::WidthMismatch, std::to_string(sign_bits) + "+" + std::to_string(exp_bits) + "+" +
                                           std::to_string(frac_bits) + " != " + std::to_string(width));
    // The largest value is below 2^(2^y - b); keep it a finite double.
    if ((1L << exp_bits) - 1 - bias > 1023)
      throw Error(Errc::ExponentRange, "values of this format overflow binary64");
    return Format(sign_bits, exp_bits, frac_bits, bias);
  }

  /// Width is implied by the fields.
  static Format make(int sign_bits, int exp_bits, int frac_bits, int bias) {
    return make(sign_bits, exp_bits, frac_bits, bias, sign_bits + exp_bits + frac_bits);
  }

  static Format with_default_bias(int sign_bits, int exp_bits, int frac_bits) {
    return make(sign_bits, exp_bits, frac_bits, exp_bits >= 1 ? default_bias(exp_bits) : 0);
  }

  int sign_bits() const noexcept { return sign_bits_; }
  int exp_bits() const noexcept { return exp_bits_; }
  int frac_bits() const noexcept { return frac_bits_; }
  int bias() const noexcept { return bias_; }
  int width() const noexcept { return sign_bits_ + exp_bits_ + frac_bits_; }
  bool is_signed() const noexcept { return sign_bits_ == 1; }

  std::uint32_t code_count() const noexcept { return std::uint32_t{1} << width(); }
  /// Largest exponent||fraction field value, i.e. the code of +max.
  Code max_magnitude_code() const noexcept { return static_cast<Code>((1u << (exp_bits_ + frac_bits_)) - 1); }
  Code sign_mask() const noexcept {
    return is_signed() ? static_cast<Code>(1u << (exp_bits_ + frac_bits_)) : Code{0};
  }
  int max_exp_field() const noexcept { return (1 << exp_bits_) - 1; }

  /// "(x,y,z,b)"
  std::string to_string() const {
    return "(" + std::to_string(sign_bits_) + "," + std::to_string(exp_bits_) + "," + std::to_string(frac_bits_) +
           "," + std::to_string(bias_) + ")";
  }

  friend auto operator<=>(const Format&, const Format&) = default;

 private:
  Format(int x, int y, int z, int b)
      : sign_bits_(static_cast<std::int8_t>(x)),
        exp_bits_(static_cast<std::int8_t>(y)),
        frac_bits_(static_cast<std::int8_t>(z)),
        bias_(static_cast<std::int16_t>(b)) {}

  std::int8_t sign_bits_;
  std::int8_t exp_bits_;
  std::int8_t frac_bits_;
  std::int16_t bias_;
};

/// Magnitude boundaries of a format. When z = 0 there are no nonzero
/// denormals and min_subnormal is reported equal to min_normal.
struct RangeWindow {
  double min_subnormal;
  double min_normal;
  double max;
};

inline RangeWindow range_window(const Format& fmt) {
  const int z = fmt.frac_bits();
  const int b = fmt.bias();
  RangeWindow w{};
  w.min_normal = std::ldexp(1.0, 1 - b);
  w.min_subnormal = z == 0 ? w.min_normal : std::ldexp(1.0, 1 - b - z);
  w.max = std::ldexp(2.0 - std::ldexp(1.0, -z), fmt.max_exp_field() - b);
  return w;
}

namespace detail {

struct Fields {
  unsigned sign;
  unsigned exponent;
  unsigned fraction;
};

inline Fields split(const Format& fmt, Code code) {
  if ((std::uint32_t{code} >> fmt.width()) != 0)
    throw Error(Errc::BadCode, "code " + std::to_string(code) + " exceeds " + std::to_string(fmt.width()) + " bits");
  const int z = fmt.frac_bits();
  const int y = fmt.exp_bits();
  Fields f{};
  f.fraction = code & ((1u << z) - 1);
  f.exponent = (code >> z) & ((1u << y) - 1);
  f.sign = fmt.is_signed() ? (code >> (y + z)) & 1u : 0u;
  return f;
}

/// Value of the exponent||fraction field, sign ignored.
inline double magnitude_of(const Format& fmt, unsigned mag_code) {
  const int z = fmt.frac_bits();
  const unsigned e = mag_code >> z;
  const unsigned f = mag_code & ((1u << z) - 1);
  if (e == 0) return std::ldexp(static_cast<double>(f), 1 - fmt.bias() - z);
  return std::ldexp(static_cast<double>((1u << z) + f), static_cast<int>(e) - fmt.bias() - z);
}

/// Round a nonnegative magnitude to the nearest exponent||fraction code.
/// Exact ties go to the even code; past the window it saturates.
inline unsigned round_magnitude(const Format& fmt, double a) {
  const unsigned max_code = fmt.max_magnitude_code();
  if (a == 0.0) return 0;
  const RangeWindow w = range_window(fmt);
  if (a >= w.max) return max_code;

  const int z = fmt.frac_bits();
  unsigned lo = 0;
  if (a < w.min_normal) {
    // denormal grid: multiples of 2^(1-b-z)
    lo = static_cast<unsigned>(std::floor(std::ldexp(a, fmt.bias() + z - 1)));
  } else {
    const int k = std::ilogb(a);
    const unsigned e = static_cast<unsigned>(k + fmt.bias());
    const double frac = std::ldexp(std::ldexp(a, -k) - 1.0, z);
    lo = (e << z) | static_cast<unsigned>(std::floor(frac));
  }
  const double lo_v = magnitude_of(fmt, lo);
  if (a == lo_v) return lo;
  const unsigned hi = lo + 1;  // a < max, so lo < max_code
  const double mid = (lo_v + magnitude_of(fmt, hi)) * 0.5;  // exact: both have <= z+2 bits
  if (a < mid) return lo;
  if (a > mid) return hi;
  return (lo & 1u) == 0 ? lo : hi;
}

}  // namespace detail

/// Exact value of a code. The negative-zero code decodes to -0.0.
inline double decode(const Format& fmt, Code code) {
  const detail::Fields f = detail::split(fmt, code);
  const double mag = detail::magnitude_of(fmt, (f.exponent << fmt.frac_bits()) | f.fraction);
  return f.sign ? -mag : mag;
}

/// Round-to-nearest-even encoding. |v| beyond the window saturates to the
/// largest magnitude; |v| under half the smallest denormal flushes to zero.
/// -0.0 encodes to the +0 code.
inline Code encode_rne(const Format& fmt, double v) {
  if (std::isnan(v)) throw Error(Errc::NaNInput, "cannot encode NaN in " + fmt.to_string());
  if (!fmt.is_signed() && v < 0.0)
    throw Error(Errc::NegativeToUnsigned, "negative value " + std::to_string(v) + " for " + fmt.to_string());
  const unsigned mag = detail::round_magnitude(fmt, std::fabs(v));
  if (v < 0.0 && mag != 0) return static_cast<Code>(fmt.sign_mask() | mag);
  return static_cast<Code>(mag);
}

/// Quantize-dequantize in one step.
inline double round_trip(const Format& fmt, double v) { return decode(fmt, encode_rne(fmt, v)); }

/// Bit-level model of the FFP8 -> FP32 converter: recover the sign from x,
/// split exponent and fraction using y and z, rebias the exponent with b and
/// normalize FFP8 denormals. Values under 2^-126 come out as FP32
/// subnormals; values of 2^128 and beyond have no binary32 pattern and raise
/// Fp32Overflow.
inline std::uint32_t to_fp32_bits(const Format& fmt, Code code) {
  const detail::Fields f = detail::split(fmt, code);
  const int z = fmt.frac_bits();
  const std::uint32_t sign = std::uint32_t{f.sign} << 31;
  if (f.exponent == 0 && f.fraction == 0) return sign;

  int exponent = 0;
  std::uint32_t mantissa = 0;
  if (f.exponent != 0) {
    exponent = static_cast<int>(f.exponent) - fmt.bias();
    mantissa = std::uint32_t{f.fraction} << (23 - z);
  } else {
    const int lead = std::bit_width(f.fraction) - 1;
    exponent = 1 - fmt.bias() - (z - lead);
    mantissa = (std::uint32_t{f.fraction} ^ (1u << lead)) << (23 - lead);
  }

  const int biased = exponent + 127;
  if (biased >= 255)
    throw Error(Errc::Fp32Overflow, "code " + std::to_string(code) + " of " + fmt.to_string() +
                                        " is 2^" + std::to_string(exponent) + " scale, beyond binary32");
  if (biased <= 0) {
    const std::uint32_t significand = (1u << 23) | mantissa;
    const int shift = 1 - biased;
    // n <= 16 keeps every FFP8 denormal on the binary32 subnormal grid.
    if (shift > 24 || (significand & ((1u << shift) - 1)) != 0)
      throw Error(Errc::Fp32Overflow, "code " + std::to_string(code) + " underflows binary32");
    return sign | (significand >> shift);
  }
  return sign | (static_cast<std::uint32_t>(biased) << 23) | mantissa;
}

inline float fp32_from_bits(std::uint32_t bits) noexcept { return std::bit_cast<float>(bits); }

/// Every finite value of a format, ascending, with its canonical code.
class ValueTable {
 public:
  explicit ValueTable(const Format& fmt) : format_(fmt) {
    const std::uint32_t count = fmt.code_count();
    std::vector<std::pair<double, Code>> entries;
    entries.reserve(count);
    for (std::uint32_t c = 0; c < count; ++c) {
      const Code code = static_cast<Code>(c);
      if (code == fmt.sign_mask() && fmt.is_signed()) continue;  // -0
      entries.emplace_back(decode(fmt, code), code);
    }
    std::sort(entries.begin(), entries.end());
    values_.reserve(entries.size());
    codes_.reserve(entries.size());
    for (const auto& [v, c] : entries) {
      values_.push_back(v);
      codes_.push_back(c);
    }
  }

  const Format& format() const noexcept { return format_; }
  const std::vector<double>& values() const noexcept { return values_; }
  const std::vector<Code>& codes() const noexcept { return codes_; }
  std::size_t size() const noexcept { return values_.size(); }

  /// Canonical code of an exactly representable value.
  Code code_of(double v) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), v);
    if (it == values_.end() || *it != v)
      throw Error(Errc::BadCode, std::to_string(v) + " is not a value of " + format_.to_string());
    return codes_[static_cast<std::size_t>(it - values_.begin())];
  }

  bool contains(double v) const { return std::binary_search(values_.begin(), values_.end(), v); }

 private:
  Format format_;
  std::vector<double> values_;
  std::vector<Code> codes_;
};

inline ValueTable enumerate_values(const Format& fmt) { return ValueTable(fmt); }

}  // namespace ffp8

#endif  // FFP8_FORMAT_HPP
