// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#include "ffp8/format.hpp"

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"

namespace ffp8 {
namespace {

Errc make_error(int x, int y, int z, int b, int n) {
  try {
    Format::make(x, y, z, b, n);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error";
  return Errc::SchemaViolation;
}

// A spread of formats: all 8-bit shapes at several biases plus a few
// narrower and wider ones.
std::vector<Format> sampled_formats() {
  std::vector<Format> out;
  for (int x = 0; x <= 1; ++x)
    for (int y = 1; y <= 6; ++y) {
      const int z = 8 - x - y;
      for (int b : {default_bias(y), default_bias(y) - 4, default_bias(y) + 4, -128, 127, 0, 15})
        out.push_back(Format::make(x, y, z, b));
    }
  out.push_back(Format::make(1, 2, 1, 1));
  out.push_back(Format::make(0, 3, 1, 3));
  out.push_back(Format::make(1, 5, 10, 15));  // FP16 layout
  out.push_back(Format::make(1, 8, 7, 127));  // BFP16 layout
  out.push_back(Format::make(0, 4, 8, 20));
  return out;
}

TEST(FormatTest, MakeValidatesFields) {
  EXPECT_NO_THROW(Format::make(1, 4, 3, 7, 8));
  EXPECT_NO_THROW(Format::make(0, 4, 4, 7, 8));
  EXPECT_EQ(make_error(1, 4, 4, 7, 8), Errc::WidthMismatch);
  EXPECT_EQ(make_error(2, 3, 3, 7, 8), Errc::BadSign);
  EXPECT_EQ(make_error(1, 0, 7, 0, 8), Errc::BadExponent);
  EXPECT_EQ(make_error(1, 1, 1, 0, 3), Errc::BadWidth);
  EXPECT_EQ(make_error(1, 10, 7, 0, 18), Errc::BadWidth);
  EXPECT_EQ(make_error(1, 4, 3, 128, 8), Errc::BadBias);
  EXPECT_EQ(make_error(1, 4, 3, -129, 8), Errc::BadBias);
  EXPECT_EQ(make_error(0, 12, 4, 0, 16), Errc::ExponentRange);
}

TEST(FormatTest, DefaultBias) {
  EXPECT_EQ(default_bias(4), 7);
  EXPECT_EQ(default_bias(5), 15);
  EXPECT_EQ(default_bias(1), 0);
  EXPECT_EQ(Format::with_default_bias(1, 5, 2), Format::make(1, 5, 2, 15));
}

TEST(FormatTest, RangeWindowOfConventionalE4M3) {
  const RangeWindow w = range_window(Format::make(1, 4, 3, 7));
  EXPECT_EQ(w.min_subnormal, std::ldexp(1.0, -9));
  EXPECT_EQ(w.min_normal, std::ldexp(1.0, -6));
  EXPECT_EQ(w.max, 480.0);
}

TEST(FormatTest, RangeWindowShiftsWithBias) {
  EXPECT_EQ(range_window(Format::make(1, 2, 5, 3)).max, 1.96875);
  const RangeWindow base = range_window(Format::make(1, 4, 3, 7));
  const RangeWindow shifted = range_window(Format::make(1, 4, 3, 15));
  EXPECT_EQ(shifted.max, 1.875);
  EXPECT_EQ(shifted.max, base.max / 256.0);
  EXPECT_EQ(shifted.min_subnormal, base.min_subnormal / 256.0);
}

TEST(FormatTest, RangeWindowWithoutFraction) {
  const RangeWindow w = range_window(Format::make(1, 6, 0, 31, 7));
  EXPECT_EQ(w.min_subnormal, w.min_normal);
}

TEST(FormatTest, RangeWindowMatchesEnumeration) {
  for (const Format& f : sampled_formats()) {
    if (f.width() > 12) continue;
    const auto table = oracle::enumerate(f.sign_bits(), f.exp_bits(), f.frac_bits(), f.bias());
    long double min_pos = INFINITY, max = 0, min_norm = INFINITY;
    for (const auto& e : table) {
      if (e.value > 0) {
        min_pos = std::min(min_pos, e.value);
        max = std::max(max, e.value);
        if ((e.magnitude_code >> f.frac_bits()) != 0) min_norm = std::min(min_norm, e.value);
      }
    }
    const RangeWindow w = range_window(f);
    EXPECT_EQ(w.min_subnormal, min_pos) << f.to_string();
    EXPECT_EQ(w.min_normal, min_norm) << f.to_string();
    EXPECT_EQ(w.max, max) << f.to_string();
  }
}

TEST(FormatTest, EnumerateSigned) {
  const ValueTable t(Format::make(1, 4, 3, 7));
  ASSERT_EQ(t.size(), 255u);
  EXPECT_EQ(t.values().back(), 480.0);
  EXPECT_EQ(t.values().front(), -480.0);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.values()[i], -t.values()[t.size() - 1 - i]);
  EXPECT_TRUE(std::is_sorted(t.values().begin(), t.values().end()));
  EXPECT_EQ(t.code_of(0.0), 0u);
}

TEST(FormatTest, EnumerateUnsigned) {
  const ValueTable t(Format::make(0, 4, 4, 7));
  ASSERT_EQ(t.size(), 256u);
  EXPECT_GE(t.values().front(), 0.0);
  EXPECT_EQ(std::set<double>(t.values().begin(), t.values().end()).size(), 256u);
}

TEST(FormatTest, SingleExponentBit) {
  const Format f = Format::make(1, 1, 6, 0);
  const ValueTable t(f);
  // e = 0: 0.f * 2^1, e = 1: 1.f * 2^1
  for (unsigned mag = 0; mag < 128; ++mag) {
    const double v = decode(f, static_cast<Code>(mag));
    const double expect = mag < 64 ? (mag / 64.0) * 2.0 : (1.0 + (mag - 64) / 64.0) * 2.0;
    EXPECT_EQ(v, expect);
  }
  EXPECT_EQ(t.values().back(), (2.0 - 1.0 / 64) * 2.0);
}

TEST(FormatTest, DecodeExamples) {
  const Format e4m3 = Format::make(1, 4, 3, 7);
  EXPECT_EQ(decode(e4m3, 0b0'0111'000), 1.0);
  EXPECT_EQ(decode(e4m3, 0b1'0000'001), -std::ldexp(1.0, -9));
  EXPECT_EQ(decode(Format::make(0, 4, 4, 7), 0b0111'0000), 1.0);
  EXPECT_TRUE(std::signbit(decode(e4m3, 0x80)));
  EXPECT_EQ(decode(e4m3, 0x80), 0.0);
  EXPECT_THROW(decode(e4m3, 0x100), Error);
}

TEST(FormatTest, EncodeExamples) {
  const Format e4m3 = Format::make(1, 4, 3, 7);
  EXPECT_EQ(encode_rne(e4m3, 1.0625), encode_rne(e4m3, 1.0));
  EXPECT_EQ(decode(e4m3, encode_rne(e4m3, 1.0625)), 1.0);
  EXPECT_EQ(decode(e4m3, encode_rne(e4m3, 1.1875)), 1.25);  // tie between 1.125 (odd) and 1.25
  EXPECT_EQ(decode(e4m3, encode_rne(e4m3, 500.0)), 480.0);
  EXPECT_EQ(decode(e4m3, encode_rne(e4m3, -500.0)), -480.0);
  EXPECT_EQ(decode(e4m3, encode_rne(e4m3, INFINITY)), 480.0);
  EXPECT_EQ(decode(e4m3, encode_rne(e4m3, -INFINITY)), -480.0);
  EXPECT_EQ(encode_rne(e4m3, 0.0), 0u);
  EXPECT_EQ(encode_rne(e4m3, -0.0), 0u);
  EXPECT_EQ(encode_rne(e4m3, -1e-30), 0u);
  // half the smallest denormal is a tie with zero, which is even
  EXPECT_EQ(encode_rne(e4m3, std::ldexp(1.0, -10)), 0u);
  EXPECT_EQ(encode_rne(e4m3, std::ldexp(1.5, -10)), 1u);
}

TEST(FormatTest, EncodeErrors) {
  try {
    encode_rne(Format::make(1, 4, 3, 7), NAN);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NaNInput);
  }
  try {
    encode_rne(Format::make(0, 4, 4, 7), -1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NegativeToUnsigned);
  }
  EXPECT_EQ(encode_rne(Format::make(0, 4, 4, 7), -0.0), 0u);
}

TEST(FormatTest, ZeroFractionTiesGoToEvenCode) {
  const Format f = Format::make(0, 4, 0, 7, 4);
  // 3 sits halfway between 2 (code 8) and 4 (code 9)
  EXPECT_EQ(encode_rne(f, 3.0), 8u);
  // 6 sits halfway between 4 (code 9) and 8 (code 10)
  EXPECT_EQ(encode_rne(f, 6.0), 10u);
}

TEST(FormatTest, Fp32ConverterExamples) {
  const Format e4m3 = Format::make(1, 4, 3, 7);
  EXPECT_EQ(to_fp32_bits(e4m3, encode_rne(e4m3, 1.0)), 0x3F800000u);
  EXPECT_EQ(to_fp32_bits(e4m3, encode_rne(e4m3, 480.0)), 0x43F00000u);
  EXPECT_EQ(to_fp32_bits(e4m3, 0x01), 0x3B000000u);
  EXPECT_EQ(to_fp32_bits(e4m3, 0x80), 0x80000000u);
  EXPECT_EQ(to_fp32_bits(e4m3, 0x00), 0u);
  // denormal 0.101b * 2^-6 normalizes to 1.01b * 2^-7
  EXPECT_EQ(fp32_from_bits(to_fp32_bits(e4m3, 0x05)), 0.625f * std::ldexp(1.0f, -6));
}

TEST(FormatTest, Fp32ConverterSubnormalOutput) {
  const Format f = Format::make(1, 2, 5, 127);
  for (std::uint32_t c = 0; c < f.code_count(); ++c) {
    const float expect = static_cast<float>(decode(f, static_cast<Code>(c)));
    EXPECT_EQ(to_fp32_bits(f, static_cast<Code>(c)), std::bit_cast<std::uint32_t>(expect));
  }
  EXPECT_LT(range_window(f).min_subnormal, std::ldexp(1.0, -126));
}

TEST(FormatTest, Fp32ConverterRejectsOutOfRange) {
  const Format f = Format::make(1, 4, 3, -128);
  try {
    to_fp32_bits(f, encode_rne(f, 1e300));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Fp32Overflow);
  }
}

TEST(FormatTest, RoundTripIsIdempotentOnEveryCode) {
  for (const Format& f : sampled_formats()) {
    for (std::uint32_t c = 0; c < f.code_count(); ++c) {
      const double v = decode(f, static_cast<Code>(c));
      EXPECT_EQ(decode(f, encode_rne(f, v)), v) << f.to_string() << " code " << c;
    }
  }
}

TEST(FormatTest, DecodeMatchesFieldwiseOracle) {
  for (const Format& f : sampled_formats()) {
    if (f.width() > 12) continue;
    for (const auto& e : oracle::enumerate(f.sign_bits(), f.exp_bits(), f.frac_bits(), f.bias()))
      EXPECT_EQ(static_cast<long double>(decode(f, static_cast<Code>(e.code))), e.value) << f.to_string();
  }
}

TEST(FormatTest, EncodeMatchesBruteForce) {
  std::mt19937_64 rng(1234);
  for (const Format& f : sampled_formats()) {
    if (f.width() > 8) continue;
    const auto table = oracle::enumerate(f.sign_bits(), f.exp_bits(), f.frac_bits(), f.bias());
    const RangeWindow w = range_window(f);
    std::uniform_real_distribution<double> lg(std::log2(w.min_subnormal) - 3, std::log2(w.max) + 2);
    for (int i = 0; i < 3000; ++i) {
      double v = std::exp2(lg(rng));
      if (f.is_signed() && (rng() & 1)) v = -v;
      ASSERT_EQ(encode_rne(f, v), oracle::nearest_even(table, v)) << f.to_string() << " v=" << v;
    }
  }
}

TEST(FormatTest, HalfUlpBound) {
  std::mt19937_64 rng(99);
  for (const Format& f : sampled_formats()) {
    const RangeWindow w = range_window(f);
    std::uniform_real_distribution<double> lg(std::log2(w.min_normal), std::log2(w.max));
    for (int i = 0; i < 2000; ++i) {
      const double v = std::min(std::exp2(lg(rng)), w.max);
      const double q = round_trip(f, v);
      EXPECT_LE(std::fabs(q - v) / v, std::ldexp(1.0, -(f.frac_bits() + 1))) << f.to_string() << " v=" << v;
    }
  }
}

TEST(FormatTest, CodeOrderIsValueOrder) {
  for (const Format& f : sampled_formats()) {
    const Code mags = static_cast<Code>(f.max_magnitude_code());
    for (Code c = 1; c <= mags; ++c) {
      EXPECT_LT(decode(f, c - 1), decode(f, c)) << f.to_string();
      if (f.is_signed()) {
        EXPECT_GT(decode(f, static_cast<Code>(f.sign_mask() | (c - 1))), decode(f, static_cast<Code>(f.sign_mask() | c)));
      }
    }
  }
}

TEST(FormatTest, Fp32ConverterIsExactWhereRepresentable) {
  for (const Format& f : sampled_formats()) {
    for (std::uint32_t c = 0; c < f.code_count(); ++c) {
      const double v = decode(f, static_cast<Code>(c));
      if (std::fabs(v) > std::numeric_limits<float>::max()) {
        EXPECT_THROW(to_fp32_bits(f, static_cast<Code>(c)), Error);
        continue;
      }
      const std::uint32_t bits = to_fp32_bits(f, static_cast<Code>(c));
      EXPECT_EQ(bits, std::bit_cast<std::uint32_t>(static_cast<float>(v))) << f.to_string() << " code " << c;
      EXPECT_EQ(static_cast<double>(fp32_from_bits(bits)), v);
    }
  }
}

TEST(FormatTest, UnsignedRefinesSigned) {
  for (int y = 1; y <= 6; ++y)
    for (int b : {default_bias(y), 3, -5, 20}) {
      const ValueTable s(Format::make(1, y, 7 - y, b));
      const ValueTable u(Format::make(0, y, 8 - y, b));
      for (double v : s.values())
        if (v >= 0.0) {
          EXPECT_TRUE(u.contains(v)) << y << "," << b << " " << v;
        }
    }
}

}  // namespace
}  // namespace ffp8
