// Copyright 2026 The FFP8 Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef FFP8_ERROR_HPP
#define FFP8_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace ffp8 {

enum class Errc {
  // format construction
  WidthMismatch,
  BadSign,
  BadExponent,
  BadFraction,
  BadWidth,
  BadBias,
  ExponentRange,
  // codec
  NaNInput,
  NegativeToUnsigned,
  BadCode,
  Fp32Overflow,
  // container
  BadMagic,
  BadVersion,
  TruncatedStream,
  TrailingData,
  MalformedStream,
  DuplicateTensorName,
  UnresolvedReference,
  // analysis / search
  NonFiniteInput,
  NonPositiveMax,
  EmptyCandidates,
  EmptyModel,
  EmptyCalibration,
  // refnet
  BadSizes,
  DivergedTraining,
  ShapeMismatch,
  MissingAssignment,
  // reports
  SchemaViolation,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::WidthMismatch: return "WidthMismatch";
    case Errc::BadSign: return "BadSign";
    case Errc::BadExponent: return "BadExponent";
    case Errc::BadFraction: return "BadFraction";
    case Errc::BadWidth: return "BadWidth";
    case Errc::BadBias: return "BadBias";
    case Errc::ExponentRange: return "ExponentRange";
    case Errc::NaNInput: return "NaNInput";
    case Errc::NegativeToUnsigned: return "NegativeToUnsigned";
    case Errc::BadCode: return "BadCode";
    case Errc::Fp32Overflow: return "Fp32Overflow";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadVersion: return "BadVersion";
    case Errc::TruncatedStream: return "TruncatedStream";
    case Errc::TrailingData: return "TrailingData";
    case Errc::MalformedStream: return "MalformedStream";
    case Errc::DuplicateTensorName: return "DuplicateTensorName";
    case Errc::UnresolvedReference: return "UnresolvedReference";
    case Errc::NonFiniteInput: return "NonFiniteInput";
    case Errc::NonPositiveMax: return "NonPositiveMax";
    case Errc::EmptyCandidates: return "EmptyCandidates";
    case Errc::EmptyModel: return "EmptyModel";
    case Errc::EmptyCalibration: return "EmptyCalibration";
    case Errc::BadSizes: return "BadSizes";
    case Errc::DivergedTraining: return "DivergedTraining";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingAssignment: return "MissingAssignment";
    case Errc::SchemaViolation: return "SchemaViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ffp8

#endif  // FFP8_ERROR_HPP
