#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mixedcurv {

enum class ErrorKind {
  PointOutsideDomain,
  MetricNotPositiveDefinite,
  NumericalBreakdown,
  DegeneratePlane,
  NotBlockDiagonal,
  RankDeficientBlock,
  BlocksNotOrthogonal,
  NotUmbilic,
  RankDeficientDifferential,
  NotIsometric,
  NotOrthonormal,
  InfeasibleRanks,
  EmptyRegion,
  RanksExceedDistribution,
  SyntaxError,
  UnknownIdentifier,
  UnknownFunction,
  NonPositiveWarping,
  DimensionMismatch,
  ValidationError,
  UnboundedLeaf,
  MissingImmersion,
  PrerequisiteNotMet,
  NotTwistedProduct,
  UnboundedDomainForIntegral,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::PointOutsideDomain: return "PointOutsideDomain";
    case ErrorKind::MetricNotPositiveDefinite: return "MetricNotPositiveDefinite";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::DegeneratePlane: return "DegeneratePlane";
    case ErrorKind::NotBlockDiagonal: return "NotBlockDiagonal";
    case ErrorKind::RankDeficientBlock: return "RankDeficientBlock";
    case ErrorKind::BlocksNotOrthogonal: return "BlocksNotOrthogonal";
    case ErrorKind::NotUmbilic: return "NotUmbilic";
    case ErrorKind::RankDeficientDifferential: return "RankDeficientDifferential";
    case ErrorKind::NotIsometric: return "NotIsometric";
    case ErrorKind::NotOrthonormal: return "NotOrthonormal";
    case ErrorKind::InfeasibleRanks: return "InfeasibleRanks";
    case ErrorKind::EmptyRegion: return "EmptyRegion";
    case ErrorKind::RanksExceedDistribution: return "RanksExceedDistribution";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnknownIdentifier: return "UnknownIdentifier";
    case ErrorKind::UnknownFunction: return "UnknownFunction";
    case ErrorKind::NonPositiveWarping: return "NonPositiveWarping";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::UnboundedLeaf: return "UnboundedLeaf";
    case ErrorKind::MissingImmersion: return "MissingImmersion";
    case ErrorKind::PrerequisiteNotMet: return "PrerequisiteNotMet";
    case ErrorKind::NotTwistedProduct: return "NotTwistedProduct";
    case ErrorKind::UnboundedDomainForIntegral: return "UnboundedDomainForIntegral";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Input problems (exit 2) versus numerical trouble (exit 3).
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::NumericalBreakdown || kind_ == ErrorKind::MetricNotPositiveDefinite ||
           kind_ == ErrorKind::DegeneratePlane;
  }

 private:
  ErrorKind kind_;
};

/// Parser failure with a byte offset into the source text.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::string expected, const std::string& src)
      : Error(ErrorKind::SyntaxError,
              "at offset " + std::to_string(offset) + " in '" + src + "', expected " + expected),
        offset_(offset),
        expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

}  // namespace mixedcurv
