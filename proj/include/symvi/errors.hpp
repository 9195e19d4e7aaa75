#pragma once

#include <stdexcept>
#include <string>

namespace symvi {

// Base class for every error this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

struct InvalidParameter : Error {
  explicit InvalidParameter(const std::string& msg) : Error(msg) {}
};

// Matrix is not symmetric positive definite (failed pivot or asymmetry guard).
struct NotPositiveDefinite : Error {
  explicit NotPositiveDefinite(const std::string& msg) : Error(msg) {}
};

struct NonFiniteDensity : Error {
  explicit NonFiniteDensity(const std::string& msg) : Error(msg) {}
};

struct NonFiniteGradient : Error {
  explicit NonFiniteGradient(const std::string& msg) : Error(msg) {}
};

struct Diverged : Error {
  explicit Diverged(const std::string& msg) : Error(msg) {}
};

struct QuadratureFailure : Error {
  explicit QuadratureFailure(const std::string& msg) : Error(msg) {}
};

struct BracketFailure : Error {
  explicit BracketFailure(const std::string& msg) : Error(msg) {}
};

struct DegenerateDenominator : Error {
  explicit DegenerateDenominator(const std::string& msg) : Error(msg) {}
};

struct TooFewValidSamples : Error {
  explicit TooFewValidSamples(const std::string& msg) : Error(msg) {}
};

struct ZeroScale : Error {
  explicit ZeroScale(const std::string& msg) : Error(msg) {}
};

struct MissingColumn : Error {
  explicit MissingColumn(const std::string& msg) : Error(msg) {}
};

struct WrongLength : Error {
  explicit WrongLength(const std::string& msg) : Error(msg) {}
};

struct InvalidConfig : Error {
  explicit InvalidConfig(const std::string& msg) : Error(msg) {}
};

struct IoFailure : Error {
  explicit IoFailure(const std::string& msg) : Error(msg) {}
};

}  // namespace symvi
