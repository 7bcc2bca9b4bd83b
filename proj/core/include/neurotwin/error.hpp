#pragma once

#include <stdexcept>
#include <string>

namespace neurotwin {

/// Base class for every error raised by the core library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration or spec value is out of its valid range.
class InvalidSpecError : public Error {
 public:
  using Error::Error;
};

/// Mismatched lengths or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but carries no usable information (zero variance,
/// single-class data, too few background patches, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// An iterative update ran away.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// Malformed file or record content.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage failed; wraps the underlying message with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace neurotwin
