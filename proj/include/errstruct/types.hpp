#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace errstruct {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Hard cap on the number of coordinates handled by dense second-order evaluation.
inline constexpr std::size_t kMaxDimension = 64;

// Library errors. The CLI maps UsageError and its subclasses to exit code 2 and
// DomainError to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ParseError : public UsageError {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : UsageError(message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(const std::string& name, std::size_t offset)
      : ParseError("unknown identifier '" + name + "'", offset), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class PreconditionError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DimensionMismatch : public UsageError {
 public:
  using UsageError::UsageError;
};

// Covariance matrix with an eigenvalue below the PSD tolerance.
class StructureInvalid : public UsageError {
 public:
  StructureInvalid(const std::string& message, double min_eigenvalue)
      : UsageError(message), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class UnsupportedSampling : public UsageError {
 public:
  using UsageError::UsageError;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace errstruct
