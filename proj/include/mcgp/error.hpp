#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcgp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or out-of-range input.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Structural problems with user-supplied files or shapes (CLI exit code 2).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A factorization or objective became numerically meaningless (CLI exit code 3).
class NumericalDegeneracy : public Error {
 public:
  NumericalDegeneracy(const std::string& what, std::ptrdiff_t pivot = -1, std::string term = {})
      : Error(what), pivot_(pivot), term_(std::move(term)) {}

  /// Failing Cholesky pivot, or -1 when not applicable.
  [[nodiscard]] std::ptrdiff_t pivot() const noexcept { return pivot_; }
  /// ELBO term label (A-E) for ELBO failures, empty otherwise.
  [[nodiscard]] const std::string& term() const noexcept { return term_; }

 private:
  std::ptrdiff_t pivot_;
  std::string term_;
};

/// A cluster (or single output) carries no weight or no signal.
class DegenerateCluster : public NumericalDegeneracy {
 public:
  explicit DegenerateCluster(const std::string& what) : NumericalDegeneracy(what) {}
};

/// A FEM mesh that cannot support assembly or evaluation.
class MeshError : public NumericalDegeneracy {
 public:
  explicit MeshError(const std::string& what) : NumericalDegeneracy(what) {}
};

/// Query point not covered by any element.
class OutOfDomain : public Error {
 public:
  OutOfDomain(const std::string& what, std::ptrdiff_t nearest_element)
      : Error(what), nearest_(nearest_element) {}
  [[nodiscard]] std::ptrdiff_t nearest_element() const noexcept { return nearest_; }

 private:
  std::ptrdiff_t nearest_;
};

/// Model or dataset file that cannot be read back.
class LoadError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace mcgp
