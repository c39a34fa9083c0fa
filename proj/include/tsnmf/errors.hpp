#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tsnmf {

// Base of every error raised by the library. Callers that only care about
// "the solve failed" catch this; the subclasses carry the context needed to
// recover (raise rho, fall back to Gauss-Newton, reinitialize, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Cholesky pivot was <= 0. `index()` is the offending block (or -1 for a
/// single dense factorization).
class NotPositiveDefinite : public Error {
 public:
  explicit NotPositiveDefinite(std::ptrdiff_t index = -1)
      : Error(index < 0 ? std::string("matrix is not positive definite")
                        : "block " + std::to_string(index) + " is not positive definite"),
        index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

class SingularTriangular : public Error {
 public:
  explicit SingularTriangular(std::ptrdiff_t index)
      : Error("zero diagonal entry at " + std::to_string(index) + " in triangular factor"),
        index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

class NonFiniteInput : public Error {
 public:
  explicit NonFiniteInput(const std::string& what) : Error(what + " contains NaN or Inf") {}
};

class MaxIterationsExceeded : public Error {
 public:
  using Error::Error;
};

class RankDeficientPassiveSet : public Error {
 public:
  using Error::Error;
};

/// Raised by the Schur-complement solve. With the full (non Gauss-Newton)
/// coupling this is expected occasionally and handled by the caller.
class SchurNotPositiveDefinite : public Error {
 public:
  SchurNotPositiveDefinite() : Error("Schur complement of the reduced system is not positive definite") {}
};

class LineSearchStall : public Error {
 public:
  using Error::Error;
};

class NonPositiveInput : public Error {
 public:
  using Error::Error;
};

class DegenerateFactor : public Error {
 public:
  using Error::Error;
};

/// Wraps a subproblem failure with the row/column it happened on.
class SubproblemError : public Error {
 public:
  SubproblemError(const std::string& axis, std::ptrdiff_t index, const std::string& cause)
      : Error("NNLS failure at " + axis + " " + std::to_string(index) + ": " + cause),
        index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& detail)
      : Error("parse error at line " + std::to_string(line) + ", column " + std::to_string(column) +
              ": " + detail),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class RaggedRows : public Error {
 public:
  RaggedRows(std::size_t line, std::size_t expected, std::size_t got)
      : Error("ragged rows: line " + std::to_string(line) + " has " + std::to_string(got) +
              " fields, expected " + std::to_string(expected)),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace tsnmf
