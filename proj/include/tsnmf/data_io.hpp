#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>

#include "tsnmf/factor_state.hpp"
#include "tsnmf/rng.hpp"

namespace tsnmf {

enum class TextFormat { Csv, Whitespace };

TextFormat parse_text_format(const std::string& name);

/// Reads a rectangular grid of decimal reals, one matrix row per line.
/// Blank lines are ignored; `header` skips the first line.
Matrix<double> parse_matrix(std::istream& in, TextFormat format, bool header = false);
Matrix<double> load_matrix(const std::string& path, TextFormat format, bool header = false);

/// Writes one row per line with 17 significant digits, so that loading the
/// output reproduces every entry exactly.
void write_matrix(std::ostream& out, const Matrix<double>& a, TextFormat format = TextFormat::Csv);
void save_matrix(const std::string& path, const Matrix<double>& a, TextFormat format = TextFormat::Csv);

enum class Axis { Column, Row };

Axis parse_axis(const std::string& name);

/// Shifts every column (or row) whose minimum is negative up by -min, so the
/// slice's minimum becomes 0. Nonnegative slices are untouched.
template <typename Scalar>
Matrix<Scalar> shift_nonnegative(const Matrix<Scalar>& a, Axis axis) {
  Matrix<Scalar> out = a;
  if (axis == Axis::Column) {
    for (Index j = 0; j < out.cols(); ++j) {
      const Scalar lo = out.col(j).minCoeff();
      if (lo < Scalar(0)) out.col(j).array() -= lo;
    }
  } else {
    for (Index i = 0; i < out.rows(); ++i) {
      const Scalar lo = out.row(i).minCoeff();
      if (lo < Scalar(0)) out.row(i).array() -= lo;
    }
  }
  return out;
}

struct LoadedFrom {
  std::string path;
};

struct SyntheticFrom {
  std::uint64_t seed = 0;
  Index k_true = 0;
  double noise_std = 0;
};

struct ProblemInstance {
  Matrix<double> M;
  Index n = 0, m = 0;
  std::variant<LoadedFrom, SyntheticFrom> provenance;
};

/// X ~ U(0,1)^{n x k}, Y ~ U(0,1)^{k x m}, M = max(X Y + N(0, noise_std^2), 0).
/// Draw order: X column-major, then Y column-major, then the noise for M
/// column-major.
ProblemInstance generate_synthetic(Index n, Index m, Index k_true, double noise_std, RngSpec rng);

/// Initial factors with entries ~ U(0,1), X drawn before Y, each column-major.
FactorState<double> init_factors(Index n, Index m, Index k, RngSpec rng);

}  // namespace tsnmf
