#include "tsnmf/data_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

namespace tsnmf {

TextFormat parse_text_format(const std::string& name) {
  if (name == "csv") return TextFormat::Csv;
  if (name == "whitespace" || name == "ws") return TextFormat::Whitespace;
  throw std::invalid_argument("unknown format: " + name);
}

Axis parse_axis(const std::string& name) {
  if (name == "column" || name == "col") return Axis::Column;
  if (name == "row") return Axis::Row;
  throw std::invalid_argument("unknown axis: " + name);
}

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

struct Field {
  std::size_t begin;
  std::size_t end;
};

std::vector<Field> split(const std::string& line, TextFormat format) {
  std::vector<Field> fields;
  if (format == TextFormat::Csv) {
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      const std::size_t stop = comma == std::string::npos ? line.size() : comma;
      std::size_t b = start, e = stop;
      while (b < e && is_blank(line[b])) ++b;
      while (e > b && is_blank(line[e - 1])) --e;
      fields.push_back({b, e});
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } else {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_blank(line[i])) ++i;
      if (i >= line.size()) break;
      const std::size_t b = i;
      while (i < line.size() && !is_blank(line[i])) ++i;
      fields.push_back({b, i});
    }
  }
  return fields;
}

}  // namespace

Matrix<double> parse_matrix(std::istream& in, TextFormat format, bool header) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (header && line_no == 1) continue;
    bool blank = true;
    for (char c : line) blank = blank && is_blank(c);
    if (blank) continue;

    const auto fields = split(line, format);
    if (rows == 0)
      cols = fields.size();
    else if (fields.size() != cols)
      throw RaggedRows(line_no, cols, fields.size());
    for (const auto& f : fields) {
      double v = 0;
      const char* first = line.data() + f.begin;
      const char* last = line.data() + f.end;
      if (first != last && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, v);
      if (f.begin == f.end || ec != std::errc() || ptr != last)
        throw ParseError(line_no, f.begin + 1, "not a decimal number: '" + line.substr(f.begin, f.end - f.begin) + "'");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw ParseError(line_no, 0, "no data rows");
  Matrix<double> out(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return out;
}

Matrix<double> load_matrix(const std::string& path, TextFormat format, bool header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_matrix(in, format, header);
}

void write_matrix(std::ostream& out, const Matrix<double>& a, TextFormat format) {
  const char sep = format == TextFormat::Csv ? ',' : ' ';
  char buf[40];
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j > 0) out.put(sep);
      const int len = std::snprintf(buf, sizeof buf, "%.17g", a(i, j));
      out.write(buf, len);
    }
    out.put('\n');
  }
}

void save_matrix(const std::string& path, const Matrix<double>& a, TextFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_matrix(out, a, format);
  if (!out) throw std::runtime_error("write failed for " + path);
}

namespace {

void fill_uniform(Matrix<double>& a, Rng& rng) {
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i) a(i, j) = rng.uniform();
}

void check_dims(Index n, Index m, Index k) {
  if (n < 1 || m < 1 || k < 1) throw std::invalid_argument("dimensions must be >= 1");
}

}  // namespace

ProblemInstance generate_synthetic(Index n, Index m, Index k_true, double noise_std, RngSpec spec) {
  check_dims(n, m, k_true);
  if (!(noise_std >= 0)) throw std::invalid_argument("noise_std must be >= 0");
  Rng rng(spec);
  Matrix<double> x(n, k_true), y(k_true, m);
  fill_uniform(x, rng);
  fill_uniform(y, rng);
  ProblemInstance p;
  p.M = x * y;
  if (noise_std > 0)
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i) p.M(i, j) += noise_std * rng.normal();
  p.M = p.M.cwiseMax(0.0);
  p.n = n;
  p.m = m;
  p.provenance = SyntheticFrom{spec.seed, k_true, noise_std};
  return p;
}

FactorState<double> init_factors(Index n, Index m, Index k, RngSpec spec) {
  check_dims(n, m, k);
  Rng rng(spec);
  FactorState<double> st{Matrix<double>(n, k), Matrix<double>(k, m)};
  fill_uniform(st.X, rng);
  fill_uniform(st.Y, rng);
  return st;
}

}  // namespace tsnmf
