#pragma once

#include <iosfwd>
#include <string>
#include <tuple>
#include <vector>

#include "tsnmf/two_stage.hpp"

namespace tsnmf::cli {

// Process exit codes.
enum Exit : int { kOk = 0, kUsage = 1, kDataError = 2, kSolverError = 3 };

struct Size {
  Index n = 0, m = 0, k = 0;
};

struct BenchSpec {
  std::vector<Size> sizes;
  std::vector<std::uint64_t> seeds;
  double time_cap_s = 60;
  std::vector<Variant> variants{Variant::TwoStage, Variant::AnlsOnly, Variant::IpmOnly};
  double noise_std = 0.1;
  std::uint64_t data_seed = 12345;

  void validate() const;
};

/// One solve inside a bench sweep.
struct BenchCell {
  Size size;
  std::uint64_t seed = 0;
  Variant variant = Variant::TwoStage;
  SolveStatus status = SolveStatus::Error;
  double seconds = 0;
  double kkt_error = 0;
  double objective = 0;
  std::string message;
};

/// avrg(min,max) over the finite entries of `v`.
struct Summary {
  double avg = 0, min = 0, max = 0;
  int count = 0;
};
Summary summarize(const std::vector<double>& v);

/// "3.31(2.45,4.75)" style triplet. With `shared_exponent` all three values
/// are printed against the exponent of the average: "4.61662(4.61662,4.61662)e+2".
std::string format_triplet(const Summary& s, int digits, bool shared_exponent);

/// "2000x50x3" or "2000,50,3".
Size parse_size(const std::string& text);
/// Comma-separated list of seeds and inclusive ranges, e.g. "1-10,42".
std::vector<std::uint64_t> parse_seeds(const std::string& text);

std::vector<BenchCell> run_bench(const BenchSpec& spec, const SolveConfig& base, std::ostream* progress = nullptr);

/// Table rows in the (size, algorithm, cpu, E, f) layout, one per size and
/// variant in spec order.
void write_bench_csv(std::ostream& out, const BenchSpec& spec, const std::vector<BenchCell>& cells);
void write_bench_text(std::ostream& out, const BenchSpec& spec, const std::vector<BenchCell>& cells);
void write_cells_csv(std::ostream& out, const std::vector<BenchCell>& cells);

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tsnmf::cli
