#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "tsnmf/data_io.hpp"
#include "tsnmf/report.hpp"

namespace tsnmf::cli {

namespace fs = std::filesystem;

namespace {

// Failures in the input data (exit 2) as opposed to usage or solver errors.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SolverFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t parse_u64(const std::string& s) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) throw std::invalid_argument("not an unsigned integer: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

struct CommonSolveOptions {
  double tol = 1e-6;
  double stage1_tol = 1e-3;
  double time_cap = std::numeric_limits<double>::infinity();
  std::string variant = "two_stage";
  std::string time_kind = "wall";
  int max_sweeps = 200;
  int max_iterations = 500;

  void add_to(CLI::App& app, bool with_variant) {
    app.add_option("--tol", tol, "KKT tolerance on E(.;0)")->check(CLI::PositiveNumber);
    app.add_option("--stage1-tol", stage1_tol, "relative step tolerance of stage 1")->check(CLI::NonNegativeNumber);
    if (with_variant)
      app.add_option("--variant,--stage", variant, "two_stage | anls_only | ipm_only")
          ->check(CLI::IsMember({"two_stage", "anls_only", "ipm_only"}));
    app.add_option("--time-kind", time_kind, "wall | cpu")->check(CLI::IsMember({"wall", "cpu"}));
    app.add_option("--max-sweeps", max_sweeps, "stage-1 sweep cap")->check(CLI::PositiveNumber);
    app.add_option("--max-iterations", max_iterations, "stage-2 iteration cap")->check(CLI::NonNegativeNumber);
  }

  SolveConfig config() const {
    SolveConfig cfg;
    cfg.ipm.eps_tol = tol;
    cfg.ipm.max_iterations = max_iterations;
    cfg.stage1.eps_stol = stage1_tol;
    cfg.stage1.max_sweeps = max_sweeps;
    cfg.time_cap_s = time_cap;
    cfg.time_kind = parse_time_kind(time_kind);
    cfg.variant = parse_variant(variant);
    return cfg;
  }
};

Matrix<double> read_checked(const std::string& path, TextFormat fmt, bool header) {
  try {
    return load_matrix(path, fmt, header);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

int cmd_factorize(const std::string& input, const std::string& synthetic, double noise, std::uint64_t data_seed,
                  Index rank, std::uint64_t seed, const std::string& format, const std::string& out_dir,
                  const std::string& axis, bool header, const std::string& init_x, const std::string& init_y,
                  const CommonSolveOptions& opts, std::ostream& out) {
  const TextFormat fmt = parse_text_format(format);
  Matrix<double> m;
  if (!input.empty()) {
    m = read_checked(input, fmt, header);
  } else {
    const Size sz = parse_size(synthetic);
    m = generate_synthetic(sz.n, sz.m, sz.k, noise, {data_seed}).M;
  }
  if (m.size() == 0) throw DataError("input matrix is empty");
  if (!m.allFinite()) throw DataError("input matrix has non-finite entries");
  if (!axis.empty()) m = shift_nonnegative(m, parse_axis(axis));
  if ((m.array() < 0).any()) throw DataError("input matrix has negative entries; pass --axis to shift them");

  FactorState<double> init;
  if (!init_x.empty() || !init_y.empty()) {
    if (init_x.empty() || init_y.empty()) throw std::invalid_argument("--init-x and --init-y go together");
    init.X = read_checked(init_x, fmt, false);
    init.Y = read_checked(init_y, fmt, false);
    if (init.X.rows() != m.rows() || init.Y.cols() != m.cols() || init.X.cols() != init.Y.rows())
      throw DataError("initial factors do not match the input shape");
    if (init.X.cols() != rank) throw DataError("initial factors have rank " + std::to_string(init.X.cols()));
  } else {
    init = init_factors(m.rows(), m.cols(), rank, {seed});
  }

  const SolveConfig cfg = opts.config();
  const auto rep = run_two_stage(m, init, cfg);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  {
    auto j = report_to_json(rep);
    j["time_kind"] = opts.time_kind;
    auto f = open_out(dir / "report.json");
    f << j.dump(2) << '\n';
  }
  {
    auto f = open_out(dir / "trace.csv");
    write_trace_csv(f, rep);
  }
  save_matrix((dir / "X.csv").string(), rep.factors.X, TextFormat::Csv);
  save_matrix((dir / "Y.csv").string(), rep.factors.Y, TextFormat::Csv);

  char line[256];
  std::snprintf(line, sizeof line, "status=%s f=%.10g E=%.3e seconds=%.3f", to_string(rep.status),
                rep.final_objective, rep.final_kkt_error, rep.stage1_time + rep.stage2_time);
  out << line << '\n';
  if (rep.status == SolveStatus::Error) throw SolverFailure(rep.message);
  return kOk;
}

}  // namespace

void BenchSpec::validate() const {
  if (sizes.empty()) throw std::invalid_argument("bench: no sizes");
  if (seeds.empty()) throw std::invalid_argument("bench: no seeds");
  if (!(time_cap_s > 0)) throw std::invalid_argument("bench: time cap must be positive");
  if (variants.empty()) throw std::invalid_argument("bench: no variants");
}

Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.min = std::numeric_limits<double>::infinity();
  s.max = -s.min;
  double sum = 0;
  for (double x : v) {
    if (!std::isfinite(x)) continue;
    sum += x;
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
    ++s.count;
  }
  if (s.count == 0) {
    s.avg = s.min = s.max = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  s.avg = sum / s.count;
  // Rounding in the sum can put the mean a hair outside [min, max].
  s.avg = std::clamp(s.avg, s.min, s.max);
  return s;
}

std::string format_triplet(const Summary& s, int digits, bool shared_exponent) {
  if (s.count == 0) return "nan";
  char buf[160];
  if (!shared_exponent) {
    std::snprintf(buf, sizeof buf, "%.*g(%.*g,%.*g)", digits, s.avg, digits, s.min, digits, s.max);
    return buf;
  }
  const int e = s.avg == 0 ? 0 : static_cast<int>(std::floor(std::log10(std::abs(s.avg))));
  const double scale = std::pow(10.0, -e);
  std::snprintf(buf, sizeof buf, "%.*f(%.*f,%.*f)e%+d", digits - 1, s.avg * scale, digits - 1, s.min * scale,
                digits - 1, s.max * scale, e);
  return buf;
}

Size parse_size(const std::string& text) {
  std::string t = text;
  std::replace(t.begin(), t.end(), 'x', ',');
  const auto parts = split(t, ',');
  if (parts.size() != 3) throw std::invalid_argument("size must look like NxMxK: '" + text + "'");
  Size s{static_cast<Index>(parse_u64(parts[0])), static_cast<Index>(parse_u64(parts[1])),
         static_cast<Index>(parse_u64(parts[2]))};
  if (s.n < 1 || s.m < 1 || s.k < 1) throw std::invalid_argument("size entries must be >= 1: '" + text + "'");
  return s;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& part : split(text, ',')) {
    const auto dash = part.find('-');
    if (dash == std::string::npos) {
      out.push_back(parse_u64(part));
      continue;
    }
    const auto lo = parse_u64(part.substr(0, dash)), hi = parse_u64(part.substr(dash + 1));
    if (hi < lo) throw std::invalid_argument("empty seed range: '" + part + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("no seeds in '" + text + "'");
  return out;
}

std::vector<BenchCell> run_bench(const BenchSpec& spec, const SolveConfig& base, std::ostream* progress) {
  spec.validate();
  std::vector<BenchCell> cells;
  for (const auto& size : spec.sizes) {
    const auto inst = generate_synthetic(size.n, size.m, size.k, spec.noise_std, {spec.data_seed});
    for (const auto seed : spec.seeds) {
      const auto init = init_factors(size.n, size.m, size.k, {seed});
      for (const auto variant : spec.variants) {
        SolveConfig cfg = base;
        cfg.variant = variant;
        cfg.time_cap_s = spec.time_cap_s;
        BenchCell cell;
        cell.size = size;
        cell.seed = seed;
        cell.variant = variant;
        Stopwatch sw(cfg.time_kind);
        const auto rep = run_two_stage(inst.M, init, cfg);
        cell.seconds = sw.seconds();
        cell.status = rep.status;
        cell.kkt_error = rep.final_kkt_error;
        cell.objective = rep.final_objective;
        cell.message = rep.message;
        if (progress) {
          char line[256];
          std::snprintf(line, sizeof line, "%lldx%lldx%lld seed=%llu %s: %s %.3fs E=%.3e f=%.10g",
                        static_cast<long long>(size.n), static_cast<long long>(size.m),
                        static_cast<long long>(size.k), static_cast<unsigned long long>(seed), to_string(variant),
                        to_string(rep.status), cell.seconds, cell.kkt_error, cell.objective);
          *progress << line << std::endl;
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  return cells;
}

namespace {

struct TableRow {
  std::string size, algorithm, cpu, kkt, f;
  int runs = 0, converged = 0;
};

std::vector<TableRow> table_rows(const BenchSpec& spec, const std::vector<BenchCell>& cells) {
  std::vector<TableRow> rows;
  for (const auto& size : spec.sizes) {
    for (const auto variant : spec.variants) {
      std::vector<double> t, e, f;
      TableRow row;
      for (const auto& c : cells) {
        if (c.size.n != size.n || c.size.m != size.m || c.size.k != size.k || c.variant != variant) continue;
        ++row.runs;
        if (c.status == SolveStatus::Converged) ++row.converged;
        if (c.status == SolveStatus::Error) continue;
        t.push_back(c.seconds);
        e.push_back(c.kkt_error);
        f.push_back(c.objective);
      }
      row.size = "(" + std::to_string(size.n) + "," + std::to_string(size.m) + "," + std::to_string(size.k) + ")";
      row.algorithm = to_string(variant);
      row.cpu = format_triplet(summarize(t), 3, false);
      row.kkt = format_triplet(summarize(e), 3, true);
      row.f = format_triplet(summarize(f), 6, true);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace

void write_bench_csv(std::ostream& out, const BenchSpec& spec, const std::vector<BenchCell>& cells) {
  out << "size,algorithm,runs,converged,cpu_s,E,f\n";
  for (const auto& r : table_rows(spec, cells))
    out << '"' << r.size << "\"," << r.algorithm << ',' << r.runs << ',' << r.converged << ",\"" << r.cpu << "\",\""
        << r.kkt << "\",\"" << r.f << "\"\n";
}

void write_bench_text(std::ostream& out, const BenchSpec& spec, const std::vector<BenchCell>& cells) {
  const auto rows = table_rows(spec, cells);
  std::vector<std::vector<std::string>> grid{{"size(n,m,k)", "algorithm", "runs", "cpu(s)", "E", "f"}};
  for (const auto& r : rows)
    grid.push_back({r.size, r.algorithm, std::to_string(r.converged) + "/" + std::to_string(r.runs), r.cpu, r.kkt, r.f});
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& g : grid)
    for (std::size_t c = 0; c < g.size(); ++c) width[c] = std::max(width[c], g[c].size());
  for (const auto& g : grid) {
    for (std::size_t c = 0; c < g.size(); ++c) {
      out << std::left << std::setw(static_cast<int>(width[c])) << g[c];
      out << (c + 1 < g.size() ? "  " : "\n");
    }
  }
}

void write_cells_csv(std::ostream& out, const std::vector<BenchCell>& cells) {
  out << "n,m,k,seed,algorithm,status,cpu_s,kkt_error,objective\n";
  char buf[256];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%lld,%lld,%lld,%llu,%s,%s,%.6f,%.17g,%.17g\n", static_cast<long long>(c.size.n),
                  static_cast<long long>(c.size.m), static_cast<long long>(c.size.k),
                  static_cast<unsigned long long>(c.seed), to_string(c.variant), to_string(c.status), c.seconds,
                  c.kkt_error, c.objective);
    out << buf;
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage nonnegative matrix factorization", "tsnmf"};
  app.require_subcommand(1);

  auto* fac = app.add_subcommand("factorize", "factor a matrix M ~ X Y with X, Y >= 0");
  std::string input, synthetic, format = "csv", out_dir = "tsnmf_out", axis, init_x, init_y;
  double noise = 0.1;
  std::uint64_t data_seed = 12345, seed = 1;
  Index rank = 0;
  bool header = false;
  CommonSolveOptions fopts;
  auto* in_opt = fac->add_option("--input,-i", input, "matrix file, one row per line");
  auto* syn_opt = fac->add_option("--synthetic", synthetic, "generate the input instead: NxMxK");
  in_opt->excludes(syn_opt);
  fac->add_option("--noise", noise, "noise level for --synthetic")->check(CLI::NonNegativeNumber);
  fac->add_option("--data-seed", data_seed, "seed for --synthetic");
  fac->add_option("--rank,-k", rank, "factorization rank")->required()->check(CLI::PositiveNumber);
  fac->add_option("--seed", seed, "seed of the random initial factors");
  fac->add_option("--format", format, "csv | whitespace")->check(CLI::IsMember({"csv", "whitespace", "ws"}));
  fac->add_option("--out,-o", out_dir, "output directory");
  fac->add_option("--axis", axis, "shift each column or row up to a zero minimum")
      ->check(CLI::IsMember({"column", "row"}));
  fac->add_flag("--header", header, "skip the first line of the input");
  fac->add_option("--init-x", init_x, "initial X (n x k) instead of a random start");
  fac->add_option("--init-y", init_y, "initial Y (k x m) instead of a random start");
  fac->add_option("--time-cap", fopts.time_cap, "seconds for the whole solve")->check(CLI::PositiveNumber);
  fopts.add_to(*fac, true);

  auto* syn = app.add_subcommand("synth", "write a synthetic nonnegative matrix");
  Index sn = 0, sm = 0, sk = 0;
  double snoise = 0.1;
  std::uint64_t sseed = 12345;
  std::string sout, sformat = "csv";
  syn->add_option("--rows,-n", sn, "rows")->required()->check(CLI::PositiveNumber);
  syn->add_option("--cols,-m", sm, "columns")->required()->check(CLI::PositiveNumber);
  syn->add_option("--rank,-k", sk, "inner dimension of the generating factors")->required()->check(CLI::PositiveNumber);
  syn->add_option("--noise", snoise, "standard deviation of the additive noise")->check(CLI::NonNegativeNumber);
  syn->add_option("--seed", sseed, "generator seed");
  syn->add_option("--out,-o", sout, "output file")->required();
  syn->add_option("--format", sformat, "csv | whitespace")->check(CLI::IsMember({"csv", "whitespace", "ws"}));

  auto* bench = app.add_subcommand("bench", "multi-seed benchmark on synthetic data");
  std::string sizes = "2000x50x3", seeds = "1-10", variants = "two_stage,anls_only,ipm_only", bout = "tsnmf_bench";
  BenchSpec spec;
  CommonSolveOptions bopts;
  bench->add_option("--sizes", sizes, "comma-separated NxMxK list");
  bench->add_option("--seeds", seeds, "initial-point seeds, e.g. 1-10");
  bench->add_option("--variants", variants, "comma-separated subset of two_stage,anls_only,ipm_only");
  bench->add_option("--time-cap", spec.time_cap_s, "seconds per solve")->check(CLI::PositiveNumber);
  bench->add_option("--noise", spec.noise_std, "noise level of the synthetic data")->check(CLI::NonNegativeNumber);
  bench->add_option("--data-seed", spec.data_seed, "seed of the synthetic data");
  bench->add_option("--out,-o", bout, "output directory");
  bopts.add_to(*bench, false);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, out, msg);
    err << msg.str();
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (fac->parsed()) {
      if (input.empty() && synthetic.empty()) {
        err << "factorize: one of --input or --synthetic is required\n";
        return kUsage;
      }
      return cmd_factorize(input, synthetic, noise, data_seed, rank, seed, format, out_dir, axis, header, init_x,
                           init_y, fopts, out);
    }
    if (syn->parsed()) {
      const auto inst = generate_synthetic(sn, sm, sk, snoise, {sseed});
      save_matrix(sout, inst.M, parse_text_format(sformat));
      out << "wrote " << sn << "x" << sm << " matrix to " << sout << '\n';
      return kOk;
    }
    if (bench->parsed()) {
      for (const auto& s : split(sizes, ',')) spec.sizes.push_back(parse_size(s));
      spec.seeds = parse_seeds(seeds);
      spec.variants.clear();
      for (const auto& v : split(variants, ',')) spec.variants.push_back(parse_variant(v));
      const SolveConfig base = bopts.config();
      const auto cells = run_bench(spec, base, &err);
      const fs::path dir(bout);
      fs::create_directories(dir);
      {
        auto f = open_out(dir / "table.csv");
        write_bench_csv(f, spec, cells);
      }
      {
        auto f = open_out(dir / "table.txt");
        write_bench_text(f, spec, cells);
      }
      {
        auto f = open_out(dir / "cells.csv");
        write_cells_csv(f, cells);
      }
      write_bench_text(out, spec, cells);
      return kOk;
    }
  } catch (const SolverFailure& e) {
    err << "solver error: " << e.what() << '\n';
    return kSolverError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace tsnmf::cli
