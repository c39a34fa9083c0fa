#pragma once

#include <cstdint>
#include <random>

namespace tsnmf {

/// Seed for the library's random streams. The generator is std::mt19937_64,
/// whose output sequence is fixed by the C++ standard; the conversions to
/// uniform and normal variates below are done here rather than through
/// <random> distributions, which differ between standard libraries.
struct RngSpec {
  std::uint64_t seed = 0;
  static constexpr const char* algorithm = "mt19937_64";
};

class Rng {
 public:
  explicit Rng(RngSpec spec) : engine_(spec.seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via the Box-Muller transform (both variates used).
  double normal();
  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace tsnmf
