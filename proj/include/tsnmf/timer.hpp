#pragma once

#include <chrono>
#include <ctime>
#include <string>

namespace tsnmf {

enum class TimeKind { Wall, ProcessCpu };

inline TimeKind parse_time_kind(const std::string& name) {
  if (name == "wall") return TimeKind::Wall;
  if (name == "cpu") return TimeKind::ProcessCpu;
  throw std::invalid_argument("unknown time kind: " + name);
}

/// Seconds elapsed since construction, on the wall clock or the process CPU
/// clock.
class Stopwatch {
 public:
  explicit Stopwatch(TimeKind kind = TimeKind::Wall) : kind_(kind) { reset(); }

  void reset() {
    wall_start_ = std::chrono::steady_clock::now();
    cpu_start_ = std::clock();
  }

  double seconds() const {
    if (kind_ == TimeKind::ProcessCpu)
      return static_cast<double>(std::clock() - cpu_start_) / CLOCKS_PER_SEC;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start_).count();
  }

  TimeKind kind() const { return kind_; }

 private:
  TimeKind kind_;
  std::chrono::steady_clock::time_point wall_start_;
  std::clock_t cpu_start_{};
};

}  // namespace tsnmf
