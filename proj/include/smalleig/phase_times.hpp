#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace smalleig {

/// Wall-clock seconds per named category, in first-use order.
class PhaseTimes {
 public:
  void add(const std::string& name, double seconds) {
    for (auto& [k, v] : entries_)
      if (k == name) {
        v += seconds;
        return;
      }
    entries_.emplace_back(name, seconds);
  }
  double get(const std::string& name) const {
    for (const auto& [k, v] : entries_)
      if (k == name) return v;
    return 0.0;
  }
  const std::vector<std::pair<std::string, double>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, double>> entries_;
};

/// Adds the elapsed time to `times[name]` when it goes out of scope.
class ScopedTimer {
 public:
  ScopedTimer(PhaseTimes& times, std::string name)
      : times_(times), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~ScopedTimer() {
    const auto d = std::chrono::steady_clock::now() - start_;
    times_.add(name_, std::chrono::duration<double>(d).count());
  }
  ScopedTimer(const ScopedTimer&) = delete;
  ScopedTimer& operator=(const ScopedTimer&) = delete;

 private:
  PhaseTimes& times_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace smalleig
