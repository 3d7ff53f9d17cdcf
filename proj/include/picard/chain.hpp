#ifndef PICARD_CHAIN_HPP
#define PICARD_CHAIN_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

#include "picard/io.hpp"
#include "picard/target.hpp"

namespace picard {

/// f(x, W) for one step: the increment and whether the proposal was accepted.
/// The log-densities are carried so callers can cache them.
struct StepResult {
  std::vector<double> increment;
  bool accepted = false;
  double log_density_current = kNegInf;
  double log_density_proposal = kNegInf;
};

/// x <- x + increment. Rejected steps leave x untouched, so every path that
/// advances a chain through this function produces the same bits.
inline void apply_step(State& x, const StepResult& s) {
  if (!s.accepted) return;
  for (std::size_t k = 0; k < x.size(); ++k) x[k] += s.increment[k];
}

/// Receives each committed transition: step index i and the state X_{i+1}.
using CommitSink = std::function<void(std::uint64_t step, const State& next, bool accepted)>;

/// States X_0..X_N and the accept flag of each transition.
struct Trajectory {
  std::size_t d = 0;
  std::vector<State> states;
  std::vector<bool> accept_flags;

  Trajectory() = default;
  explicit Trajectory(State x0) : d(x0.size()) { states.push_back(std::move(x0)); }

  [[nodiscard]] std::size_t steps() const { return accept_flags.size(); }

  void append(const State& next, bool accepted) {
    states.push_back(next);
    accept_flags.push_back(accepted);
  }

  [[nodiscard]] CommitSink sink() {
    return [this](std::uint64_t, const State& next, bool accepted) { append(next, accepted); };
  }

  [[nodiscard]] double acceptance_rate() const {
    if (accept_flags.empty()) return 0.0;
    std::size_t a = 0;
    for (bool f : accept_flags) a += f ? 1 : 0;
    return static_cast<double>(a) / static_cast<double>(accept_flags.size());
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Bitwise equality of states and flags (== on doubles would equate 0.0 and
/// -0.0).
inline bool bit_identical(const Trajectory& a, const Trajectory& b) {
  if (a.d != b.d || a.states.size() != b.states.size() || a.accept_flags != b.accept_flags) return false;
  for (std::size_t i = 0; i < a.states.size(); ++i) {
    if (a.states[i].size() != b.states[i].size()) return false;
    if (std::memcmp(a.states[i].data(), b.states[i].data(), a.states[i].size() * sizeof(double)) != 0) return false;
  }
  return true;
}

/// Streaming per-coordinate mean and standard deviation (Welford) of the
/// states X_i with i > burn_in.
class RunningMoments {
 public:
  RunningMoments(std::size_t d, std::uint64_t burn_in) : burn_in_(burn_in), mean_(d, 0.0), m2_(d, 0.0) {}

  void observe(std::uint64_t state_index, std::span<const double> x) {
    if (state_index <= burn_in_) return;
    ++count_;
    const double n = static_cast<double>(count_);
    for (std::size_t k = 0; k < mean_.size(); ++k) {
      const double delta = x[k] - mean_[k];
      mean_[k] += delta / n;
      m2_[k] += delta * (x[k] - mean_[k]);
    }
  }

  [[nodiscard]] CommitSink sink() {
    return [this](std::uint64_t step, const State& next, bool) { observe(step + 1, next); };
  }

  [[nodiscard]] std::uint64_t count() const { return count_; }
  [[nodiscard]] const std::vector<double>& mean() const { return mean_; }
  [[nodiscard]] std::vector<double> sd() const {
    std::vector<double> s(mean_.size(), 0.0);
    if (count_ < 2) return s;
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = std::sqrt(m2_[k] / static_cast<double>(count_ - 1));
    return s;
  }
  [[nodiscard]] Moments moments() const { return {mean_, sd()}; }

 private:
  std::uint64_t burn_in_;
  std::uint64_t count_ = 0;
  std::vector<double> mean_;
  std::vector<double> m2_;
};

/// Fan-out to several sinks.
inline CommitSink combine_sinks(std::vector<CommitSink> sinks) {
  return [sinks = std::move(sinks)](std::uint64_t step, const State& next, bool accepted) {
    for (const auto& s : sinks)
      if (s) s(step, next, accepted);
  };
}

/// CSV with header `step,accepted,x_0,...,x_{d-1}`; `accepted` is the flag
/// of the transition that produced the row's state (0 on the initial row).
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj, std::size_t every = 1) {
  if (every == 0) throw std::invalid_argument("write_trajectory_csv: subsample stride must be positive");
  out << "step,accepted";
  for (std::size_t k = 0; k < traj.d; ++k) out << ",x_" << k;
  out << '\n';
  for (std::size_t i = 0; i < traj.states.size(); i += every) {
    out << i << ',' << (i > 0 && traj.accept_flags[i - 1] ? 1 : 0);
    for (double v : traj.states[i]) out << ',' << format_double(v);
    out << '\n';
  }
}

}  // namespace picard

#endif  // PICARD_CHAIN_HPP
