#ifndef PICARD_KERNELS_HPP
#define PICARD_KERNELS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "picard/chain.hpp"
#include "picard/rng.hpp"
#include "picard/target.hpp"

namespace picard {

enum class KernelKind { RWM, MwG, ULA };

/// Direction set for MwG. HaarPerSweep draws a fresh basis every d steps;
/// HaarPerChain draws one basis for the whole run.
enum class BasisMode { Standard, HaarPerSweep, HaarPerChain };

inline std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::RWM: return "rwm";
    case KernelKind::MwG: return "mwg";
    case KernelKind::ULA: return "ula";
  }
  return "?";
}

inline std::string to_string(BasisMode b) {
  switch (b) {
    case BasisMode::Standard: return "standard";
    case BasisMode::HaarPerSweep: return "haar";
    case BasisMode::HaarPerChain: return "haar-chain";
  }
  return "?";
}

struct KernelSpec {
  KernelKind kind = KernelKind::RWM;
  /// Realized proposal standard deviation per coordinate (for MwG with the
  /// signed-chi law, the multiplier of the chi variable).
  double scale = 1.0;
  std::size_t d = 1;
  BasisMode basis = BasisMode::Standard;
  /// Overrides the default innovation law for MwG.
  std::optional<InnovationLaw> law;

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("KernelSpec: scale must be positive");
    if (d == 0) throw std::invalid_argument("KernelSpec: d must be positive");
  }

  [[nodiscard]] InnovationLaw innovation_law() const {
    if (kind != KernelKind::MwG) return InnovationLaw::GaussianVector;
    if (law) return *law;
    return basis == BasisMode::Standard ? InnovationLaw::GaussianScalar : InnovationLaw::SignedChi;
  }

  [[nodiscard]] bool is_metropolis() const { return kind != KernelKind::ULA; }
};

/// B(x, U, Z) in log space. A proposal with log-density -inf or NaN is never
/// accepted, even at u = 0.
inline bool metropolis_accept(double lp_current, double lp_proposal, double u) {
  if (std::isnan(lp_proposal) || lp_proposal == kNegInf) return false;
  const double log_u = u > 0.0 ? std::log(u) : kNegInf;
  return lp_proposal - lp_current >= log_u;
}

namespace detail {

template <LogDensity T>
StepResult metropolis_step(const T& target, std::span<const double> x, std::vector<double> increment, double u,
                           double lp_x) {
  if (std::isnan(lp_x)) lp_x = target.log_density(x);
  State proposal(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) proposal[k] = x[k] + increment[k];
  StepResult r;
  r.log_density_current = lp_x;
  r.log_density_proposal = target.log_density(proposal);
  r.accepted = metropolis_accept(lp_x, r.log_density_proposal, u);
  if (r.accepted) {
    r.increment = std::move(increment);
  } else {
    r.increment.assign(x.size(), 0.0);
  }
  return r;
}

inline constexpr double kUnknown = std::numeric_limits<double>::quiet_NaN();

}  // namespace detail

/// Random walk Metropolis: increment z if accepted. `lp_x` is the cached
/// log-density of x (NaN to evaluate it here).
template <LogDensity T>
StepResult rwm_increment(const T& target, std::span<const double> x, const Innovation& w,
                         double lp_x = detail::kUnknown) {
  if (w.z.size() != x.size()) throw std::invalid_argument("rwm_increment: innovation dimension mismatch");
  return detail::metropolis_step(target, x, w.z, w.u, lp_x);
}

/// Metropolis-within-Gibbs along o_i, i = step_index mod d. A null basis
/// means the standard basis.
template <LogDensity T>
StepResult mwg_increment(const T& target, std::span<const double> x, std::uint64_t step_index, const Innovation& w,
                         const Basis* basis, double lp_x = detail::kUnknown) {
  if (w.z.size() != 1) throw std::invalid_argument("mwg_increment: expects a scalar innovation");
  const std::size_t d = x.size();
  const std::size_t i = static_cast<std::size_t>(step_index % d);
  std::vector<double> inc(d, 0.0);
  if (basis == nullptr) {
    inc[i] = w.z[0];
  } else {
    const auto o = basis->row(i);
    for (std::size_t k = 0; k < d; ++k) inc[k] = o[k] * w.z[0];
  }
  return detail::metropolis_step(target, x, std::move(inc), w.u, lp_x);
}

/// Unadjusted Langevin: (xi^2 / 2) grad log pi(x) + xi N(0, I). The innovation
/// already carries the factor xi.
template <LogDensity T>
StepResult ula_increment(const T& target, std::span<const double> x, const Innovation& w, double xi) {
  if constexpr (requires(std::span<double> out) {
                  { target.has_gradient() } -> std::convertible_to<bool>;
                  target.grad_log_density(x, out);
                }) {
    if (!target.has_gradient()) throw std::logic_error("ula_increment: target has no gradient");
    if (w.z.size() != x.size()) throw std::invalid_argument("ula_increment: innovation dimension mismatch");
    StepResult r;
    r.increment.resize(x.size());
    target.grad_log_density(x, r.increment);
    const double half = 0.5 * xi * xi;
    for (std::size_t k = 0; k < x.size(); ++k) r.increment[k] = half * r.increment[k] + w.z[k];
    r.accepted = true;
    r.log_density_current = detail::kUnknown;
    r.log_density_proposal = detail::kUnknown;
    return r;
  } else {
    throw std::logic_error("ula_increment: target has no gradient");
  }
}

/// A kernel bound to its random streams. Innovations and MwG directions are
/// pure functions of the step index. Haar bases are computed ahead of time by
/// prepare() so that step() is read-only and can run concurrently.
class Kernel {
 public:
  Kernel(KernelSpec spec, StreamKey key) : spec_(spec), key_(key) {
    spec_.validate();
    if (spec_.kind == KernelKind::MwG && spec_.basis == BasisMode::HaarPerChain)
      bases_.emplace(0, std::make_shared<const Basis>(haar_basis(basis_key(), 0, spec_.d)));
  }

  [[nodiscard]] const KernelSpec& spec() const { return spec_; }
  [[nodiscard]] const StreamKey& key() const { return key_; }
  [[nodiscard]] InnovationLaw law() const { return spec_.innovation_law(); }

  [[nodiscard]] Innovation innovation(std::uint64_t step) const {
    return innovation_at(key_.with_stream(streams::innovation), law(), spec_.d, spec_.scale, step);
  }

  /// Makes the directions for steps [first, last] available.
  void prepare(std::uint64_t first, std::uint64_t last) {
    if (spec_.kind != KernelKind::MwG || spec_.basis != BasisMode::HaarPerSweep) return;
    const std::uint64_t lo = first / spec_.d;
    const std::uint64_t hi = last / spec_.d;
    bases_.erase(bases_.begin(), bases_.lower_bound(lo));
    for (std::uint64_t s = lo; s <= hi; ++s)
      if (!bases_.contains(s)) bases_.emplace(s, std::make_shared<const Basis>(haar_basis(basis_key(), s, spec_.d)));
  }

  /// Basis in force at `step`, or null for the standard basis.
  [[nodiscard]] const Basis* basis_for(std::uint64_t step) const {
    if (spec_.kind != KernelKind::MwG || spec_.basis == BasisMode::Standard) return nullptr;
    const std::uint64_t sweep = spec_.basis == BasisMode::HaarPerChain ? 0 : step / spec_.d;
    const auto it = bases_.find(sweep);
    if (it == bases_.end()) throw std::logic_error("Kernel: basis not prepared for step " + std::to_string(step));
    return it->second.get();
  }

  /// The proposed move for innovation w, accepted or not.
  [[nodiscard]] std::vector<double> proposal_increment(const Innovation& w) const {
    switch (spec_.kind) {
      case KernelKind::RWM: return w.z;
      case KernelKind::MwG: {
        std::vector<double> inc(spec_.d, 0.0);
        const std::size_t i = static_cast<std::size_t>(w.step_index % spec_.d);
        if (const Basis* b = basis_for(w.step_index)) {
          const auto o = b->row(i);
          for (std::size_t k = 0; k < spec_.d; ++k) inc[k] = o[k] * w.z[0];
        } else {
          inc[i] = w.z[0];
        }
        return inc;
      }
      case KernelKind::ULA: break;
    }
    throw std::logic_error("proposal_increment: not a Metropolis kernel");
  }

  /// f(x, W) for the innovation's step.
  template <LogDensity T>
  [[nodiscard]] StepResult step(const T& target, std::span<const double> x, const Innovation& w,
                                double lp_x = detail::kUnknown) const {
    switch (spec_.kind) {
      case KernelKind::RWM: return rwm_increment(target, x, w, lp_x);
      case KernelKind::MwG: return mwg_increment(target, x, w.step_index, w, basis_for(w.step_index), lp_x);
      case KernelKind::ULA: return ula_increment(target, x, w, spec_.scale);
    }
    throw std::logic_error("Kernel::step: unknown kind");
  }

 private:
  [[nodiscard]] StreamKey basis_key() const { return key_.with_stream(streams::basis); }

  KernelSpec spec_;
  StreamKey key_;
  std::map<std::uint64_t, std::shared_ptr<const Basis>> bases_;
};

/// Target acceptance rate for the tuner.
inline double target_acceptance(KernelKind k) {
  switch (k) {
    case KernelKind::RWM: return 0.234;
    case KernelKind::MwG: return 0.40;
    case KernelKind::ULA: break;
  }
  throw std::invalid_argument("target_acceptance: ULA is not tuned");
}

class TuningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TuningResult {
  KernelSpec spec;
  double acceptance = 0.0;  // over the final probe run
  int attempts = 0;
};

/// Robbins-Monro on log(scale), step 1/(t + 10), followed by a probe run of
/// `warmup` steps at the frozen scale. Up to `max_attempts` rounds, each
/// restarting the gain sequence from the current scale, until the probe lands
/// within 0.07 of the target; a probe within 0.15 is accepted as a last
/// resort, anything worse throws.
template <LogDensity T>
TuningResult tune_step_size(KernelSpec spec, const T& target, State x0, const StreamKey& key, std::uint64_t warmup,
                            int max_attempts = 5) {
  if (warmup < 100) throw std::invalid_argument("tune_step_size: warmup must be at least 100");
  spec.validate();
  const double goal = target_acceptance(spec.kind);
  const StreamKey tkey = key.with_stream(streams::tuning);
  Kernel directions(spec, key.fork(0x74756E65ULL));  // bases only; innovations come from tkey
  double lp = target.log_density(x0);
  if (lp == kNegInf) throw std::invalid_argument("tune_step_size: initial state has zero density");
  double log_scale = std::log(spec.scale);
  std::uint64_t draw = 0;  // innovation index on the tuning stream
  TuningResult best{spec, -1.0, 0};

  auto advance = [&](double scale) {
    directions.prepare(draw, draw);
    Innovation w = innovation_at(tkey, spec.innovation_law(), spec.d, scale, draw);
    ++draw;
    StepResult s = directions.step(target, x0, w, lp);
    if (s.accepted) {
      apply_step(x0, s);
      lp = s.log_density_proposal;
    }
    return s.accepted;
  };

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    for (std::uint64_t t = 0; t < warmup; ++t) {
      const bool acc = advance(std::exp(log_scale));
      log_scale += ((acc ? 1.0 : 0.0) - goal) / (static_cast<double>(t) + 10.0);
    }
    const double frozen = std::exp(log_scale);
    std::uint64_t accepted = 0;
    for (std::uint64_t k = 0; k < warmup; ++k) accepted += advance(frozen) ? 1 : 0;
    const double rate = static_cast<double>(accepted) / static_cast<double>(warmup);
    if (best.acceptance < 0.0 || std::abs(rate - goal) < std::abs(best.acceptance - goal)) {
      best.spec.scale = frozen;
      best.acceptance = rate;
    }
    best.attempts = attempt;
    if (std::abs(rate - goal) <= 0.07) {
      best.spec.scale = frozen;
      best.acceptance = rate;
      return best;
    }
  }
  if (std::abs(best.acceptance - goal) <= 0.15) return best;
  throw TuningError("tune_step_size: acceptance " + std::to_string(best.acceptance) + " stays away from target " +
                    std::to_string(goal));
}

}  // namespace picard

#endif  // PICARD_KERNELS_HPP
