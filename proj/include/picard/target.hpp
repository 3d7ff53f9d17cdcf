#ifndef PICARD_TARGET_HPP
#define PICARD_TARGET_HPP

#include <concepts>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace picard {

using State = std::vector<double>;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Per-coordinate mean and standard deviation of a distribution.
struct Moments {
  std::vector<double> mean;
  std::vector<double> sd;
};

/// Anything the samplers can target: a dimension and a log-density that may
/// return -inf outside the support. Evaluation must be read-only.
template <class T>
concept LogDensity = requires(const T& t, std::span<const double> x) {
  { t.dim() } -> std::convertible_to<std::size_t>;
  { t.log_density(x) } -> std::convertible_to<double>;
};

class TargetImpl {
 public:
  virtual ~TargetImpl() = default;
  [[nodiscard]] virtual std::size_t dim() const = 0;
  [[nodiscard]] virtual double log_density(std::span<const double> x) const = 0;
  [[nodiscard]] virtual bool has_gradient() const { return false; }
  /// Gradient of log pi.
  virtual void grad_log_density(std::span<const double> /*x*/, std::span<double> /*out*/) const {
    throw std::logic_error("target has no gradient");
  }
  [[nodiscard]] virtual std::optional<Moments> moments() const { return std::nullopt; }
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Type-erased, cheaply copyable handle to an immutable target.
class TargetModel {
 public:
  TargetModel() = default;
  explicit TargetModel(std::shared_ptr<const TargetImpl> impl) : impl_(std::move(impl)) {}

  template <std::derived_from<TargetImpl> Impl>
  static TargetModel make(Impl impl) {
    return TargetModel(std::make_shared<const Impl>(std::move(impl)));
  }

  [[nodiscard]] std::size_t dim() const { return impl_->dim(); }
  [[nodiscard]] double log_density(std::span<const double> x) const { return impl_->log_density(x); }
  [[nodiscard]] bool has_gradient() const { return impl_->has_gradient(); }
  void grad_log_density(std::span<const double> x, std::span<double> out) const { impl_->grad_log_density(x, out); }
  [[nodiscard]] std::vector<double> grad_log_density(std::span<const double> x) const {
    std::vector<double> g(dim());
    impl_->grad_log_density(x, g);
    return g;
  }
  [[nodiscard]] std::optional<Moments> moments() const { return impl_->moments(); }
  [[nodiscard]] std::string name() const { return impl_->name(); }
  [[nodiscard]] const TargetImpl& impl() const { return *impl_; }

 private:
  std::shared_ptr<const TargetImpl> impl_;
};

}  // namespace picard

#endif  // PICARD_TARGET_HPP
