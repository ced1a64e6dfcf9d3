#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emcom/autodiff.hpp"

namespace emcom {

struct OptimizerState {
  double learning_rate = 0.01;
  std::uint64_t step_count = 0;
};

/// Plain stochastic gradient descent: p <- p - lr * g.
class Sgd {
 public:
  explicit Sgd(double learning_rate) {
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("sgd: learning rate must be positive");
    }
    state_.learning_rate = learning_rate;
  }

  const OptimizerState& state() const { return state_; }

  void step(std::span<ad::Parameter* const> params) {
    for (ad::Parameter* p : params) {
      if (p->grad.shape() != p->value.shape()) {
        throw std::invalid_argument("sgd: gradient " +
                                    shape_string(p->grad.shape()) +
                                    " does not match parameter '" + p->name +
                                    "' " + shape_string(p->value.shape()));
      }
      auto v = p->value.values();
      auto g = p->grad.values();
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] -= state_.learning_rate * g[i];
      }
    }
    ++state_.step_count;
  }

 private:
  OptimizerState state_;
};

/// Adam with bias-corrected first and second moment estimates.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
    if (!(learning_rate > 0.0)) {
      throw std::invalid_argument("adam: learning rate must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam: betas must lie in [0, 1)");
    }
    state_.learning_rate = learning_rate;
  }

  const OptimizerState& state() const { return state_; }

  /// The parameter list must be the same, in the same order, on every call.
  void step(std::span<ad::Parameter* const> params) {
    if (first_.empty()) {
      for (const ad::Parameter* p : params) {
        first_.emplace_back(p->value.size(), 0.0);
        second_.emplace_back(p->value.size(), 0.0);
      }
    }
    if (first_.size() != params.size()) {
      throw std::invalid_argument("adam: parameter list changed between steps");
    }
    ++state_.step_count;
    const double t = static_cast<double>(state_.step_count);
    const double c1 = 1.0 - std::pow(beta1_, t);
    const double c2 = 1.0 - std::pow(beta2_, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      ad::Parameter* p = params[k];
      if (p->grad.shape() != p->value.shape() || first_[k].size() != p->value.size()) {
        throw std::invalid_argument("adam: gradient shape mismatch for '" + p->name + "'");
      }
      auto v = p->value.values();
      auto g = p->grad.values();
      std::vector<double>& m1 = first_[k];
      std::vector<double>& m2 = second_[k];
      for (std::size_t i = 0; i < v.size(); ++i) {
        m1[i] = beta1_ * m1[i] + (1.0 - beta1_) * g[i];
        m2[i] = beta2_ * m2[i] + (1.0 - beta2_) * g[i] * g[i];
        v[i] -= state_.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + epsilon_);
      }
    }
  }

 private:
  OptimizerState state_;
  double beta1_, beta2_, epsilon_;
  std::vector<std::vector<double>> first_, second_;
};

enum class OptimizerKind { adam, sgd };

inline std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::adam ? "adam" : "sgd";
}

inline std::optional<OptimizerKind> parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  return std::nullopt;
}

/// Either optimizer behind one step() call.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate)
      : impl_(kind == OptimizerKind::adam ? Impl(Adam(learning_rate))
                                          : Impl(Sgd(learning_rate))) {}

  void step(std::span<ad::Parameter* const> params) {
    std::visit([&](auto& o) { o.step(params); }, impl_);
  }
  const OptimizerState& state() const {
    return std::visit([](const auto& o) -> const OptimizerState& { return o.state(); }, impl_);
  }

 private:
  using Impl = std::variant<Adam, Sgd>;
  Impl impl_;
};

inline void zero_grad(std::span<ad::Parameter* const> params) {
  for (ad::Parameter* p : params) p->zero_grad();
}

}  // namespace emcom
