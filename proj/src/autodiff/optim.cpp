#include "csireid/autodiff/optim.hpp"

#include <cmath>

#include "csireid/error.hpp"

namespace csireid::ad {

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (!(state.lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  for (const auto& p : params) {
    if (!p.has_grad()) throw NumericError("adam_step: parameter without gradient");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ConfigError("adam_step: parameter list changed between steps");
  }

  ++state.step_count;
  const auto t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].values();
    const auto grad = params[i].grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      values[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
    params[i].clear_grad();
  }
}

void StepDecaySchedule::validate() const {
  if (!(base_lr >= 0.0)) throw ConfigError("base learning rate must be non-negative");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("lr decay gamma must be in (0, 1]");
  if (step_epochs < 1) throw ConfigError("lr step_epochs must be >= 1");
}

double schedule_lr(const StepDecaySchedule& sched, std::uint64_t epoch) {
  sched.validate();
  return sched.base_lr * std::pow(sched.gamma, static_cast<double>(epoch / sched.step_epochs));
}

}  // namespace csireid::ad
