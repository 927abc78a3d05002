#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "csireid/autodiff/tensor.hpp"

namespace csireid::ad {

/// Adam optimizer state; moments are created lazily on the first step and
/// are tied to the parameter order passed to adam_step.
struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment{};
  std::vector<std::vector<double>> second_moment{};
};

/// One bias-corrected Adam update. Every parameter must carry a gradient
/// (NumericError otherwise); gradients are released afterwards.
void adam_step(std::span<Tensor> params, AdamState& state);

struct StepDecaySchedule {
  double base_lr = 1e-4;
  double gamma = 0.95;
  std::uint64_t step_epochs = 50;

  void validate() const;
};

/// base_lr * gamma^floor(epoch / step_epochs)
double schedule_lr(const StepDecaySchedule& sched, std::uint64_t epoch);

}  // namespace csireid::ad
