#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "csireid/autodiff/tensor.hpp"

namespace csireid::ad {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at worst_index
  double numeric = 0.0;   // at worst_index
  std::size_t entries_checked = 0;
};

/// Compares the reverse-mode gradient of a scalar function against central
/// differences. Error per entry is |analytic - numeric| / max(1, |analytic|).
/// max_entries > 0 checks a seeded random subset of that many entries.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                           double eps = 1e-4, std::size_t max_entries = 0,
                           std::uint64_t seed = 0);

}  // namespace csireid::ad
