#include "csireid/autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "csireid/rng.hpp"

namespace csireid::ad {

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps,
                           std::size_t max_entries, std::uint64_t seed) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");
  x.set_requires_grad(true);
  x.clear_grad();
  const Tensor y = f(x);
  if (y.size() != 1) throw std::invalid_argument("grad_check: function is not scalar-valued");
  backward(y);
  std::vector<double> analytic(x.size(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());
  x.clear_grad();

  std::vector<std::size_t> entries(x.size());
  std::iota(entries.begin(), entries.end(), 0);
  if (max_entries > 0 && max_entries < entries.size()) {
    Rng rng(seed);
    rng.shuffle(entries.begin(), entries.end());
    entries.resize(max_entries);
    std::sort(entries.begin(), entries.end());
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  auto values = x.values();
  for (std::size_t i : entries) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f(x).item();
    values[i] = saved - eps;
    const double down = f(x).item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    if (err > report.max_rel_error || report.entries_checked == 0) {
      report.max_rel_error = std::max(report.max_rel_error, err);
      report.worst_index = i;
      report.analytic = analytic[i];
      report.numeric = numeric;
    }
    ++report.entries_checked;
  }
  return report;
}

}  // namespace csireid::ad
