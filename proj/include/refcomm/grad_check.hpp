#ifndef REFCOMM_GRAD_CHECK_HPP
#define REFCOMM_GRAD_CHECK_HPP

#include "refcomm/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace refcomm {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  Index coordinates = 0;
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps coordinates whose true
/// gradient is zero from dividing roundoff by roundoff.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Central-difference check. `computation()` must return the scalar loss and
/// one analytic gradient vector per entry of `params`, evaluated at the
/// current parameter values; it is re-evaluated with each coordinate nudged
/// by ±h. Stochastic computations must hold their noise fixed.
template <typename Computation>
GradCheckResult grad_check(Computation&& computation, const std::vector<ParamView<double>>& params,
                           double h = 1e-3, double floor = 1e-6) {
  auto [loss0, analytic] = computation();
  (void)loss0;
  if (analytic.size() != params.size()) {
    throw ShapeError("grad_check: " + std::to_string(analytic.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (analytic[p].size() != params[p].size) {
      throw ShapeError("grad_check: gradient size mismatch for '" + params[p].name + "'");
    }
    for (Index i = 0; i < params[p].size; ++i) {
      double& x = params[p].data[i];
      const double saved = x;
      x = saved + h;
      const double plus = computation().first;
      x = saved - h;
      const double minus = computation().first;
      x = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = relative_error(analytic[p][i], numeric, floor);
      ++result.coordinates;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = err;
        result.worst_param = params[p].name;
        result.worst_index = i;
        result.analytic = analytic[p][i];
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace refcomm

#endif  // REFCOMM_GRAD_CHECK_HPP
