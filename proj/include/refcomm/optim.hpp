#ifndef REFCOMM_OPTIM_HPP
#define REFCOMM_OPTIM_HPP

#include "refcomm/numerics.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace refcomm {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments for one ordered list of parameters. Shapes are fixed by the first step.
template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::vector<Vector<Scalar>> first_moment;
  std::vector<Vector<Scalar>> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

/// One bias-corrected Adam update of `params` along `grads` (parallel lists).
template <typename Scalar>
void adam_step(std::span<const ParamView<Scalar>> params, std::span<const ParamView<Scalar>> grads,
               AdamState<Scalar>& state) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.push_back(Vector<Scalar>::Zero(p.size));
      state.second_moment.push_back(Vector<Scalar>::Zero(p.size));
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                     " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size != grads[i].size || state.first_moment[i].size() != params[i].size) {
      throw ShapeError("adam_step: size mismatch for parameter '" + params[i].name + "'");
    }
    if (!grads[i].values().allFinite()) {
      throw NumericError("adam_step: non-finite gradient for parameter '" + params[i].name + "'");
    }
  }

  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const auto b1 = static_cast<Scalar>(c.beta1);
  const auto b2 = static_cast<Scalar>(c.beta2);
  const auto step_size = static_cast<Scalar>(c.lr / (1.0 - std::pow(c.beta1, t)));
  const auto v_scale = static_cast<Scalar>(1.0 / std::sqrt(1.0 - std::pow(c.beta2, t)));
  const auto eps = static_cast<Scalar>(c.eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].values();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    auto p = params[i].values();
    p.array() -= step_size * m.array() / ((v.array().sqrt() * v_scale) + eps);
  }
}

template <typename Scalar>
void adam_step(const std::vector<ParamView<Scalar>>& params, const std::vector<ParamView<Scalar>>& grads,
               AdamState<Scalar>& state) {
  adam_step(std::span<const ParamView<Scalar>>(params), std::span<const ParamView<Scalar>>(grads), state);
}

}  // namespace refcomm

#endif  // REFCOMM_OPTIM_HPP
