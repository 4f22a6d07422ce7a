#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "winoforms/gradcore/parameters.hpp"

namespace winoforms {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.001;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

template <std::floating_point T>
struct OptimizerState {
  AdamWConfig config;
  std::vector<Tensor<T>> first_moment;
  std::vector<Tensor<T>> second_moment;
  std::uint64_t step = 0;

  OptimizerState() = default;
  explicit OptimizerState(AdamWConfig cfg) : config(cfg) {}

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

// One AdamW update. Weight decay is decoupled: every parameter is first
// multiplied by (1 - lr * weight_decay), then moved by the bias-corrected
// adaptive step. Moment buffers are created lazily on the first call.
template <std::floating_point T>
void optimizer_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
                    OptimizerState<T>& state, double lr) {
  if (params.size() != grads.size()) {
    throw Error("optimizer_step: " + std::to_string(params.size()) + " parameters but " +
                std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->same_shape(*grads[i])) {
      throw Error("optimizer_step: gradient shape " + shape_string(grads[i]->shape()) +
                  " does not match parameter shape " + shape_string(params[i]->shape()));
    }
  }
  if (state.first_moment.empty()) {
    for (const Tensor<T>* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw Error("optimizer_step: state tracks a different parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!state.first_moment[i].same_shape(*params[i])) {
      throw Error("optimizer_step: moment buffer shape mismatch");
    }
  }

  const auto& cfg = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.beta1);
  const T b2 = static_cast<T>(cfg.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
  const T step_size = static_cast<T>(lr);
  const T decay = static_cast<T>(1.0 - lr * cfg.weight_decay);
  const T eps = static_cast<T>(cfg.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    auto g = grads[i]->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (T{1} - b1) * g[j];
      v[j] = b2 * v[j] + (T{1} - b2) * g[j] * g[j];
      const T m_hat = m[j] / correction1;
      const T v_hat = v[j] / correction2;
      p[j] *= decay;
      p[j] -= step_size * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <std::floating_point T>
void optimizer_step(std::span<Parameter<T>* const> params, OptimizerState<T>& state, double lr) {
  std::vector<Tensor<T>*> values;
  std::vector<const Tensor<T>*> grads;
  for (Parameter<T>* p : params) {
    values.push_back(&p->value);
    grads.push_back(&p->grad);
  }
  optimizer_step<T>(values, grads, state, lr);
}

}  // namespace winoforms
