#pragma once

#include "stepalign/types.hpp"

#include <cmath>

namespace stepalign {

struct AdamWConfig {
  double lr = 5e-4;
  double weight_decay = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamWState {
  Vector<Scalar> m;
  Vector<Scalar> v;
  long step = 0;

  explicit AdamWState(Index n = 0) : m(Vector<Scalar>::Zero(n)), v(Vector<Scalar>::Zero(n)) {}
};

/// One AdamW update with decoupled weight decay: p <- p - lr*wd*mask*p, then the bias-corrected Adam step.
/// `decay` holds 1 where weight decay applies and 0 elsewhere.
template <typename Scalar>
void adamw_step(Vector<Scalar>& params, const Vector<Scalar>& grads, AdamWState<Scalar>& state,
                const AdamWConfig& cfg, const Vector<Scalar>& decay) {
  if (grads.size() != params.size() || state.m.size() != params.size() || decay.size() != params.size())
    fail("adamw_step: size mismatch");
  ++state.step;
  const Scalar lr = static_cast<Scalar>(cfg.lr);
  const Scalar b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
  params.array() -= lr * static_cast<Scalar>(cfg.weight_decay) * decay.array() * params.array();
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseAbs2();
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + static_cast<Scalar>(cfg.eps));
}

}  // namespace stepalign
