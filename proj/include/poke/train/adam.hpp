// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "poke/common.hpp"

namespace poke::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  long long step = 0;

  void init(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    step = 0;
  }
};

// Writes the additive parameter update (already negated) into `update`.
// Splitting the update from its application lets pose parameters re-absorb
// the step on the SE(3) manifold instead of adding coordinates.
inline void adam_update(AdamState& st, const std::vector<double>& grad, double lr,
                        const AdamOptions& opt, std::vector<double>& update) {
  require(st.m.size() == grad.size(), ErrorClass::config, "adam_update: state size mismatch");
  ++st.step;
  double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(st.step));
  double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(st.step));
  update.resize(grad.size());
  for (size_t i = 0; i < grad.size(); ++i) {
    st.m[i] = opt.beta1 * st.m[i] + (1.0 - opt.beta1) * grad[i];
    st.v[i] = opt.beta2 * st.v[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
    double mhat = st.m[i] / c1;
    double vhat = st.v[i] / c2;
    update[i] = -lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

inline void adam_step(std::vector<double>& params, const std::vector<double>& grad,
                      AdamState& st, double lr, const AdamOptions& opt,
                      std::vector<double>& scratch) {
  adam_update(st, grad, lr, opt, scratch);
  for (size_t i = 0; i < params.size(); ++i) params[i] += scratch[i];
}

// Exponential decay from lr0 to decay_to * lr0 across `total` iterations.
inline double decayed_lr(double lr0, double decay_to, long long iter, long long total) {
  if (total <= 1) return lr0;
  double frac = static_cast<double>(iter) / static_cast<double>(total - 1);
  return lr0 * std::pow(decay_to, std::clamp(frac, 0.0, 1.0));
}

}  // namespace poke::train
