#pragma once

#include <cmath>
#include <vector>

#include "hjopt/gm_policy.hpp"
#include "hjopt/model.hpp"
#include "hjopt/rng.hpp"

namespace hjopt {
namespace testing {

inline ModelSpec make_spec(int state_dim, int action_dim) {
  ModelSpec spec;
  spec.state_dim = state_dim;
  spec.action_dim = action_dim;
  spec.mu0_const = Vec::Constant(state_dim, 0.1);
  spec.mu0_lin = 0.2 * Mat::Identity(state_dim, state_dim);
  spec.mu1_const = 0.1 * Mat::Identity(state_dim, action_dim);
  spec.mu1_lin = 0.2 * Mat::Identity(state_dim, action_dim);
  spec.sigma = Vec::Constant(state_dim, 0.1);
  spec.c0 = 1.0;
  spec.c1 = 5.0;
  spec.discount_rate = 0.03;
  spec.inverse_temperature = 1.0;
  spec.horizon = 1.0;
  spec.n_steps = 40;
  return spec;
}

inline GaussianMixturePolicy make_policy(int action_dim, int state_dim, int components,
                                         std::uint64_t seed) {
  GaussianMixturePolicy p;
  Rng rng(seed);
  double total = 0.0;
  for (int k = 0; k < components; ++k) {
    double w = rng.next_uniform(0.5, 1.5);
    p.weights.push_back(w);
    total += w;
    p.mean_const.push_back(
        Vec::NullaryExpr(action_dim, [&](int) { return rng.next_uniform(-0.6, 0.6); }));
    p.mean_lin.push_back(Mat::Zero(action_dim, state_dim));
    p.stds.push_back(std::sqrt(rng.next_uniform(0.1, 0.5)));
  }
  for (auto& w : p.weights) w /= total;
  return p;
}

inline Vec random_vec(int n, Rng& rng, double scale = 1.0) {
  return Vec::NullaryExpr(n, [&](int) { return rng.next_uniform(-scale, scale); });
}

inline ValueGradients random_gradients(const ModelSpec& spec, const Vec& x, Rng& rng,
                                       double scale = 0.5) {
  ValueGradients vg;
  vg.J = rng.next_uniform(-1.0, 1.0);
  vg.grad_x = random_vec(spec.state_dim, rng, scale);
  vg.grad_C = rng.next_uniform(0.0, scale);
  vg.projected = spec.mu1_at(x).transpose() * vg.grad_x;
  return vg;
}

}  // namespace testing
}  // namespace hjopt
