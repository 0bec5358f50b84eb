#pragma once

#include <functional>

#include "hjopt/gm_policy.hpp"
#include "hjopt/model.hpp"
#include "hjopt/value_net.hpp"

namespace hjopt {

using StateSampler = std::function<Vec(Rng&)>;

// Each coordinate uniform on [lo, hi].
StateSampler uniform_box_sampler(int state_dim, double lo = 0.05, double hi = 0.15);

enum class SimulationMode { EffectiveDrift, SampledActions };

Vec effective_drift(const ModelSpec& spec, const Vec& policy_mean_action, const Vec& x);

Vec step_euler(const Vec& x, const Vec& drift_value, const ModelSpec& spec, double dt,
               const Vec& gaussian_noise);

double accumulate_cost(double C, double running_cost_value, const ModelSpec& spec, double dt);

// Behavioral dataset: policy-averaged drift and cost, one noise substream per
// trajectory. Trajectories are independent and may be generated in parallel;
// output order is always trajectory-index order.
Dataset simulate_dataset(const ModelSpec& spec, const GaussianMixturePolicy& policy, int n_traj,
                         std::uint64_t seed, const StateSampler& x0_sampler,
                         bool parallel = true);

// Same loop, but the per-step action statistics come from the posterior
// policy extracted from the value network at the current (x, C, t).
Dataset simulate_under_value(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
                             const ValueNetwork& net, int n_traj, std::uint64_t seed,
                             const StateSampler& x0_sampler, SimulationMode mode,
                             bool parallel = true);

std::string dataset_fingerprint(const ModelSpec& spec, const GaussianMixturePolicy& policy);

}  // namespace hjopt
