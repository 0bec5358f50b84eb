#include "hjopt/simulator.hpp"

#include <cmath>
#include <exception>

#include "hjopt/io.hpp"

namespace hjopt {

StateSampler uniform_box_sampler(int state_dim, double lo, double hi) {
  return [state_dim, lo, hi](Rng& rng) {
    Vec x(state_dim);
    for (int i = 0; i < state_dim; ++i) x[i] = rng.next_uniform(lo, hi);
    return x;
  };
}

Vec effective_drift(const ModelSpec& spec, const Vec& policy_mean_action, const Vec& x) {
  return drift(spec, x, policy_mean_action);
}

Vec step_euler(const Vec& x, const Vec& drift_value, const ModelSpec& spec, double dt,
               const Vec& gaussian_noise) {
  return x + drift_value * dt + std::sqrt(dt) * spec.sigma.cwiseProduct(gaussian_noise);
}

double accumulate_cost(double C, double running_cost_value, const ModelSpec& spec, double dt) {
  return C + (running_cost_value + spec.discount_rate * C) * dt;
}

namespace {

template <typename StepPolicy>
Dataset simulate_generic(const ModelSpec& spec, int n_traj, std::uint64_t seed,
                         const StateSampler& x0_sampler, bool parallel,
                         const StepPolicy& step_policy, const std::string& fingerprint) {
  spec.validate();
  Dataset data;
  data.seed = seed;
  data.spec_fingerprint = fingerprint;
  data.trajectories.resize(n_traj);
  const int n_steps = spec.n_steps;
  const double dt = spec.dt();
  std::exception_ptr failure = nullptr;

#pragma omp parallel for schedule(static) if (parallel)
  for (int n = 0; n < n_traj; ++n) {
    try {
      Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(n));
      Trajectory& traj = data.trajectories[n];
      traj.times.resize(n_steps + 1);
      traj.states.resize(n_steps + 1, spec.state_dim);
      traj.costs.resize(n_steps + 1);
      Vec x = x0_sampler(rng);
      double C = 0.0;
      Vec noise(spec.state_dim);
      for (int i = 0; i <= n_steps; ++i) {
        traj.times[i] = i * dt;
        traj.states.row(i) = x.transpose();
        traj.costs[i] = C;
        if (i == n_steps) break;
        auto [mu, cost] = step_policy(x, C, i * dt, rng);
        for (int d = 0; d < spec.state_dim; ++d) noise[d] = rng.next_normal();
        double C_next = accumulate_cost(C, cost, spec, dt);
        x = step_euler(x, mu, spec, dt, noise);
        C = C_next;
      }
    } catch (const CurvatureCollapse& e) {
#pragma omp critical
      if (!failure)
        failure = std::make_exception_ptr(
            CurvatureCollapse(std::string(e.what()) + " (trajectory " + std::to_string(n) + ")"));
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return data;
}

}  // namespace

Dataset simulate_dataset(const ModelSpec& spec, const GaussianMixturePolicy& policy, int n_traj,
                         std::uint64_t seed, const StateSampler& x0_sampler, bool parallel) {
  policy.validate();
  auto step = [&](const Vec& x, double, double, Rng&) {
    Vec abar = mean_action(policy, x);
    double cost = spec.c0_at(x) + 0.5 * spec.c1_at(x) * expected_squared_norm(policy, x);
    return std::make_pair(effective_drift(spec, abar, x), cost);
  };
  return simulate_generic(spec, n_traj, seed, x0_sampler, parallel, step,
                          dataset_fingerprint(spec, policy));
}

Dataset simulate_under_value(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
                             const ValueNetwork& net, int n_traj, std::uint64_t seed,
                             const StateSampler& x0_sampler, SimulationMode mode, bool parallel) {
  policy0.validate();
  auto step = [&](const Vec& x, double C, double t, Rng& rng) {
    ValueGradients vg = net.gradients(spec, x, C, t);
    PosteriorPolicy post = posterior_policy(policy0, vg, x, spec, C, t);
    if (mode == SimulationMode::EffectiveDrift) {
      Vec abar = post.mean_action();
      double cost = spec.c0_at(x) + 0.5 * spec.c1_at(x) * post.expected_squared_norm();
      return std::make_pair(effective_drift(spec, abar, x), cost);
    }
    Vec a = post.sample(rng);
    return std::make_pair(drift(spec, x, a), running_cost(spec, x, a));
  };
  return simulate_generic(spec, n_traj, seed, x0_sampler, parallel, step,
                          dataset_fingerprint(spec, policy0));
}

}  // namespace hjopt
