#include "hjopt/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace hjopt {

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  double pos = q * (sorted.size() - 1);
  size_t lo = static_cast<size_t>(pos);
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - lo;
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

double mixture_log_density(const std::vector<double>& weights, const std::vector<Vec>& means,
                           const std::vector<double>& variances, const Vec& a) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  const int M = static_cast<int>(a.size());
  double max_log = -std::numeric_limits<double>::infinity();
  std::vector<double> logs(weights.size());
  for (size_t k = 0; k < weights.size(); ++k) {
    double sq = (a - means[k]).squaredNorm();
    logs[k] = std::log(weights[k]) - 0.5 * M * std::log(kTwoPi * variances[k]) -
              0.5 * sq / variances[k];
    max_log = std::max(max_log, logs[k]);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - max_log);
  return max_log + std::log(acc);
}

struct RolloutResult {
  double terminal_cost = 0.0;
  double discounted_kl = 0.0;  // sum_s e^{-r t_s} KL(pi||pi0)(x_s) dt
};

// Rolls a single path from `start` to the horizon. `use_net` switches
// between the behavioral policy and the posterior extracted from the net.
RolloutResult rollout(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
                      const ValueNetwork* net, const ExtendedState& start, Rng& rng,
                      SimulationMode mode, int n_kl) {
  const double dt = spec.dt();
  int start_index = static_cast<int>(std::lround(start.t / dt));
  Vec x = start.x;
  double C = start.C;
  RolloutResult out;
  Vec noise(spec.state_dim);
  for (int i = start_index; i < spec.n_steps; ++i) {
    double t = i * dt;
    Vec mu;
    double cost;
    if (net) {
      ValueGradients vg = net->gradients(spec, x, C, t);
      PosteriorPolicy post = posterior_policy(policy0, vg, x, spec, C, t);
      if (n_kl > 0) {
        double kl = 0.0;
        for (int j = 0; j < n_kl; ++j) {
          Vec a = post.sample(rng);
          kl += mixture_log_density(post.weights, post.means, post.cov_scalars, a) -
                log_density(policy0, x, a);
        }
        out.discounted_kl += std::exp(-spec.discount_rate * t) * (kl / n_kl) * dt;
      }
      if (mode == SimulationMode::EffectiveDrift) {
        mu = effective_drift(spec, post.mean_action(), x);
        cost = spec.c0_at(x) + 0.5 * spec.c1_at(x) * post.expected_squared_norm();
      } else {
        Vec a = post.sample(rng);
        mu = drift(spec, x, a);
        cost = running_cost(spec, x, a);
      }
    } else {
      if (mode == SimulationMode::EffectiveDrift) {
        mu = effective_drift(spec, mean_action(policy0, x), x);
        cost = spec.c0_at(x) + 0.5 * spec.c1_at(x) * expected_squared_norm(policy0, x);
      } else {
        Vec a = sample_action(policy0, x, rng);
        mu = drift(spec, x, a);
        cost = running_cost(spec, x, a);
      }
    }
    for (int d = 0; d < spec.state_dim; ++d) noise[d] = rng.next_normal();
    double C_next = accumulate_cost(C, cost, spec, dt);
    x = step_euler(x, mu, spec, dt, noise);
    C = C_next;
  }
  out.terminal_cost = C;
  return out;
}

std::vector<RolloutResult> run_rollouts(const ModelSpec& spec,
                                        const GaussianMixturePolicy& policy0,
                                        const ValueNetwork* net, const ExtendedState& start,
                                        int n_mc, std::uint64_t seed, SimulationMode mode,
                                        int n_kl) {
  spec.validate();
  policy0.validate();
  std::vector<RolloutResult> results(n_mc);
  std::exception_ptr failure = nullptr;
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_mc; ++n) {
    try {
      Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(n));
      results[n] = rollout(spec, policy0, net, start, rng, mode, n_kl);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace

ReturnDistribution ReturnDistribution::from_samples(std::vector<double> samples) {
  ReturnDistribution rd;
  rd.samples = std::move(samples);
  const size_t n = rd.samples.size();
  if (n == 0) return rd;
  double sum = 0.0;
  for (double s : rd.samples) sum += s;
  rd.mean = sum / n;
  double ss = 0.0;
  for (double s : rd.samples) ss += (s - rd.mean) * (s - rd.mean);
  rd.variance = n > 1 ? ss / (n - 1) : 0.0;
  rd.std_error = std::sqrt(rd.variance / n);
  std::vector<double> sorted = rd.samples;
  std::sort(sorted.begin(), sorted.end());
  rd.q05 = quantile(sorted, 0.05);
  rd.q25 = quantile(sorted, 0.25);
  rd.q50 = quantile(sorted, 0.50);
  rd.q75 = quantile(sorted, 0.75);
  rd.q95 = quantile(sorted, 0.95);
  return rd;
}

ReturnDistribution estimate_return_distribution(const ModelSpec& spec,
                                                const GaussianMixturePolicy& policy,
                                                const ExtendedState& start, int n_mc,
                                                std::uint64_t seed, SimulationMode mode) {
  auto results = run_rollouts(spec, policy, nullptr, start, n_mc, seed, mode, 0);
  std::vector<double> samples(results.size());
  for (size_t i = 0; i < results.size(); ++i) samples[i] = results[i].terminal_cost;
  return ReturnDistribution::from_samples(std::move(samples));
}

ReturnDistribution estimate_return_distribution(const ModelSpec& spec,
                                                const GaussianMixturePolicy& policy0,
                                                const ValueNetwork& net,
                                                const ExtendedState& start, int n_mc,
                                                std::uint64_t seed, SimulationMode mode) {
  auto results = run_rollouts(spec, policy0, &net, start, n_mc, seed, mode, 0);
  std::vector<double> samples(results.size());
  for (size_t i = 0; i < results.size(); ++i) samples[i] = results[i].terminal_cost;
  return ReturnDistribution::from_samples(std::move(samples));
}

namespace {

RegularizedCost summarize(const ModelSpec& spec, const std::vector<RolloutResult>& results) {
  const size_t n = results.size();
  RegularizedCost rc;
  if (n == 0) return rc;
  double u_sum = 0.0, kl_sum = 0.0;
  std::vector<double> u_vals(n), kl_vals(n);
  for (size_t i = 0; i < n; ++i) {
    u_vals[i] = terminal_utility(spec, results[i].terminal_cost);
    kl_vals[i] = results[i].discounted_kl / spec.inverse_temperature;
    u_sum += u_vals[i];
    kl_sum += kl_vals[i];
  }
  rc.expected_utility = u_sum / n;
  rc.kl_term = kl_sum / n;
  rc.total = rc.expected_utility + rc.kl_term;
  double u_ss = 0.0, kl_ss = 0.0, tot_ss = 0.0;
  for (size_t i = 0; i < n; ++i) {
    u_ss += std::pow(u_vals[i] - rc.expected_utility, 2);
    kl_ss += std::pow(kl_vals[i] - rc.kl_term, 2);
    tot_ss += std::pow(u_vals[i] + kl_vals[i] - rc.total, 2);
  }
  if (n > 1) {
    rc.utility_se = std::sqrt(u_ss / (n - 1) / n);
    rc.kl_se = std::sqrt(kl_ss / (n - 1) / n);
    rc.total_se = std::sqrt(tot_ss / (n - 1) / n);
  }
  return rc;
}

}  // namespace

RegularizedCost estimate_regularized_cost(const ModelSpec& spec,
                                          const GaussianMixturePolicy& policy0,
                                          const ExtendedState& start, int n_mc,
                                          std::uint64_t seed) {
  auto results =
      run_rollouts(spec, policy0, nullptr, start, n_mc, seed, SimulationMode::EffectiveDrift, 0);
  return summarize(spec, results);
}

RegularizedCost estimate_regularized_cost(const ModelSpec& spec,
                                          const GaussianMixturePolicy& policy0,
                                          const ValueNetwork& net, const ExtendedState& start,
                                          int n_mc, std::uint64_t seed, int n_kl) {
  auto results =
      run_rollouts(spec, policy0, &net, start, n_mc, seed, SimulationMode::EffectiveDrift, n_kl);
  return summarize(spec, results);
}

std::vector<PolicySliceRow> policy_slice_export(const ValueNetwork& net,
                                                const GaussianMixturePolicy& policy0,
                                                const ModelSpec& spec, int sweep_dim,
                                                const std::vector<double>& grid,
                                                const ExtendedState& anchor) {
  if (sweep_dim < 0 || sweep_dim >= spec.state_dim)
    throw std::out_of_range("policy_slice_export: sweep_dim out of range");
  std::vector<PolicySliceRow> rows;
  for (double v : grid) {
    Vec x = anchor.x;
    x[sweep_dim] = v;
    try {
      ValueGradients vg = net.gradients(spec, x, anchor.C, anchor.t);
      PosteriorPolicy post = posterior_policy(policy0, vg, x, spec, anchor.C, anchor.t);
      for (int k = 0; k < static_cast<int>(post.weights.size()); ++k) {
        PolicySliceRow row;
        row.sweep_value = v;
        row.component = k;
        row.mean = post.means[k];
        row.weight = post.weights[k];
        row.cov_scalar = post.cov_scalars[k];
        rows.push_back(std::move(row));
      }
    } catch (const CurvatureCollapse&) {
      // flagged, not dropped
      for (int k = 0; k < policy0.components(); ++k) {
        PolicySliceRow row;
        row.sweep_value = v;
        row.component = k;
        row.mean = Vec::Zero(spec.action_dim);
        row.collapsed = true;
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace hjopt
