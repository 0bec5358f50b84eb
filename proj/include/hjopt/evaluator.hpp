#pragma once

#include <vector>

#include "hjopt/simulator.hpp"

namespace hjopt {

struct ReturnDistribution {
  std::vector<double> samples;  // realized C_T per trajectory
  double mean = 0.0;
  double variance = 0.0;
  double std_error = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;

  static ReturnDistribution from_samples(std::vector<double> samples);
};

ReturnDistribution estimate_return_distribution(const ModelSpec& spec,
                                                const GaussianMixturePolicy& policy,
                                                const ExtendedState& start, int n_mc,
                                                std::uint64_t seed,
                                                SimulationMode mode = SimulationMode::EffectiveDrift);

ReturnDistribution estimate_return_distribution(const ModelSpec& spec,
                                                const GaussianMixturePolicy& policy0,
                                                const ValueNetwork& net,
                                                const ExtendedState& start, int n_mc,
                                                std::uint64_t seed,
                                                SimulationMode mode = SimulationMode::EffectiveDrift);

struct RegularizedCost {
  double expected_utility = 0.0;  // E U(Z_T)
  double utility_se = 0.0;
  double kl_term = 0.0;  // (1/beta) E int e^{-rs} KL ds
  double kl_se = 0.0;
  double total = 0.0;  // J^pi
  double total_se = 0.0;
};

// Behavioral policy: KL term is identically zero.
RegularizedCost estimate_regularized_cost(const ModelSpec& spec,
                                          const GaussianMixturePolicy& policy0,
                                          const ExtendedState& start, int n_mc,
                                          std::uint64_t seed);

// Extracted policy: simulate under the posterior, estimating per-state
// KL(pi || pi0) from n_kl inner samples.
RegularizedCost estimate_regularized_cost(const ModelSpec& spec,
                                          const GaussianMixturePolicy& policy0,
                                          const ValueNetwork& net, const ExtendedState& start,
                                          int n_mc, std::uint64_t seed, int n_kl = 16);

struct PolicySliceRow {
  double sweep_value = 0.0;
  int component = 0;
  Vec mean;
  double weight = 0.0;
  double cov_scalar = 0.0;
  bool collapsed = false;
};

std::vector<PolicySliceRow> policy_slice_export(const ValueNetwork& net,
                                                const GaussianMixturePolicy& policy0,
                                                const ModelSpec& spec, int sweep_dim,
                                                const std::vector<double>& grid,
                                                const ExtendedState& anchor);

}  // namespace hjopt
