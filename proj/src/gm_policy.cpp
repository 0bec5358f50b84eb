#include "hjopt/gm_policy.hpp"

#include <cmath>
#include <limits>

namespace hjopt {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

void GaussianMixturePolicy::validate() const {
  const int K = components();
  if (K == 0) throw std::invalid_argument("policy must have at least one component");
  if (static_cast<int>(mean_lin.size()) != K || static_cast<int>(mean_const.size()) != K ||
      static_cast<int>(stds.size()) != K)
    throw std::invalid_argument("policy component arrays must have equal length");
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || w > 1.0) throw std::invalid_argument("weights must lie in [0,1]");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("weights must sum to 1");
  for (double s : stds)
    if (s <= 0.0) throw std::invalid_argument("component stds must be positive");
  const int M = action_dim();
  for (int k = 0; k < K; ++k) {
    if (mean_const[k].size() != M || mean_lin[k].rows() != M)
      throw std::invalid_argument("component mean shapes inconsistent");
  }
}

Vec mean_action(const GaussianMixturePolicy& policy, const Vec& x) {
  Vec out = Vec::Zero(policy.action_dim());
  for (int k = 0; k < policy.components(); ++k)
    out += policy.weights[k] * policy.component_mean(k, x);
  return out;
}

Vec sample_action(const GaussianMixturePolicy& policy, const Vec& x, Rng& rng) {
  double u = rng.next_uniform();
  int k = 0;
  double acc = 0.0;
  for (int j = 0; j < policy.components(); ++j) {
    acc += policy.weights[j];
    if (u < acc) { k = j; break; }
    k = j;
  }
  Vec a = policy.component_mean(k, x);
  for (int i = 0; i < a.size(); ++i) a[i] += policy.stds[k] * rng.next_normal();
  return a;
}

double log_density(const GaussianMixturePolicy& policy, const Vec& x, const Vec& a) {
  const int M = static_cast<int>(a.size());
  const int K = policy.components();
  std::vector<double> logs(K);
  double max_log = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    double var = policy.stds[k] * policy.stds[k];
    double sq = (a - policy.component_mean(k, x)).squaredNorm();
    logs[k] = std::log(policy.weights[k]) - 0.5 * M * std::log(kTwoPi * var) - 0.5 * sq / var;
    max_log = std::max(max_log, logs[k]);
  }
  double acc = 0.0;
  for (double l : logs) acc += std::exp(l - max_log);
  return max_log + std::log(acc);
}

double expected_squared_norm(const GaussianMixturePolicy& policy, const Vec& x) {
  const int M = policy.action_dim();
  double out = 0.0;
  for (int k = 0; k < policy.components(); ++k) {
    double var = policy.stds[k] * policy.stds[k];
    out += policy.weights[k] * (policy.component_mean(k, x).squaredNorm() + M * var);
  }
  return out;
}

// H_k[J] = (1/2)(u.u c1 J_C + 2 u.m - beta s^2 |m|^2) / (1 + beta s^2 c1 J_C)
//        + (M / 2 beta) log(1 + beta s^2 c1 J_C)
// The log term carries the action-space dimension M from the determinant of
// the tilted Gaussian; this keeps exp(-beta H_k) equal to the component
// partition integral for every M (see oracles::partition_quadrature).
double component_hamiltonian(const GaussianMixturePolicy& policy, int k,
                             const ValueGradients& vg, const Vec& x, const ModelSpec& spec) {
  const double beta = spec.inverse_temperature;
  const double c1x = spec.c1_at(x);
  const double var = policy.stds[k] * policy.stds[k];
  const double den = 1.0 + beta * var * c1x * vg.grad_C;
  if (den <= kCurvatureFloor)
    throw CurvatureCollapse("component_hamiltonian: 1 + beta sigma^2 c1 J_C below floor");
  const Vec u = policy.component_mean(k, x);
  const Vec& m = vg.projected;
  const int M = policy.action_dim();
  double quad = u.squaredNorm() * c1x * vg.grad_C + 2.0 * u.dot(m) - beta * var * m.squaredNorm();
  return 0.5 * quad / den + 0.5 * M / beta * std::log(den);
}

PosteriorPolicy posterior_policy(const GaussianMixturePolicy& policy, const ValueGradients& vg,
                                 const Vec& x, const ModelSpec& spec, double C, double t) {
  const double beta = spec.inverse_temperature;
  const double c1x = spec.c1_at(x);
  const int K = policy.components();

  PosteriorPolicy post;
  post.at = ExtendedState{x, C, t};
  post.weights.resize(K);
  post.means.resize(K);
  post.cov_scalars.resize(K);

  std::vector<double> neg_beta_h(K);
  double max_e = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < K; ++k) {
    neg_beta_h[k] = -beta * component_hamiltonian(policy, k, vg, x, spec);
    max_e = std::max(max_e, neg_beta_h[k]);
  }
  double norm = 0.0;
  for (int k = 0; k < K; ++k) {
    post.weights[k] = policy.weights[k] * std::exp(neg_beta_h[k] - max_e);
    norm += post.weights[k];
  }
  for (int k = 0; k < K; ++k) post.weights[k] /= norm;

  for (int k = 0; k < K; ++k) {
    const double var = policy.stds[k] * policy.stds[k];
    const double den = 1.0 + beta * var * c1x * vg.grad_C;
    post.means[k] = (policy.component_mean(k, x) - beta * var * vg.projected) / den;
    const double precision = 1.0 / var + beta * c1x * vg.grad_C;
    if (precision <= 0.0)
      throw CurvatureCollapse("posterior_policy: nonpositive posterior precision");
    post.cov_scalars[k] = 1.0 / precision;
  }
  return post;
}

Vec PosteriorPolicy::mean_action() const {
  Vec out = Vec::Zero(means[0].size());
  for (size_t k = 0; k < weights.size(); ++k) out += weights[k] * means[k];
  return out;
}

Vec PosteriorPolicy::sample(Rng& rng) const {
  double u = rng.next_uniform();
  size_t k = 0;
  double acc = 0.0;
  for (size_t j = 0; j < weights.size(); ++j) {
    acc += weights[j];
    if (u < acc) { k = j; break; }
    k = j;
  }
  Vec a = means[k];
  double sd = std::sqrt(cov_scalars[k]);
  for (int i = 0; i < a.size(); ++i) a[i] += sd * rng.next_normal();
  return a;
}

double PosteriorPolicy::expected_squared_norm() const {
  const int M = static_cast<int>(means[0].size());
  double out = 0.0;
  for (size_t k = 0; k < weights.size(); ++k)
    out += weights[k] * (means[k].squaredNorm() + M * cov_scalars[k]);
  return out;
}

Vec expected_action_optimal(const GaussianMixturePolicy& policy, const ValueGradients& vg,
                            const Vec& x, const ModelSpec& spec) {
  return posterior_policy(policy, vg, x, spec).mean_action();
}

std::pair<Vec, Vec> expected_action_sum_diff(const GaussianMixturePolicy& policy,
                                             const ValueGradients& vg, const Vec& x,
                                             const ModelSpec& spec) {
  Vec a_opt = expected_action_optimal(policy, vg, x, spec);
  Vec a0 = mean_action(policy, x);
  return {a_opt + a0, a_opt - a0};
}

Vec zero_temperature_action(const ValueGradients& vg, const Vec& x, const ModelSpec& spec) {
  const double c1x = spec.c1_at(x);
  if (c1x <= 0.0) throw DegenerateCost("zero_temperature_action: c1(x) = 0");
  if (std::abs(vg.grad_C) < kCurvatureFloor)
    throw DegenerateCost("zero_temperature_action: |dJ/dC| below floor");
  return -(vg.projected / (c1x * vg.grad_C));
}

}  // namespace hjopt
