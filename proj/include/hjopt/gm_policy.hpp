#pragma once

#include <stdexcept>
#include <vector>

#include "hjopt/model.hpp"
#include "hjopt/rng.hpp"

namespace hjopt {

// Raised when 1 + beta sigma_k^2 c1(x) dJ/dC falls below the guard floor and
// the posterior Gaussian would be improper. Policy extraction fails loudly;
// the training loss clamps instead (see hj_loss).
struct CurvatureCollapse : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateCost : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kCurvatureFloor = 1e-6;

// K-component mixture over actions. Component means are state-affine,
// u_k(x) = A_k x + b_k; covariances are isotropic sigma_k^2 I.
struct GaussianMixturePolicy {
  std::vector<double> weights;  // simplex, length K
  std::vector<Mat> mean_lin;    // A_k, M x N (zero for constant means)
  std::vector<Vec> mean_const;  // b_k, M
  std::vector<double> stds;     // sigma_k > 0

  int components() const { return static_cast<int>(weights.size()); }
  int action_dim() const { return static_cast<int>(mean_const.empty() ? 0 : mean_const[0].size()); }
  Vec component_mean(int k, const Vec& x) const { return mean_lin[k] * x + mean_const[k]; }
  void validate() const;
};

// Value and input gradients of J at one extended-state point. The projected
// gradient m = mu1(x)^T grad_x is the combination every policy formula uses.
struct ValueGradients {
  double J = 0.0;
  Vec grad_x;     // N
  double grad_C = 0.0;
  Vec projected;  // m = mu1(x)^T grad_x, length M

  static ValueGradients zero(int state_dim, int action_dim) {
    ValueGradients vg;
    vg.grad_x = Vec::Zero(state_dim);
    vg.projected = Vec::Zero(action_dim);
    return vg;
  }
};

struct PosteriorPolicy {
  std::vector<double> weights;      // omega_k[J]
  std::vector<Vec> means;           // u_k[J]
  std::vector<double> cov_scalars;  // Omega_k[J] = cov_scalars[k] * I
  ExtendedState at;                 // evaluation point

  Vec mean_action() const;
  Vec sample(Rng& rng) const;
  double expected_squared_norm() const;
};

Vec mean_action(const GaussianMixturePolicy& policy, const Vec& x);
Vec sample_action(const GaussianMixturePolicy& policy, const Vec& x, Rng& rng);
double log_density(const GaussianMixturePolicy& policy, const Vec& x, const Vec& a);
double expected_squared_norm(const GaussianMixturePolicy& policy, const Vec& x);

double component_hamiltonian(const GaussianMixturePolicy& policy, int k,
                             const ValueGradients& vg, const Vec& x, const ModelSpec& spec);

PosteriorPolicy posterior_policy(const GaussianMixturePolicy& policy, const ValueGradients& vg,
                                 const Vec& x, const ModelSpec& spec,
                                 double C = 0.0, double t = 0.0);

Vec expected_action_optimal(const GaussianMixturePolicy& policy, const ValueGradients& vg,
                            const Vec& x, const ModelSpec& spec);

// <a>[J+-] = <a>[J] +- <a>_0, returned as {plus, minus}.
std::pair<Vec, Vec> expected_action_sum_diff(const GaussianMixturePolicy& policy,
                                             const ValueGradients& vg, const Vec& x,
                                             const ModelSpec& spec);

Vec zero_temperature_action(const ValueGradients& vg, const Vec& x, const ModelSpec& spec);

}  // namespace hjopt
