#pragma once

#include <functional>

#include "hjopt/gm_policy.hpp"
#include "hjopt/model.hpp"

namespace hjopt {
// Brute-force reference implementations, deliberately independent of the
// closed-form main path. Used by tests and the `verify` command.
namespace oracles {

struct QuadratureNonConvergent : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -(1/beta) log int N(a | u_k, sigma_k^2 I) exp(-beta((1/2) c1 |a|^2 J_C + a.m)) da
// by per-dimension adaptive quadrature (the isotropic integrand factorizes).
double partition_quadrature(const GaussianMixturePolicy& policy, int k, const ValueGradients& vg,
                            const Vec& x, const ModelSpec& spec);

// The same integral through the multivariate Gaussian identity with
// diagonal tilt C = beta c1 J_C I and shift D = beta m.
double partition_closed_form(const GaussianMixturePolicy& policy, int k, const ValueGradients& vg,
                             const Vec& x, const ModelSpec& spec);

// log of the Euler transition density N(x_next | x + drift dt, sigma sigma^T dt).
double transition_density(const ModelSpec& spec, const Vec& x, const Vec& x_next,
                          const Vec& mean_action, double dt);

// General-form likelihood-ratio exponent for two arbitrary drift vectors.
double delta_S_general(const ModelSpec& spec, const Vec& x, const Vec& x_next,
                       const Vec& drift_new, const Vec& drift_behavioral, double dt);

struct FdReport {
  double max_rel_error = 0.0;
  int worst_coordinate = -1;
};

FdReport finite_difference_check(const std::function<double(const Vec&)>& f,
                                 const std::function<Vec(const Vec&)>& analytic_gradient,
                                 const Vec& point, double step);

}  // namespace oracles
}  // namespace hjopt
