#include "hjopt/oracles.hpp"

#include <cmath>
#include <limits>

namespace hjopt {
namespace oracles {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fb, double fm, double eps, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, fm, flm, eps * 0.5, depth - 1) +
         adaptive_simpson(f, m, b, fm, fb, frm, eps * 0.5, depth - 1);
}

double integrate(const std::function<double(double)>& f, double lo, double hi, double eps) {
  double fa = f(lo), fb = f(hi), fm = f(0.5 * (lo + hi));
  return adaptive_simpson(f, lo, hi, fa, fb, fm, eps, 48);
}

// One action dimension of the tilted-Gaussian integral, integrated over a
// window of `half_width` effective standard deviations.
double tilted_1d(double u, double var, double beta, double tilt, double shift,
                 double half_width) {
  // integrand: N(a | u, var) * exp(-beta ((1/2) tilt a^2 + shift a))
  double precision = 1.0 / var + beta * tilt;
  double spread = precision > 0.0 ? std::sqrt(1.0 / precision) : std::sqrt(var);
  double center = precision > 0.0 ? (u / var - beta * shift) / precision : u;
  double lo = std::min(center - half_width * spread, u - half_width * std::sqrt(var));
  double hi = std::max(center + half_width * spread, u + half_width * std::sqrt(var));
  // factor out the integrand's peak value to keep the quadrature well scaled
  auto log_f = [&](double a) {
    return -0.5 * (a - u) * (a - u) / var - 0.5 * std::log(kTwoPi * var) -
           beta * (0.5 * tilt * a * a + shift * a);
  };
  double log_peak = std::max(log_f(center), log_f(u));
  auto f = [&](double a) { return std::exp(log_f(a) - log_peak); };
  double integral = integrate(f, lo, hi, 1e-13);
  return std::log(integral) + log_peak;
}

}  // namespace

double partition_quadrature(const GaussianMixturePolicy& policy, int k, const ValueGradients& vg,
                            const Vec& x, const ModelSpec& spec) {
  if (spec.action_dim > 3)
    throw std::invalid_argument("partition_quadrature: limited to action_dim <= 3");
  const double beta = spec.inverse_temperature;
  const double tilt = spec.c1_at(x) * vg.grad_C;
  const Vec u = policy.component_mean(k, x);
  const double var = policy.stds[k] * policy.stds[k];

  double log_integral = 0.0, log_integral_wide = 0.0;
  for (int j = 0; j < spec.action_dim; ++j) {
    log_integral += tilted_1d(u[j], var, beta, tilt, vg.projected[j], 12.0);
    log_integral_wide += tilted_1d(u[j], var, beta, tilt, vg.projected[j], 14.0);
  }
  if (std::abs(log_integral - log_integral_wide) > 1e-9 * (1.0 + std::abs(log_integral)))
    throw QuadratureNonConvergent("partition_quadrature: tail truncation check failed");
  return -log_integral / beta;
}

double partition_closed_form(const GaussianMixturePolicy& policy, int k, const ValueGradients& vg,
                             const Vec& x, const ModelSpec& spec) {
  const int M = spec.action_dim;
  const double beta = spec.inverse_temperature;
  const Vec ubar = policy.component_mean(k, x);
  const double var = policy.stds[k] * policy.stds[k];
  Mat Sigma = var * Mat::Identity(M, M);
  Mat C = beta * spec.c1_at(x) * vg.grad_C * Mat::Identity(M, M);
  Vec D = beta * vg.projected;

  Mat inv_sum = (Sigma.inverse() + C).inverse();
  Vec cd = C * ubar + D;
  double exponent = 0.5 * cd.dot(inv_sum * cd) - 0.5 * ubar.dot(C * ubar) - ubar.dot(D);
  double log_det_term = 0.5 * std::log(Sigma.determinant()) +
                        0.5 * std::log((Sigma.inverse() + C).determinant());
  return -(exponent - log_det_term) / beta;
}

double transition_density(const ModelSpec& spec, const Vec& x, const Vec& x_next,
                          const Vec& mean_action, double dt) {
  Vec mu = drift(spec, x, mean_action);
  Vec mean = x + mu * dt;
  double log_p = 0.0;
  for (int i = 0; i < spec.state_dim; ++i) {
    double var = spec.sigma[i] * spec.sigma[i] * dt;
    double diff = x_next[i] - mean[i];
    log_p += -0.5 * std::log(kTwoPi * var) - 0.5 * diff * diff / var;
  }
  return log_p;
}

double delta_S_general(const ModelSpec& spec, const Vec& x, const Vec& x_next,
                       const Vec& drift_new, const Vec& drift_behavioral, double dt) {
  // Delta S = (dt/2) sum_i (mu1_i^2 - mu0_i^2 - 2 xdot_i (mu1_i - mu0_i)) / sigma_i^2
  double out = 0.0;
  for (int i = 0; i < spec.state_dim; ++i) {
    double xdot = (x_next[i] - x[i]) / dt;
    double s2 = spec.sigma[i] * spec.sigma[i];
    out += 0.5 * dt / s2 *
           (drift_new[i] * drift_new[i] - drift_behavioral[i] * drift_behavioral[i] -
            2.0 * xdot * (drift_new[i] - drift_behavioral[i]));
  }
  return out;
}

FdReport finite_difference_check(const std::function<double(const Vec&)>& f,
                                 const std::function<Vec(const Vec&)>& analytic_gradient,
                                 const Vec& point, double step) {
  Vec grad = analytic_gradient(point);
  FdReport report;
  for (int i = 0; i < point.size(); ++i) {
    Vec p = point;
    p[i] = point[i] + step;
    double up = f(p);
    p[i] = point[i] - step;
    double down = f(p);
    double fd = (up - down) / (2.0 * step);
    double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
    double rel = std::abs(fd - grad[i]) / scale;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_coordinate = i;
    }
  }
  return report;
}

}  // namespace oracles
}  // namespace hjopt
