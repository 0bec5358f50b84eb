#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjopt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class TerminalUtility { Quadratic, AbsoluteValue };

// Controlled-diffusion environment:
//   dx = (mu0(x) + mu1(x) a) dt + sigma dW
//   c(x,a) = c0 |x|^2 + (1/2) c1 |x|^2 |a|^2
// mu0(x) = mu0_const + mu0_lin x; mu1(x)_ij = mu1_const_ij + x_i mu1_lin_ij.
struct ModelSpec {
  int state_dim = 0;   // N
  int action_dim = 0;  // M

  Vec mu0_const;  // N
  Mat mu0_lin;    // N x N
  Mat mu1_const;  // N x M
  Mat mu1_lin;    // N x M

  Vec sigma;  // N, strictly positive diagonal volatility

  double c0 = 0.0;
  double c1 = 0.0;
  double discount_rate = 0.0;        // r
  double inverse_temperature = 1.0;  // beta
  double horizon = 1.0;              // T
  int n_steps = 1;

  TerminalUtility terminal_utility_kind = TerminalUtility::Quadratic;

  double dt() const { return horizon / n_steps; }

  void validate() const;

  Vec mu0_at(const Vec& x) const { return mu0_const + mu0_lin * x; }
  Mat mu1_at(const Vec& x) const { return mu1_const + x.asDiagonal() * mu1_lin; }
  double c0_at(const Vec& x) const { return c0 * x.squaredNorm(); }
  double c1_at(const Vec& x) const { return c1 * x.squaredNorm(); }
};

struct ExtendedState {
  Vec x;
  double C = 0.0;
  double t = 0.0;
};

struct Trajectory {
  std::vector<double> times;   // n_steps + 1, from 0 to T
  Mat states;                  // (n_steps + 1) x N
  std::vector<double> costs;   // n_steps + 1, costs[0] == 0
};

struct Dataset {
  std::string spec_fingerprint;
  std::uint64_t seed = 0;
  std::vector<Trajectory> trajectories;
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

Vec drift(const ModelSpec& spec, const Vec& x, const Vec& a);
double running_cost(const ModelSpec& spec, const Vec& x, const Vec& a);
double terminal_utility(const ModelSpec& spec, double z);

}  // namespace hjopt
