#include "hjopt/model.hpp"

#include <cmath>

namespace hjopt {

void ModelSpec::validate() const {
  if (state_dim <= 0 || action_dim <= 0) throw std::invalid_argument("state_dim and action_dim must be positive");
  if (mu0_const.size() != state_dim) throw std::invalid_argument("mu0_const must have length state_dim");
  if (mu0_lin.rows() != state_dim || mu0_lin.cols() != state_dim) throw std::invalid_argument("mu0_lin must be N x N");
  if (mu1_const.rows() != state_dim || mu1_const.cols() != action_dim) throw std::invalid_argument("mu1_const must be N x M");
  if (mu1_lin.rows() != state_dim || mu1_lin.cols() != action_dim) throw std::invalid_argument("mu1_lin must be N x M");
  if (sigma.size() != state_dim) throw std::invalid_argument("sigma must have length state_dim");
  if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("sigma entries must be strictly positive");
  if (c0 < 0.0 || c1 < 0.0) throw std::invalid_argument("cost coefficients must be nonnegative");
  if (discount_rate < 0.0) throw std::invalid_argument("discount_rate must be nonnegative");
  if (inverse_temperature <= 0.0) throw std::invalid_argument("inverse_temperature must be positive");
  if (horizon <= 0.0) throw std::invalid_argument("horizon must be positive");
  if (n_steps < 1) throw std::invalid_argument("n_steps must be at least 1");
}

Vec drift(const ModelSpec& spec, const Vec& x, const Vec& a) {
  if (x.size() != spec.state_dim) throw DimensionMismatch("drift: x has wrong dimension");
  if (a.size() != spec.action_dim) throw DimensionMismatch("drift: a has wrong dimension");
  return spec.mu0_at(x) + spec.mu1_at(x) * a;
}

double running_cost(const ModelSpec& spec, const Vec& x, const Vec& a) {
  if (x.size() != spec.state_dim) throw DimensionMismatch("running_cost: x has wrong dimension");
  if (a.size() != spec.action_dim) throw DimensionMismatch("running_cost: a has wrong dimension");
  return spec.c0_at(x) + 0.5 * spec.c1_at(x) * a.squaredNorm();
}

double terminal_utility(const ModelSpec& spec, double z) {
  switch (spec.terminal_utility_kind) {
    case TerminalUtility::Quadratic: return z * z;
    case TerminalUtility::AbsoluteValue: return std::abs(z);
  }
  return z * z;
}

}  // namespace hjopt
