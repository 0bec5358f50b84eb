#pragma once

#include <vector>

#include "hjopt/gm_policy.hpp"
#include "hjopt/model.hpp"
#include "hjopt/value_net.hpp"

namespace hjopt {

// One consecutive pair of grid points from a trajectory.
struct StepSample {
  Vec x_now;
  double C_now = 0.0;
  double t_now = 0.0;
  Vec x_next;
  double C_next = 0.0;
  double t_next = 0.0;
  bool is_terminal = false;
};

std::vector<StepSample> collect_steps(const ModelSpec& spec, const Dataset& dataset);

struct LossDiagnostics {
  double loss = 0.0;
  double hj_term = 0.0;       // mean (1/2) residual^2
  double delta_s_term = 0.0;  // mean nu^2 delta_S
  long clamp_events = 0;
};

// Effective HJ Hamiltonian at (x, C, t) for an observed increment delta_x.
// Curvature violations are clamped here (training path), not raised.
double hj_hamiltonian(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
                      const ValueGradients& vg, const Vec& x, const Vec& delta_x, double dt,
                      long* clamp_events = nullptr);

// Discrete regression residual dJ - H_HJ dt; terminal steps substitute
// U(C_T) for the next-step value.
double step_residual(const ValueNetwork& net, const ModelSpec& spec,
                     const GaussianMixturePolicy& policy0, const ExtendedState& state_now,
                     const ExtendedState& state_next, bool is_terminal_step);

// Log likelihood ratio between transitions implied by the extracted policy
// and the behavioral one.
double delta_S(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
               const ValueGradients& vg, const Vec& x, const Vec& x_next, double dt);

LossDiagnostics nll_loss(const ValueNetwork& net, const ModelSpec& spec,
                         const GaussianMixturePolicy& policy0,
                         const std::vector<StepSample>& batch, double nu_squared,
                         bool parallel = true);

// Loss plus its exact parameter gradient, for the trainer.
LossDiagnostics nll_loss_gradient(const ValueNetwork& net, const ModelSpec& spec,
                                  const GaussianMixturePolicy& policy0,
                                  const std::vector<StepSample>& batch, double nu_squared,
                                  Vec& gradient_out, bool parallel = true);

}  // namespace hjopt
