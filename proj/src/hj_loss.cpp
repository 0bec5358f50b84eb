#include "hjopt/hj_loss.hpp"

#include <cmath>
#include <limits>

#include "hjopt/dual.hpp"

namespace hjopt {

namespace {

inline double max(double a, double floor_value) { return a >= floor_value ? a : floor_value; }

// Everything about one step that does not depend on network outputs.
struct StepContext {
  int N = 0, M = 0, K = 0;
  double dt = 0.0, beta = 0.0, r = 0.0, c1x = 0.0;
  bool is_terminal = false;
  double terminal_value = 0.0;
  Vec x, x_next;
  Vec mu0x;      // N
  Mat mu1x;      // N x M
  Vec sigma_sq;  // N
  std::vector<Vec> u;        // component means at x
  std::vector<double> w;     // prior weights
  std::vector<double> var;   // sigma_k^2
  Vec a0;                    // behavioral mean action
};

StepContext make_context(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
                         const StepSample& s) {
  StepContext c;
  c.N = spec.state_dim;
  c.M = spec.action_dim;
  c.K = policy0.components();
  c.dt = s.t_next - s.t_now;
  c.beta = spec.inverse_temperature;
  c.r = spec.discount_rate;
  c.c1x = spec.c1_at(s.x_now);
  c.is_terminal = s.is_terminal;
  if (s.is_terminal) c.terminal_value = terminal_utility(spec, s.C_next);
  c.x = s.x_now;
  c.x_next = s.x_next;
  c.mu0x = spec.mu0_at(s.x_now);
  c.mu1x = spec.mu1_at(s.x_now);
  c.sigma_sq = spec.sigma.cwiseProduct(spec.sigma);
  c.u.resize(c.K);
  c.w.resize(c.K);
  c.var.resize(c.K);
  for (int k = 0; k < c.K; ++k) {
    c.u[k] = policy0.component_mean(k, s.x_now);
    c.w[k] = policy0.weights[k];
    c.var[k] = policy0.stds[k] * policy0.stds[k];
  }
  c.a0 = mean_action(policy0, s.x_now);
  return c;
}

// Core of the per-step loss term, templated so forward-mode duals can take
// partial derivatives with respect to the network outputs.
// inputs: [J_now, J_next, grad_x (N), grad_C]
template <typename T>
void step_core(const StepContext& c, const T* in, double nu_squared, T& half_resid_sq,
               T& delta_s_scaled, long* clamp_events) {
  using hjopt::exp;
  using hjopt::log;
  using std::exp;
  using std::log;

  const T& J_now = in[0];
  const T* gx = in + 2;
  const T& gC = in[2 + c.N];

  // projected gradient m = mu1(x)^T grad_x
  std::vector<T> m(c.M, T(0.0));
  for (int j = 0; j < c.M; ++j)
    for (int i = 0; i < c.N; ++i) m[j] += T(c.mu1x(i, j)) * gx[i];
  T m_sq(0.0);
  for (int j = 0; j < c.M; ++j) m_sq += m[j] * m[j];

  // component Hamiltonians (clamped curvature) and posterior pieces
  std::vector<T> neg_beta_h(c.K), den(c.K);
  for (int k = 0; k < c.K; ++k) {
    T raw = T(1.0) + T(c.beta * c.var[k] * c.c1x) * gC;
    if (value_of(raw) <= kCurvatureFloor && clamp_events) ++(*clamp_events);
    den[k] = max(raw, kCurvatureFloor);
    T u_dot_m(0.0);
    for (int j = 0; j < c.M; ++j) u_dot_m += T(c.u[k][j]) * m[j];
    T quad = T(c.u[k].squaredNorm() * c.c1x) * gC + T(2.0) * u_dot_m -
             T(c.beta * c.var[k]) * m_sq;
    T h_k = T(0.5) * quad / den[k] + T(0.5 * c.M / c.beta) * log(den[k]);
    neg_beta_h[k] = T(-c.beta) * h_k;
  }
  T max_e = neg_beta_h[0];
  for (int k = 1; k < c.K; ++k)
    if (neg_beta_h[k] > max_e) max_e = neg_beta_h[k];
  T z_sum(0.0);
  for (int k = 0; k < c.K; ++k) z_sum += T(c.w[k]) * exp(neg_beta_h[k] - max_e);
  T log_z = max_e + log(z_sum);  // log sum_k w_k e^{-beta H_k}

  // posterior mean action <a>[J]
  std::vector<T> a_opt(c.M, T(0.0));
  for (int k = 0; k < c.K; ++k) {
    T wk = T(c.w[k]) * exp(neg_beta_h[k] - max_e) / z_sum;
    for (int j = 0; j < c.M; ++j) {
      T u_post = (T(c.u[k][j]) - T(c.beta * c.var[k]) * m[j]) / den[k];
      a_opt[j] += wk * u_post;
    }
  }

  // H_HJ = (1/beta) log Z + r J + (dx/dt - mu0 - mu1 <a>[J]) . grad_x
  T h_hj = log_z / T(c.beta) + T(c.r) * J_now;
  std::vector<T> mu1_aopt(c.N, T(0.0));
  for (int i = 0; i < c.N; ++i)
    for (int j = 0; j < c.M; ++j) mu1_aopt[i] += T(c.mu1x(i, j)) * a_opt[j];
  for (int i = 0; i < c.N; ++i) {
    T xdot = T((c.x_next[i] - c.x[i]) / c.dt);
    h_hj += (xdot - T(c.mu0x[i]) - mu1_aopt[i]) * gx[i];
  }

  T J_next = c.is_terminal ? T(c.terminal_value) : in[1];
  T residual = J_next - J_now - h_hj * T(c.dt);
  half_resid_sq = T(0.5) * residual * residual;

  // delta_S with <a>[J+-] = <a>[J] +- <a>_0
  T ds(0.0);
  for (int i = 0; i < c.N; ++i) {
    T num_minus(0.0), num_plus(0.0);
    for (int j = 0; j < c.M; ++j) {
      num_minus += T(c.mu1x(i, j)) * (a_opt[j] - T(c.a0[j]));
      num_plus += T(c.mu1x(i, j)) * (a_opt[j] + T(c.a0[j]));
    }
    T bracket = (T(c.mu0x[i]) + T(0.5) * num_plus) * T(c.dt) - T(c.x_next[i]) + T(c.x[i]);
    ds += num_minus / T(c.sigma_sq[i]) * bracket;
  }
  delta_s_scaled = T(nu_squared) * ds;
}

void fill_inputs(std::vector<double>& in, const PointValue& now, const PointValue& next,
                 int N) {
  in[0] = now.J;
  in[1] = next.J;
  for (int i = 0; i < N; ++i) in[2 + i] = now.grad_x[i];
  in[2 + N] = now.grad_C;
}

}  // namespace

std::vector<StepSample> collect_steps(const ModelSpec& spec, const Dataset& dataset) {
  std::vector<StepSample> steps;
  steps.reserve(dataset.trajectories.size() * spec.n_steps);
  for (const auto& traj : dataset.trajectories) {
    const int n = static_cast<int>(traj.times.size()) - 1;
    for (int i = 0; i < n; ++i) {
      StepSample s;
      s.x_now = traj.states.row(i).transpose();
      s.C_now = traj.costs[i];
      s.t_now = traj.times[i];
      s.x_next = traj.states.row(i + 1).transpose();
      s.C_next = traj.costs[i + 1];
      s.t_next = traj.times[i + 1];
      s.is_terminal = (i == n - 1);
      steps.push_back(std::move(s));
    }
  }
  return steps;
}

double hj_hamiltonian(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
                      const ValueGradients& vg, const Vec& x, const Vec& delta_x, double dt,
                      long* clamp_events) {
  StepSample s;
  s.x_now = x;
  s.x_next = x + delta_x;
  s.t_now = 0.0;
  s.t_next = dt;
  StepContext c = make_context(spec, policy0, s);

  long dummy = 0;
  long* cl = clamp_events ? clamp_events : &dummy;
  const double beta = c.beta;
  Vec m = c.mu1x.transpose() * vg.grad_x;
  std::vector<double> neg_beta_h(c.K);
  double max_e = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < c.K; ++k) {
    double raw = 1.0 + beta * c.var[k] * c.c1x * vg.grad_C;
    if (raw <= kCurvatureFloor) ++(*cl);
    double den = max(raw, kCurvatureFloor);
    double quad = c.u[k].squaredNorm() * c.c1x * vg.grad_C + 2.0 * c.u[k].dot(m) -
                  beta * c.var[k] * m.squaredNorm();
    neg_beta_h[k] = -beta * (0.5 * quad / den + 0.5 * c.M / beta * std::log(den));
    max_e = std::max(max_e, neg_beta_h[k]);
  }
  double z_sum = 0.0;
  for (int k = 0; k < c.K; ++k) z_sum += c.w[k] * std::exp(neg_beta_h[k] - max_e);
  double log_z = max_e + std::log(z_sum);

  Vec a_opt = Vec::Zero(c.M);
  for (int k = 0; k < c.K; ++k) {
    double den = max(1.0 + beta * c.var[k] * c.c1x * vg.grad_C, kCurvatureFloor);
    double wk = c.w[k] * std::exp(neg_beta_h[k] - max_e) / z_sum;
    a_opt += wk * (c.u[k] - beta * c.var[k] * m) / den;
  }
  Vec xdot = delta_x / dt;
  return log_z / beta + spec.discount_rate * vg.J +
         (xdot - c.mu0x - c.mu1x * a_opt).dot(vg.grad_x);
}

double step_residual(const ValueNetwork& net, const ModelSpec& spec,
                     const GaussianMixturePolicy& policy0, const ExtendedState& state_now,
                     const ExtendedState& state_next, bool is_terminal_step) {
  ValueGradients vg = net.gradients(spec, state_now.x, state_now.C, state_now.t);
  double dt = state_next.t - state_now.t;
  double h = hj_hamiltonian(spec, policy0, vg, state_now.x, Vec(state_next.x - state_now.x), dt);
  double j_next = is_terminal_step ? terminal_utility(spec, state_next.C)
                                   : net.eval(state_next.x, state_next.C, state_next.t);
  return j_next - vg.J - h * dt;
}

double delta_S(const ModelSpec& spec, const GaussianMixturePolicy& policy0,
               const ValueGradients& vg, const Vec& x, const Vec& x_next, double dt) {
  auto [a_plus, a_minus] = expected_action_sum_diff(policy0, vg, x, spec);
  Vec mu0x = spec.mu0_at(x);
  Mat mu1x = spec.mu1_at(x);
  Vec sigma_sq = spec.sigma.cwiseProduct(spec.sigma);
  Vec num_minus = mu1x * a_minus;
  Vec bracket = (mu0x + 0.5 * (mu1x * a_plus)) * dt - x_next + x;
  return num_minus.cwiseQuotient(sigma_sq).dot(bracket);
}

namespace {

struct BatchEvaluation {
  LossDiagnostics diag;
};

LossDiagnostics evaluate_batch(const ValueNetwork& net, const ModelSpec& spec,
                               const GaussianMixturePolicy& policy0,
                               const std::vector<StepSample>& batch, double nu_squared,
                               bool parallel, Vec* gradient_out) {
  const int S = static_cast<int>(batch.size());
  const int N = spec.state_dim;
  const int P = N + 3;

  std::vector<EvalPoint> points(2 * S);
  for (int s = 0; s < S; ++s) {
    points[2 * s] = {batch[s].x_now, batch[s].C_now, batch[s].t_now};
    points[2 * s + 1] = {batch[s].x_next, batch[s].C_next, batch[s].t_next};
  }

  std::vector<double> hj_terms(S, 0.0), ds_terms(S, 0.0);
  std::vector<long> clamp_counts(S, 0);

  LossEvaluator evaluator = [&](const std::vector<PointValue>& values,
                                std::vector<PointCotangent>& cotangents) {
#pragma omp parallel for schedule(static) if (parallel)
    for (int s = 0; s < S; ++s) {
      StepContext ctx = make_context(spec, policy0, batch[s]);
      std::vector<double> in(P);
      fill_inputs(in, values[2 * s], values[2 * s + 1], N);

      double half_rsq = 0.0, ds = 0.0;
      step_core(ctx, in.data(), nu_squared, half_rsq, ds, &clamp_counts[s]);
      hj_terms[s] = half_rsq;
      ds_terms[s] = ds;

      if (gradient_out) {
        std::vector<Dual> din(P);
        for (int p = 0; p < P; ++p) din[p] = Dual(in[p]);
        auto& ct_now = cotangents[2 * s];
        auto& ct_next = cotangents[2 * s + 1];
        for (int p = 0; p < P; ++p) {
          if (p == 1 && ctx.is_terminal) continue;
          din[p].d = 1.0;
          Dual h(0.0), d(0.0);
          step_core(ctx, din.data(), nu_squared, h, d, nullptr);
          din[p].d = 0.0;
          double partial = (h.d + d.d) / S;  // mean over steps
          if (p == 0) ct_now.J_bar += partial;
          else if (p == 1) ct_next.J_bar += partial;
          else if (p < 2 + N) ct_now.grad_x_bar[p - 2] += partial;
          else ct_now.grad_C_bar += partial;
        }
      }
    }
    double total = 0.0;
    for (int s = 0; s < S; ++s) total += hj_terms[s] + ds_terms[s];
    return total / S;
  };

  LossDiagnostics diag;
  if (gradient_out) {
    *gradient_out = net.loss_parameter_gradient(points, evaluator, &diag.loss);
  } else {
    // values only; reuse the evaluator through the same entry point would
    // also compute caches, so evaluate directly
    std::vector<PointValue> values(2 * S);
#pragma omp parallel for schedule(static) if (parallel)
    for (int s = 0; s < S; ++s) {
      values[2 * s] = net.value_and_input_gradients(batch[s].x_now, batch[s].C_now,
                                                    batch[s].t_now);
      if (!batch[s].is_terminal)
        values[2 * s + 1].J = net.eval(batch[s].x_next, batch[s].C_next, batch[s].t_next);
      StepContext ctx = make_context(spec, policy0, batch[s]);
      std::vector<double> in(P);
      fill_inputs(in, values[2 * s], values[2 * s + 1], N);
      double half_rsq = 0.0, ds = 0.0;
      step_core(ctx, in.data(), nu_squared, half_rsq, ds, &clamp_counts[s]);
      hj_terms[s] = half_rsq;
      ds_terms[s] = ds;
    }
    double total = 0.0;
    for (int s = 0; s < S; ++s) total += hj_terms[s] + ds_terms[s];
    diag.loss = total / S;
  }

  double hj_sum = 0.0, ds_sum = 0.0;
  long clamps = 0;
  for (int s = 0; s < S; ++s) {
    hj_sum += hj_terms[s];
    ds_sum += ds_terms[s];
    clamps += clamp_counts[s];
  }
  diag.hj_term = hj_sum / S;
  diag.delta_s_term = ds_sum / S;
  diag.clamp_events = clamps;
  return diag;
}

}  // namespace

LossDiagnostics nll_loss(const ValueNetwork& net, const ModelSpec& spec,
                         const GaussianMixturePolicy& policy0,
                         const std::vector<StepSample>& batch, double nu_squared, bool parallel) {
  if (nu_squared < 0.0) throw std::invalid_argument("nll_loss: nu_squared must be nonnegative");
  return evaluate_batch(net, spec, policy0, batch, nu_squared, parallel, nullptr);
}

LossDiagnostics nll_loss_gradient(const ValueNetwork& net, const ModelSpec& spec,
                                  const GaussianMixturePolicy& policy0,
                                  const std::vector<StepSample>& batch, double nu_squared,
                                  Vec& gradient_out, bool parallel) {
  if (nu_squared < 0.0) throw std::invalid_argument("nll_loss: nu_squared must be nonnegative");
  return evaluate_batch(net, spec, policy0, batch, nu_squared, parallel, &gradient_out);
}

}  // namespace hjopt
