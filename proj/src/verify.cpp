#include "hjopt/verify.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include "hjopt/evaluator.hpp"
#include "hjopt/hj_loss.hpp"
#include "hjopt/oracles.hpp"
#include "hjopt/simulator.hpp"
#include "hjopt/trainer.hpp"

namespace hjopt {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double simpson(const std::function<double(double)>& f, double lo, double hi, int intervals) {
  if (intervals % 2) ++intervals;
  double h = (hi - lo) / intervals;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < intervals; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

ModelSpec random_spec(Rng& rng, int N, int M, double beta = 1.0) {
  ModelSpec spec;
  spec.state_dim = N;
  spec.action_dim = M;
  spec.mu0_const = Vec::NullaryExpr(N, [&](int) { return rng.next_uniform(-0.3, 0.3); });
  spec.mu0_lin = Mat::NullaryExpr(N, N, [&](int, int) { return rng.next_uniform(-0.2, 0.2); });
  spec.mu1_const = Mat::NullaryExpr(N, M, [&](int, int) { return rng.next_uniform(-0.5, 0.5); });
  spec.mu1_lin = Mat::NullaryExpr(N, M, [&](int, int) { return rng.next_uniform(-0.2, 0.2); });
  spec.sigma = Vec::NullaryExpr(N, [&](int) { return rng.next_uniform(0.2, 0.5); });
  spec.c0 = 1.0;
  spec.c1 = rng.next_uniform(1.0, 5.0);
  spec.discount_rate = 0.03;
  spec.inverse_temperature = beta;
  spec.horizon = 1.0;
  spec.n_steps = 10;
  return spec;
}

GaussianMixturePolicy random_policy(Rng& rng, int K, int M, int N, bool state_dependent = false) {
  GaussianMixturePolicy policy;
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    policy.weights.push_back(rng.next_uniform(0.5, 1.5));
    total += policy.weights.back();
    policy.mean_const.push_back(
        Vec::NullaryExpr(M, [&](int) { return rng.next_uniform(-0.5, 0.5); }));
    Mat lin = Mat::Zero(M, N);
    if (state_dependent)
      lin = Mat::NullaryExpr(M, N, [&](int, int) { return rng.next_uniform(-0.2, 0.2); });
    policy.mean_lin.push_back(std::move(lin));
    policy.stds.push_back(std::sqrt(rng.next_uniform(0.2, 0.4)));
  }
  for (double& w : policy.weights) w /= total;
  return policy;
}

ValueGradients random_vg(Rng& rng, const ModelSpec& spec, const Vec& x) {
  ValueGradients vg;
  vg.J = rng.next_uniform(-1.0, 1.0);
  vg.grad_x = Vec::NullaryExpr(spec.state_dim, [&](int) { return rng.next_uniform(-0.5, 0.5); });
  vg.grad_C = rng.next_uniform(0.2, 1.2);
  vg.projected = spec.mu1_at(x).transpose() * vg.grad_x;
  return vg;
}

Vec random_x(Rng& rng, int N) {
  return Vec::NullaryExpr(N, [&](int) { return rng.next_uniform(0.3, 1.0); });
}

// Straight-line reimplementation of the effective HJ Hamiltonian using plain
// loops only; deliberately shares no code with gm_policy/hj_loss.
double straightline_hhj(const ModelSpec& spec, const GaussianMixturePolicy& p, double J,
                        const Vec& gx, double gC, const Vec& x, const Vec& x_next, double dt,
                        Vec* a_opt_out = nullptr) {
  const int N = spec.state_dim, M = spec.action_dim, K = p.components();
  const double beta = spec.inverse_temperature;
  double xsq = 0.0;
  for (int i = 0; i < N; ++i) xsq += x[i] * x[i];
  const double c1x = spec.c1 * xsq;

  std::vector<double> mu0(N), m(M, 0.0);
  std::vector<std::vector<double>> mu1(N, std::vector<double>(M));
  for (int i = 0; i < N; ++i) {
    mu0[i] = spec.mu0_const[i];
    for (int j = 0; j < N; ++j) mu0[i] += spec.mu0_lin(i, j) * x[j];
    for (int j = 0; j < M; ++j) mu1[i][j] = spec.mu1_const(i, j) + x[i] * spec.mu1_lin(i, j);
  }
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < N; ++i) m[j] += mu1[i][j] * gx[i];

  std::vector<double> h(K), wz(K);
  double z = 0.0;
  for (int k = 0; k < K; ++k) {
    double var = p.stds[k] * p.stds[k];
    double den = 1.0 + beta * var * c1x * gC;
    double usq = 0.0, udm = 0.0, msq = 0.0;
    for (int j = 0; j < M; ++j) {
      double u_j = p.mean_const[k][j];
      for (int i = 0; i < N; ++i) u_j += p.mean_lin[k](j, i) * x[i];
      usq += u_j * u_j;
      udm += u_j * m[j];
      msq += m[j] * m[j];
    }
    h[k] = 0.5 * (usq * c1x * gC + 2.0 * udm - beta * var * msq) / den +
           0.5 * M / beta * std::log(den);
    wz[k] = p.weights[k] * std::exp(-beta * h[k]);
    z += wz[k];
  }

  std::vector<double> a_opt(M, 0.0);
  for (int k = 0; k < K; ++k) {
    double var = p.stds[k] * p.stds[k];
    double den = 1.0 + beta * var * c1x * gC;
    for (int j = 0; j < M; ++j) {
      double u_j = p.mean_const[k][j];
      for (int i = 0; i < N; ++i) u_j += p.mean_lin[k](j, i) * x[i];
      a_opt[j] += (wz[k] / z) * (u_j - beta * var * m[j]) / den;
    }
  }
  if (a_opt_out) {
    a_opt_out->resize(M);
    for (int j = 0; j < M; ++j) (*a_opt_out)[j] = a_opt[j];
  }

  double hhj = std::log(z) / beta + spec.discount_rate * J;
  for (int i = 0; i < N; ++i) {
    double adv = (x_next[i] - x[i]) / dt - mu0[i];
    for (int j = 0; j < M; ++j) adv -= mu1[i][j] * a_opt[j];
    hhj += adv * gx[i];
  }
  return hhj;
}

}  // namespace

std::vector<VerifyCheck> run_verification(const std::string& level) {
  if (level != "quick" && level != "full")
    throw std::invalid_argument("verify level must be \"quick\" or \"full\"");
  const bool full = level == "full";

  std::vector<VerifyCheck> out;
  auto run = [&out](const std::string& name, double tolerance,
                    const std::function<double()>& body) {
    VerifyCheck check;
    check.check_name = name;
    check.tolerance = tolerance;
    try {
      check.max_error = body();
      check.pass = std::isfinite(check.max_error) && check.max_error <= tolerance;
    } catch (const std::exception&) {
      check.max_error = std::numeric_limits<double>::infinity();
      check.pass = false;
    }
    out.push_back(check);
  };

  run("hamiltonian_vs_quadrature_fixture", 1e-8, [] {
    ModelSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.mu0_const = Vec::Zero(1);
    spec.mu0_lin = Mat::Zero(1, 1);
    spec.mu1_const = Mat::Constant(1, 1, 1.0);
    spec.mu1_lin = Mat::Zero(1, 1);
    spec.sigma = Vec::Constant(1, 0.3);
    spec.c1 = 5.0;
    spec.inverse_temperature = 1.0;
    GaussianMixturePolicy p;
    p.weights = {1.0};
    p.mean_const = {Vec::Constant(1, 0.3)};
    p.mean_lin = {Mat::Zero(1, 1)};
    p.stds = {0.5};
    Vec x = Vec::Constant(1, 1.0);
    ValueGradients vg = ValueGradients::zero(1, 1);
    vg.grad_C = 1.0;
    vg.grad_x = Vec::Constant(1, 0.4);
    vg.projected = Vec::Constant(1, 0.4);
    return std::abs(component_hamiltonian(p, 0, vg, x, spec) -
                    oracles::partition_quadrature(p, 0, vg, x, spec));
  });

  run("hamiltonian_vs_closed_form", 1e-8, [] {
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 150; ++trial) {
      int M = trial < 100 ? 1 : 2;
      ModelSpec spec = random_spec(rng, 2, M);
      GaussianMixturePolicy p = random_policy(rng, 2, M, 2, true);
      Vec x = random_x(rng, 2);
      ValueGradients vg = random_vg(rng, spec, x);
      for (int k = 0; k < p.components(); ++k)
        worst = std::max(worst, std::abs(component_hamiltonian(p, k, vg, x, spec) -
                                         oracles::partition_closed_form(p, k, vg, x, spec)));
    }
    return worst;
  });

  run("hamiltonian_high_temperature_series", 1e-2, [] {
    Rng rng(202);
    ModelSpec spec = random_spec(rng, 2, 2);
    GaussianMixturePolicy p = random_policy(rng, 1, 2, 2);
    Vec x = random_x(rng, 2);
    ValueGradients vg = random_vg(rng, spec, x);
    const int M = 2;
    const double c1jc = spec.c1_at(x) * vg.grad_C;
    const double var = p.stds[0] * p.stds[0];
    const Vec u = p.component_mean(0, x);
    const Vec& m = vg.projected;
    double h0 = 0.5 * u.squaredNorm() * c1jc + u.dot(m) + 0.5 * M * var * c1jc;
    double h1 = -(0.5 * var * m.squaredNorm() +
                  var * c1jc * (0.5 * u.squaredNorm() * c1jc + u.dot(m)) +
                  0.25 * M * var * var * c1jc * c1jc);
    ModelSpec low = spec;
    low.inverse_temperature = 1e-4;
    double H = component_hamiltonian(p, 0, vg, x, low);
    return std::abs((H - h0) / low.inverse_temperature - h1);
  });

  run("hamiltonian_first_term_vs_quadrature", 1e-6, [] {
    Rng rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      ModelSpec spec = random_spec(rng, 2, 1);
      GaussianMixturePolicy p = random_policy(rng, 2, 1, 2);
      Vec x = random_x(rng, 2);
      ValueGradients vg = random_vg(rng, spec, x);
      const double beta = spec.inverse_temperature;
      double z_main = 0.0, z_quad = 0.0;
      for (int k = 0; k < p.components(); ++k) {
        z_main += p.weights[k] * std::exp(-beta * component_hamiltonian(p, k, vg, x, spec));
        z_quad += p.weights[k] * std::exp(-beta * oracles::partition_quadrature(p, k, vg, x, spec));
      }
      worst = std::max(worst, std::abs(std::log(z_main) / beta - std::log(z_quad) / beta));
    }
    return worst;
  });

  run("posterior_grid_moments", 1e-5, [] {
    ModelSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.mu0_const = Vec::Zero(1);
    spec.mu0_lin = Mat::Zero(1, 1);
    spec.mu1_const = Mat::Constant(1, 1, 0.7);
    spec.mu1_lin = Mat::Zero(1, 1);
    spec.sigma = Vec::Constant(1, 0.3);
    spec.c1 = 3.0;
    spec.inverse_temperature = 1.0;
    GaussianMixturePolicy p;
    p.weights = {0.4, 0.6};
    p.mean_const = {Vec::Constant(1, -0.4), Vec::Constant(1, 0.5)};
    p.mean_lin = {Mat::Zero(1, 1), Mat::Zero(1, 1)};
    p.stds = {0.45, 0.6};
    Vec x = Vec::Constant(1, 0.8);
    ValueGradients vg = ValueGradients::zero(1, 1);
    vg.grad_C = 0.7;
    vg.grad_x = Vec::Constant(1, 0.5 / 0.7);
    vg.projected = Vec::Constant(1, 0.5);

    PosteriorPolicy post = posterior_policy(p, vg, x, spec);
    const double beta = spec.inverse_temperature;
    const double tilt = spec.c1_at(x) * vg.grad_C;
    const double shift = vg.projected[0];
    double worst = 0.0, z_total = 0.0;
    std::vector<double> zk(2), mk(2), vk(2);
    for (int k = 0; k < 2; ++k) {
      double uk = p.mean_const[k][0], var = p.stds[k] * p.stds[k], wk = p.weights[k];
      auto f = [&](double a) {
        return wk / std::sqrt(kTwoPi * var) * std::exp(-0.5 * (a - uk) * (a - uk) / var) *
               std::exp(-beta * (0.5 * tilt * a * a + shift * a));
      };
      zk[k] = simpson(f, -12.0, 12.0, 48000);
      mk[k] = simpson([&](double a) { return a * f(a); }, -12.0, 12.0, 48000) / zk[k];
      vk[k] = simpson([&](double a) { return a * a * f(a); }, -12.0, 12.0, 48000) / zk[k] -
              mk[k] * mk[k];
      z_total += zk[k];
    }
    for (int k = 0; k < 2; ++k) {
      worst = std::max(worst, std::abs(post.weights[k] - zk[k] / z_total));
      worst = std::max(worst, std::abs(post.means[k][0] - mk[k]));
      worst = std::max(worst, std::abs(post.cov_scalars[k] - vk[k]));
    }
    return worst;
  });

  run("posterior_zero_temperature_means", 1e-3, [] {
    Rng rng(404);
    ModelSpec spec = random_spec(rng, 2, 2, 1e6);
    GaussianMixturePolicy p = random_policy(rng, 2, 2, 2);
    Vec x = random_x(rng, 2);
    ValueGradients vg = random_vg(rng, spec, x);
    vg.grad_C = 1.0;
    PosteriorPolicy post = posterior_policy(p, vg, x, spec);
    Vec zt = zero_temperature_action(vg, x, spec);
    double worst = 0.0;
    for (const Vec& mean : post.means)
      worst = std::max(worst, (mean - zt).cwiseAbs().maxCoeff());
    return worst;
  });

  run("posterior_zero_temperature_covariances", 1e-5, [] {
    Rng rng(404);
    ModelSpec spec = random_spec(rng, 2, 2, 1e6);
    GaussianMixturePolicy p = random_policy(rng, 2, 2, 2);
    Vec x = random_x(rng, 2);
    ValueGradients vg = random_vg(rng, spec, x);
    vg.grad_C = 1.0;
    PosteriorPolicy post = posterior_policy(p, vg, x, spec);
    double worst = 0.0;
    for (double cv : post.cov_scalars) worst = std::max(worst, cv);
    return worst;
  });

  run("zero_temperature_action_vs_posterior", 1e-4, [] {
    Rng rng(505);
    ModelSpec spec = random_spec(rng, 2, 2, 1e8);
    GaussianMixturePolicy p = random_policy(rng, 3, 2, 2);
    Vec x = random_x(rng, 2);
    ValueGradients vg = random_vg(rng, spec, x);
    vg.grad_C = 1.0;
    Vec a = expected_action_optimal(p, vg, x, spec);
    Vec zt = zero_temperature_action(vg, x, spec);
    return (a - zt).cwiseAbs().maxCoeff();
  });

  run("action_sum_diff_consistency", 1e-12, [] {
    Rng rng(606);
    ModelSpec spec = random_spec(rng, 3, 2);
    GaussianMixturePolicy p = random_policy(rng, 2, 2, 3, true);
    Vec x = random_x(rng, 3);
    ValueGradients vg = random_vg(rng, spec, x);
    auto [plus, minus] = expected_action_sum_diff(p, vg, x, spec);
    Vec a_opt = expected_action_optimal(p, vg, x, spec);
    Vec a0 = mean_action(p, x);
    double e1 = (plus - minus - 2.0 * a0).cwiseAbs().maxCoeff();
    double e2 = (plus + minus - 2.0 * a_opt).cwiseAbs().maxCoeff();
    return std::max(e1, e2);
  });

  run("model_drift_dense_oracle", 1e-12, [] {
    Rng rng(707);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      ModelSpec spec = random_spec(rng, 3, 2);
      Vec x = random_x(rng, 3);
      Vec a = Vec::NullaryExpr(2, [&](int) { return rng.next_uniform(-1.0, 1.0); });
      Vec main = drift(spec, x, a);
      for (int i = 0; i < 3; ++i) {
        double v = spec.mu0_const[i];
        for (int j = 0; j < 3; ++j) v += spec.mu0_lin(i, j) * x[j];
        for (int j = 0; j < 2; ++j) v += (spec.mu1_const(i, j) + x[i] * spec.mu1_lin(i, j)) * a[j];
        worst = std::max(worst, std::abs(main[i] - v));
      }
    }
    return worst;
  });

  run("effective_drift_dense_oracle", 1e-12, [] {
    Rng rng(808);
    ModelSpec spec = random_spec(rng, 3, 2);
    GaussianMixturePolicy p = random_policy(rng, 2, 2, 3, true);
    Vec x = random_x(rng, 3);
    Vec abar = mean_action(p, x);
    Vec main = effective_drift(spec, abar, x);
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
      double v = spec.mu0_const[i];
      for (int j = 0; j < 3; ++j) v += spec.mu0_lin(i, j) * x[j];
      for (int j = 0; j < 2; ++j) v += (spec.mu1_const(i, j) + x[i] * spec.mu1_lin(i, j)) * abar[j];
      worst = std::max(worst, std::abs(main[i] - v));
    }
    return worst;
  });

  run("net_eval_hand_composition", 1e-12, [] {
    ValueNetwork net(2, {1});
    net.layers()[0].W << 0.3, -0.2, 0.5, 0.1;
    net.layers()[0].b << 0.05;
    net.layers()[1].W << 1.7;
    net.layers()[1].b << -0.3;
    Vec x(2);
    x << 0.4, -0.9;
    double C = 0.2, t = 0.7;
    double z = 0.3 * x[0] - 0.2 * x[1] + 0.5 * C + 0.1 * t + 0.05;
    double expected = 1.7 * std::log1p(std::exp(z)) - 0.3;
    return std::abs(net.eval(x, C, t) - expected);
  });

  run("net_input_gradient_fd", 1e-6, [] {
    ValueNetwork net = ValueNetwork::initialize(3, {8, 8}, 7);
    Vec point(4);
    point << 0.3, -0.5, 0.8, 0.4;
    const double t = 0.6;
    auto f = [&](const Vec& v) { return net.eval(v.head(3), v[3], t); };
    auto grad = [&](const Vec& v) {
      PointValue pv = net.value_and_input_gradients(v.head(3), v[3], t);
      Vec g(4);
      g.head(3) = pv.grad_x;
      g[3] = pv.grad_C;
      return g;
    };
    return oracles::finite_difference_check(f, grad, point, 1e-5).max_rel_error;
  });

  run("net_parameter_gradient_fd", 1e-5, [] {
    ValueNetwork net = ValueNetwork::initialize(2, {2}, 3);
    Vec x0(2);
    x0 << 0.3, -0.2;
    std::vector<EvalPoint> pts = {{x0, 0.1, 0.5}};
    LossEvaluator ev = [](const std::vector<PointValue>& v, std::vector<PointCotangent>& ct) {
      ct[0].J_bar = 2.0 * v[0].J;
      return v[0].J * v[0].J;
    };
    Vec theta0 = net.flatten_parameters();
    auto f = [&](const Vec& theta) {
      ValueNetwork n = net;
      n.unflatten_parameters(theta);
      double j = n.eval(x0, 0.1, 0.5);
      return j * j;
    };
    auto grad = [&](const Vec& theta) {
      ValueNetwork n = net;
      n.unflatten_parameters(theta);
      return n.loss_parameter_gradient(pts, ev);
    };
    return oracles::finite_difference_check(f, grad, theta0, 1e-5).max_rel_error;
  });

  run("net_nested_gradient_fd", 1e-4, [] {
    ValueNetwork net = ValueNetwork::initialize(2, {2}, 11);
    Vec x0(2);
    x0 << 0.6, -0.1;
    std::vector<EvalPoint> pts = {{x0, 0.3, 0.2}};
    LossEvaluator ev = [](const std::vector<PointValue>& v, std::vector<PointCotangent>& ct) {
      ct[0].grad_x_bar = 2.0 * v[0].grad_x;
      return v[0].grad_x.squaredNorm();
    };
    Vec theta0 = net.flatten_parameters();
    auto f = [&](const Vec& theta) {
      ValueNetwork n = net;
      n.unflatten_parameters(theta);
      return n.value_and_input_gradients(x0, 0.3, 0.2).grad_x.squaredNorm();
    };
    auto grad = [&](const Vec& theta) {
      ValueNetwork n = net;
      n.unflatten_parameters(theta);
      return n.loss_parameter_gradient(pts, ev);
    };
    return oracles::finite_difference_check(f, grad, theta0, 1e-5).max_rel_error;
  });

  run("nll_gradient_fd", 1e-4, [] {
    Rng rng(909);
    ModelSpec spec = random_spec(rng, 2, 1);
    spec.n_steps = 3;
    spec.horizon = 0.3;
    GaussianMixturePolicy p = random_policy(rng, 2, 1, 2);
    Dataset data = simulate_dataset(spec, p, 2, 42, uniform_box_sampler(2), false);
    std::vector<StepSample> steps = collect_steps(spec, data);
    ValueNetwork net = ValueNetwork::initialize(2, {3}, 9);
    Vec theta0 = net.flatten_parameters();
    auto f = [&](const Vec& theta) {
      ValueNetwork n = net;
      n.unflatten_parameters(theta);
      return nll_loss(n, spec, p, steps, 100.0, false).loss;
    };
    auto grad = [&](const Vec& theta) {
      ValueNetwork n = net;
      n.unflatten_parameters(theta);
      Vec g;
      nll_loss_gradient(n, spec, p, steps, 100.0, g, false);
      return g;
    };
    return oracles::finite_difference_check(f, grad, theta0, 1e-5).max_rel_error;
  });

  run("residual_reimplementation", 1e-12, [] {
    Rng rng(111);
    ModelSpec spec = random_spec(rng, 2, 2);
    GaussianMixturePolicy p = random_policy(rng, 2, 2, 2, true);
    ValueNetwork net = ValueNetwork::initialize(2, {4}, 21);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Vec x = random_x(rng, 2);
      Vec x_next = x + Vec::NullaryExpr(2, [&](int) { return rng.next_uniform(-0.1, 0.1); });
      double dt = spec.dt();
      ExtendedState now{x, rng.next_uniform(0.0, 0.5), 0.2};
      ExtendedState next{x_next, now.C + rng.next_uniform(0.0, 0.1), 0.2 + dt};
      bool terminal = trial % 4 == 0;
      double main = step_residual(net, spec, p, now, next, terminal);

      PointValue pv = net.value_and_input_gradients(now.x, now.C, now.t);
      double hhj = straightline_hhj(spec, p, pv.J, pv.grad_x, pv.grad_C, x, x_next, dt);
      double j_next = terminal ? terminal_utility(spec, next.C) : net.eval(next.x, next.C, next.t);
      double ref = j_next - pv.J - hhj * dt;
      worst = std::max(worst, std::abs(main - ref));
    }
    return worst;
  });

  run("nll_fixture_reimplementation", 1e-12, [] {
    Rng rng(222);
    ModelSpec spec = random_spec(rng, 2, 1);
    spec.n_steps = 3;
    spec.horizon = 0.3;
    GaussianMixturePolicy p = random_policy(rng, 2, 1, 2);
    Dataset data = simulate_dataset(spec, p, 2, 77, uniform_box_sampler(2), false);
    ValueNetwork net = ValueNetwork::initialize(2, {4}, 5);
    const double nu_sq = 100.0;
    double main = nll_loss(net, spec, p, collect_steps(spec, data), nu_sq, false).loss;

    double acc = 0.0;
    int count = 0;
    for (const Trajectory& traj : data.trajectories) {
      for (int i = 0; i < spec.n_steps; ++i) {
        Vec x = traj.states.row(i).transpose();
        Vec x_next = traj.states.row(i + 1).transpose();
        double dt = traj.times[i + 1] - traj.times[i];
        PointValue pv = net.value_and_input_gradients(x, traj.costs[i], traj.times[i]);
        Vec a_opt;
        double hhj =
            straightline_hhj(spec, p, pv.J, pv.grad_x, pv.grad_C, x, x_next, dt, &a_opt);
        double j_next = (i == spec.n_steps - 1)
                            ? terminal_utility(spec, traj.costs[i + 1])
                            : net.eval(x_next, traj.costs[i + 1], traj.times[i + 1]);
        double resid = j_next - pv.J - hhj * dt;
        Vec drift_new = spec.mu0_at(x) + spec.mu1_at(x) * a_opt;
        Vec drift_behavioral = spec.mu0_at(x) + spec.mu1_at(x) * mean_action(p, x);
        double ds = oracles::delta_S_general(spec, x, x_next, drift_new, drift_behavioral, dt);
        acc += 0.5 * resid * resid + nu_sq * ds;
        ++count;
      }
    }
    return std::abs(main - acc / count);
  });

  run("delta_s_vs_general_form", 1e-12, [] {
    Rng rng(333);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      ModelSpec spec = random_spec(rng, 3, 2);
      GaussianMixturePolicy p = random_policy(rng, 2, 2, 3, true);
      Vec x = random_x(rng, 3);
      Vec x_next = x + Vec::NullaryExpr(3, [&](int) { return rng.next_uniform(-0.1, 0.1); });
      ValueGradients vg = random_vg(rng, spec, x);
      double dt = spec.dt();
      double main = delta_S(spec, p, vg, x, x_next, dt);
      Vec drift_new = spec.mu0_at(x) + spec.mu1_at(x) * expected_action_optimal(p, vg, x, spec);
      Vec drift_behavioral = spec.mu0_at(x) + spec.mu1_at(x) * mean_action(p, x);
      double ref = oracles::delta_S_general(spec, x, x_next, drift_new, drift_behavioral, dt);
      worst = std::max(worst, std::abs(main - ref));
    }
    return worst;
  });

  run("delta_s_vs_density_ratio", 1e-10, [] {
    Rng rng(444);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      int N = trial % 2 ? 1 : 3;
      ModelSpec spec = random_spec(rng, N, 2);
      GaussianMixturePolicy p = random_policy(rng, 2, 2, N, true);
      Vec x = random_x(rng, N);
      Vec x_next = x + Vec::NullaryExpr(N, [&](int) { return rng.next_uniform(-0.1, 0.1); });
      ValueGradients vg = random_vg(rng, spec, x);
      double dt = spec.dt();
      double main = delta_S(spec, p, vg, x, x_next, dt);
      Vec a_opt = expected_action_optimal(p, vg, x, spec);
      Vec a0 = mean_action(p, x);
      double ref = oracles::transition_density(spec, x, x_next, a0, dt) -
                   oracles::transition_density(spec, x, x_next, a_opt, dt);
      worst = std::max(worst, std::abs(main - ref));
    }
    return worst;
  });

  run("transition_density_normalization", 1e-8, [] {
    Rng rng(555);
    ModelSpec spec = random_spec(rng, 1, 1);
    Vec x = random_x(rng, 1);
    Vec a = Vec::Constant(1, 0.4);
    double dt = spec.dt();
    double mean = x[0] + drift(spec, x, a)[0] * dt;
    double sd = spec.sigma[0] * std::sqrt(dt);
    auto f = [&](double xn) {
      return std::exp(oracles::transition_density(spec, x, Vec::Constant(1, xn), a, dt));
    };
    double integral = simpson(f, mean - 12.0 * sd, mean + 12.0 * sd, 8000);
    return std::abs(integral - 1.0);
  });

  run("adam_hand_stepped", 1e-12, [] {
    TrainingConfig config;
    config.weight_decay = 0.0;
    Vec theta = Vec::Constant(1, 2.0);
    double ref_theta = 2.0, m = 0.0, v = 0.0;
    AdamState state;
    double worst = 0.0;
    const double lr = 0.1;
    for (int step = 1; step <= 10; ++step) {
      Vec g = theta;  // gradient of (1/2) theta^2
      adam_step(theta, g, state, config, lr);
      double gr = ref_theta;
      m = 0.9 * m + 0.1 * gr;
      v = 0.999 * v + 0.001 * gr * gr;
      double mh = m / (1.0 - std::pow(0.9, step));
      double vh = v / (1.0 - std::pow(0.999, step));
      ref_theta -= lr * mh / (std::sqrt(vh) + 1e-8);
      worst = std::max(worst, std::abs(theta[0] - ref_theta));
    }
    return worst;
  });

  run("fd_oracle_linear", 1e-9, [] {
    Vec c(3);
    c << 1.5, -2.0, 0.25;
    auto f = [&](const Vec& v) { return c.dot(v); };
    auto grad = [&](const Vec&) { return c; };
    Vec point(3);
    point << 0.3, 0.7, -0.2;
    return oracles::finite_difference_check(f, grad, point, 1e-5).max_rel_error;
  });

  run("fd_oracle_quadratic", 1e-7, [] {
    Mat A(2, 2);
    A << 2.0, 0.5, 0.5, 1.5;
    auto f = [&](const Vec& v) { return 0.5 * v.dot(A * v); };
    auto grad = [&](const Vec& v) { return Vec(A * v); };
    Vec point(2);
    point << 0.4, -0.8;
    return oracles::finite_difference_check(f, grad, point, 1e-5).max_rel_error;
  });

  if (!full) return out;

  run("mean_action_sampling", 4.0, [] {
    Rng rng(661);
    GaussianMixturePolicy p = random_policy(rng, 3, 2, 2, true);
    Vec x = random_x(rng, 2);
    Vec analytic = mean_action(p, x);
    const int n = 1000000;
    Vec sum = Vec::Zero(2), sum_sq = Vec::Zero(2);
    Rng draw(662);
    for (int i = 0; i < n; ++i) {
      Vec a = sample_action(p, x, draw);
      sum += a;
      sum_sq += a.cwiseProduct(a);
    }
    Vec mean = sum / n;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      double sd = std::sqrt((sum_sq[j] / n - mean[j] * mean[j]) / n);
      worst = std::max(worst, std::abs(mean[j] - analytic[j]) / sd);
    }
    return worst;
  });

  run("component_frequency_sampling", 4.0, [] {
    GaussianMixturePolicy p;
    p.weights = {0.3, 0.7};
    p.mean_const = {Vec::Constant(1, -10.0), Vec::Constant(1, 10.0)};
    p.mean_lin = {Mat::Zero(1, 1), Mat::Zero(1, 1)};
    p.stds = {0.3, 0.3};
    Vec x = Vec::Zero(1);
    const int n = 100000;
    Rng rng(663);
    int low = 0;
    for (int i = 0; i < n; ++i)
      if (sample_action(p, x, rng)[0] < 0.0) ++low;
    double freq = static_cast<double>(low) / n;
    double se = std::sqrt(0.3 * 0.7 / n);
    return std::abs(freq - 0.3) / se;
  });

  run("log_density_normalization", 1e-6, [] {
    Rng rng(664);
    GaussianMixturePolicy p = random_policy(rng, 3, 1, 2, true);
    Vec x = random_x(rng, 2);
    auto f = [&](double a) { return std::exp(log_density(p, x, Vec::Constant(1, a))); };
    return std::abs(simpson(f, -15.0, 15.0, 60000) - 1.0);
  });

  run("expected_squared_norm_sampling", 4.0, [] {
    Rng rng(665);
    GaussianMixturePolicy p = random_policy(rng, 3, 2, 2, true);
    Vec x = random_x(rng, 2);
    double analytic = expected_squared_norm(p, x);
    const int n = 1000000;
    double sum = 0.0, sum_sq = 0.0;
    Rng draw(666);
    for (int i = 0; i < n; ++i) {
      double v = sample_action(p, x, draw).squaredNorm();
      sum += v;
      sum_sq += v * v;
    }
    double mean = sum / n;
    double se = std::sqrt((sum_sq / n - mean * mean) / n);
    return std::abs(mean - analytic) / se;
  });

  run("posterior_mean_sampling", 4.0, [] {
    Rng rng(667);
    ModelSpec spec = random_spec(rng, 2, 2);
    GaussianMixturePolicy p = random_policy(rng, 2, 2, 2);
    Vec x = random_x(rng, 2);
    ValueGradients vg = random_vg(rng, spec, x);
    PosteriorPolicy post = posterior_policy(p, vg, x, spec);
    Vec analytic = expected_action_optimal(p, vg, x, spec);
    const int n = 200000;
    Vec sum = Vec::Zero(2), sum_sq = Vec::Zero(2);
    Rng draw(668);
    for (int i = 0; i < n; ++i) {
      Vec a = post.sample(draw);
      sum += a;
      sum_sq += a.cwiseProduct(a);
    }
    Vec mean = sum / n;
    double worst = 0.0;
    for (int j = 0; j < 2; ++j) {
      double sd = std::sqrt((sum_sq[j] / n - mean[j] * mean[j]) / n);
      worst = std::max(worst, std::abs(mean[j] - analytic[j]) / sd);
    }
    return worst;
  });

  run("euler_moment_mean", 4.0, [] {
    Rng rng(669);
    ModelSpec spec = random_spec(rng, 2, 1);
    Vec x = random_x(rng, 2);
    Vec a = Vec::Constant(1, 0.3);
    Vec mu = drift(spec, x, a);
    double dt = spec.dt();
    const int n = 100000;
    Vec sum = Vec::Zero(2);
    Rng draw(670);
    Vec noise(2);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) noise[d] = draw.next_normal();
      sum += (step_euler(x, mu, spec, dt, noise) - x) / dt;
    }
    Vec mean = sum / n;
    double worst = 0.0;
    for (int d = 0; d < 2; ++d) {
      double se = spec.sigma[d] / std::sqrt(dt) / std::sqrt(static_cast<double>(n));
      worst = std::max(worst, std::abs(mean[d] - mu[d]) / se);
    }
    return worst;
  });

  run("euler_moment_covariance", 0.05, [] {
    Rng rng(671);
    ModelSpec spec = random_spec(rng, 2, 1);
    Vec x = random_x(rng, 2);
    Vec a = Vec::Constant(1, 0.3);
    Vec mu = drift(spec, x, a);
    double dt = spec.dt();
    const int n = 100000;
    Vec sum = Vec::Zero(2), sum_sq = Vec::Zero(2);
    Rng draw(672);
    Vec noise(2);
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) noise[d] = draw.next_normal();
      Vec delta = step_euler(x, mu, spec, dt, noise) - x;
      sum += delta;
      sum_sq += delta.cwiseProduct(delta);
    }
    double worst = 0.0;
    for (int d = 0; d < 2; ++d) {
      double mean = sum[d] / n;
      double var = sum_sq[d] / n - mean * mean;
      double expected = spec.sigma[d] * spec.sigma[d] * dt;
      worst = std::max(worst, std::abs(var - expected) / expected);
    }
    return worst;
  });

  run("cost_compounding_convergence", 0.15, [] {
    ModelSpec spec;
    spec.discount_rate = 0.03;
    const double T = 1.0;
    auto c_of = [](double s) { return 1.0 + s; };
    // continuum value of C_T for dC = (c + r C) dt
    auto exact = [&] {
      double r = 0.03;
      return simpson([&](double s) { return c_of(s) * std::exp(r * (T - s)); }, 0.0, T, 20000);
    }();
    auto discrete = [&](int steps) {
      double dt = T / steps, C = 0.0;
      for (int i = 0; i < steps; ++i) C = accumulate_cost(C, c_of(i * dt), spec, dt);
      return C;
    };
    double e1 = std::abs(discrete(40) - exact);
    double e2 = std::abs(discrete(80) - exact);
    return std::abs(e2 / e1 - 0.5);
  });

  run("deterministic_limit_ode", 1e-3, [] {
    ModelSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.mu0_const = Vec::Constant(1, 0.1);
    spec.mu0_lin = Mat::Constant(1, 1, 0.2);
    spec.mu1_const = Mat::Constant(1, 1, 0.3);
    spec.mu1_lin = Mat::Zero(1, 1);
    spec.sigma = Vec::Constant(1, 1e-8);
    spec.c0 = 1.0;
    spec.c1 = 0.0;
    spec.horizon = 1.0;
    spec.n_steps = 40;
    GaussianMixturePolicy p;
    p.weights = {1.0};
    p.mean_const = {Vec::Constant(1, 0.5)};
    p.mean_lin = {Mat::Zero(1, 1)};
    p.stds = {0.3};
    auto x0 = [](Rng&) { return Vec::Constant(1, 0.1); };
    Dataset data = simulate_dataset(spec, p, 4, 31, x0, false);
    // fine-step reference for dx/dt = 0.1 + 0.2 x + 0.3 * 0.5
    double x = 0.1;
    const int fine = 40000;
    double dt = spec.horizon / fine;
    for (int i = 0; i < fine; ++i) x += (0.25 + 0.2 * x) * dt;
    double worst = 0.0;
    for (const Trajectory& traj : data.trajectories)
      worst = std::max(worst, std::abs(traj.states(spec.n_steps, 0) - x));
    for (size_t i = 1; i < data.trajectories.size(); ++i)
      worst = std::max(worst, std::abs(data.trajectories[i].states(spec.n_steps, 0) -
                                       data.trajectories[0].states(spec.n_steps, 0)));
    return worst;
  });

  run("mode_consistency", 4.0, [] {
    Rng rng(673);
    ModelSpec spec = random_spec(rng, 2, 1);
    spec.n_steps = 20;
    GaussianMixturePolicy p = random_policy(rng, 2, 1, 2);
    ExtendedState start{Vec::Constant(2, 0.1), 0.0, 0.0};
    ReturnDistribution eff = estimate_return_distribution(spec, p, start, 4000, 91,
                                                          SimulationMode::EffectiveDrift);
    ReturnDistribution smp = estimate_return_distribution(spec, p, start, 4000, 92,
                                                          SimulationMode::SampledActions);
    double se = std::sqrt(eff.std_error * eff.std_error + smp.std_error * smp.std_error);
    return std::abs(eff.mean - smp.mean) / se;
  });

  run("terminal_cost_moment_integral", 4.0, [] {
    ModelSpec spec;
    spec.state_dim = 1;
    spec.action_dim = 1;
    spec.mu0_const = Vec::Constant(1, 0.1);
    spec.mu0_lin = Mat::Zero(1, 1);
    spec.mu1_const = Mat::Zero(1, 1);
    spec.mu1_lin = Mat::Zero(1, 1);
    spec.sigma = Vec::Constant(1, 0.2);
    spec.c0 = 1.0;
    spec.c1 = 0.0;
    spec.discount_rate = 0.0;
    spec.horizon = 1.0;
    spec.n_steps = 40;
    GaussianMixturePolicy p;
    p.weights = {1.0};
    p.mean_const = {Vec::Zero(1)};
    p.mean_lin = {Mat::Zero(1, 1)};
    p.stds = {0.3};
    const double x0 = 0.1;
    ExtendedState start{Vec::Constant(1, x0), 0.0, 0.0};
    ReturnDistribution rd = estimate_return_distribution(spec, p, start, 20000, 93);
    // E x_s^2 = (x0 + mu0 s)^2 + sigma^2 s, exact on the Euler grid for
    // constant drift; left-endpoint sum mirrors accumulate_cost
    double dt = spec.dt(), expected = 0.0;
    for (int i = 0; i < spec.n_steps; ++i) {
      double s = i * dt;
      expected += ((x0 + 0.1 * s) * (x0 + 0.1 * s) + 0.04 * s) * dt;
    }
    return std::abs(rd.mean - expected) / rd.std_error;
  });

  run("gaussian_kl_sampling", 4.0, [] {
    const int M = 2;
    Vec mu_p = Vec::Constant(M, 0.2), mu_q = Vec::Constant(M, -0.3);
    double sp = 0.5, sq = 0.8;
    double analytic = M * std::log(sq / sp) +
                      (M * sp * sp + (mu_p - mu_q).squaredNorm()) / (2.0 * sq * sq) - 0.5 * M;
    auto log_gauss = [&](const Vec& a, const Vec& mu, double s) {
      return -0.5 * M * std::log(kTwoPi * s * s) - 0.5 * (a - mu).squaredNorm() / (s * s);
    };
    const int n = 200000;
    Rng rng(674);
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      Vec a(M);
      for (int j = 0; j < M; ++j) a[j] = mu_p[j] + sp * rng.next_normal();
      double v = log_gauss(a, mu_p, sp) - log_gauss(a, mu_q, sq);
      sum += v;
      sum_sq += v * v;
    }
    double mean = sum / n;
    double se = std::sqrt((sum_sq / n - mean * mean) / n);
    return std::abs(mean - analytic) / se;
  });

  run("evaluator_self_consistency", 4.0, [] {
    Rng rng(675);
    ModelSpec spec = random_spec(rng, 2, 1);
    spec.n_steps = 20;
    GaussianMixturePolicy p = random_policy(rng, 2, 1, 2);
    ExtendedState start{Vec::Constant(2, 0.1), 0.0, 0.0};
    RegularizedCost a = estimate_regularized_cost(spec, p, start, 5000, 11);
    RegularizedCost b = estimate_regularized_cost(spec, p, start, 5000, 22);
    double se = std::sqrt(a.total_se * a.total_se + b.total_se * b.total_se);
    return std::abs(a.total - b.total) / se;
  });

  run("layer_output_variance", 1.0, [] {
    ValueNetwork net = ValueNetwork::initialize(8, {32, 32, 32}, 17);
    const int n = 2000;
    Rng rng(676);
    std::vector<double> sum(3, 0.0), sum_sq(3, 0.0);
    std::vector<long> counts(3, 0);
    for (int i = 0; i < n; ++i) {
      Vec a = Vec::NullaryExpr(10, [&](int) { return rng.next_normal(); });
      for (int l = 0; l < 3; ++l) {
        Vec z = net.layers()[l].W * a + net.layers()[l].b;
        a = z.unaryExpr([](double v) { return std::log1p(std::exp(v)); });
        for (int u = 0; u < a.size(); ++u) {
          sum[l] += a[u];
          sum_sq[l] += a[u] * a[u];
          ++counts[l];
        }
      }
    }
    double worst = 0.0;
    for (int l = 0; l < 3; ++l) {
      double mean = sum[l] / counts[l];
      double var = sum_sq[l] / counts[l] - mean * mean;
      worst = std::max(worst, std::max(var / 10.0, 0.1 / var));
    }
    return worst;
  });

  return out;
}

nlohmann::json verification_report(const std::vector<VerifyCheck>& checks) {
  nlohmann::json report = nlohmann::json::array();
  for (const auto& check : checks) {
    report.push_back({{"check_name", check.check_name},
                      {"max_error", check.max_error},
                      {"tolerance", check.tolerance},
                      {"pass", check.pass}});
  }
  return report;
}

}  // namespace hjopt
