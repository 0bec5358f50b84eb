#include <chrono>
#include <iostream>

#include "hjopt/hj_loss.hpp"
#include "hjopt/simulator.hpp"

using namespace hjopt;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelSpec bench_spec() {
  ModelSpec spec;
  spec.state_dim = 10;
  spec.action_dim = 5;
  spec.mu0_const = Vec::Constant(10, 0.1);
  spec.mu0_lin = 0.2 * Mat::Identity(10, 10);
  spec.mu1_const = 0.1 * Mat::Identity(10, 5);
  spec.mu1_lin = 0.2 * Mat::Identity(10, 5);
  spec.sigma = Vec::Constant(10, 0.1);
  spec.c0 = 1.0;
  spec.c1 = 5.0;
  spec.discount_rate = 0.03;
  spec.inverse_temperature = 1.0;
  spec.horizon = 1.0;
  spec.n_steps = 40;
  return spec;
}

GaussianMixturePolicy bench_policy() {
  GaussianMixturePolicy p;
  Rng rng(12);
  for (int k = 0; k < 2; ++k) {
    p.weights.push_back(0.5);
    p.mean_const.push_back(Vec::NullaryExpr(5, [&](int) { return rng.next_uniform(-0.5, 0.5); }));
    p.mean_lin.push_back(Mat::Zero(5, 10));
    p.stds.push_back(std::sqrt(rng.next_uniform(0.2, 0.4)));
  }
  return p;
}

}  // namespace

int main() {
  ModelSpec spec = bench_spec();
  GaussianMixturePolicy policy = bench_policy();
  StateSampler sampler = uniform_box_sampler(10);
  const int n_traj = 2000;

  auto t0 = std::chrono::steady_clock::now();
  Dataset serial = simulate_dataset(spec, policy, n_traj, 7, sampler, false);
  double t_serial = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  Dataset parallel = simulate_dataset(spec, policy, n_traj, 7, sampler, true);
  double t_parallel = seconds_since(t0);

  double max_diff = 0.0;
  for (int n = 0; n < n_traj; ++n)
    max_diff = std::max(max_diff, (serial.trajectories[n].states -
                                   parallel.trajectories[n].states).cwiseAbs().maxCoeff());
  std::cout << "simulate " << n_traj << " trajectories: serial " << t_serial << " s, parallel "
            << t_parallel << " s, speedup " << t_serial / t_parallel << "x, max state diff "
            << max_diff << "\n";

  ValueNetwork net = ValueNetwork::initialize(10, {64, 64, 64}, 3);
  std::vector<StepSample> steps = collect_steps(spec, serial);
  steps.resize(4096);

  Vec g_serial, g_parallel;
  t0 = std::chrono::steady_clock::now();
  nll_loss_gradient(net, spec, policy, steps, 100.0, g_serial, false);
  double t_gs = seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  nll_loss_gradient(net, spec, policy, steps, 100.0, g_parallel, true);
  double t_gp = seconds_since(t0);

  std::cout << "loss gradient over " << steps.size() << " steps: serial " << t_gs
            << " s, parallel " << t_gp << " s, speedup " << t_gs / t_gp
            << "x, max gradient diff " << (g_serial - g_parallel).cwiseAbs().maxCoeff() << "\n";
  return 0;
}
