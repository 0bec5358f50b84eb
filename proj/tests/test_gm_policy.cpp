#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hjopt/gm_policy.hpp"
#include "hjopt/oracles.hpp"

using namespace hjopt;
using namespace hjopt::testing;

TEST_CASE("mean action of a symmetric two-component mixture is zero") {
  GaussianMixturePolicy p;
  p.weights = {0.5, 0.5};
  Vec u(2);
  u << 0.3, -0.7;
  p.mean_const = {u, -u};
  p.mean_lin = {Mat::Zero(2, 3), Mat::Zero(2, 3)};
  p.stds = {0.4, 0.4};
  CHECK(mean_action(p, Vec::Zero(3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mean action of a single component is its mean map") {
  GaussianMixturePolicy p = make_policy(3, 2, 1, 9);
  Rng rng(1);
  p.mean_lin[0] = Mat::NullaryExpr(3, 2, [&](int, int) { return rng.next_uniform(-1.0, 1.0); });
  Vec x = random_vec(2, rng);
  CHECK((mean_action(p, x) - p.component_mean(0, x)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mean action matches a sampling estimate") {
  GaussianMixturePolicy p = make_policy(2, 2, 3, 31);
  Vec x = Vec::Zero(2);
  Rng rng(77);
  const int n = 200000;
  Vec acc = Vec::Zero(2);
  for (int i = 0; i < n; ++i) acc += sample_action(p, x, rng);
  Vec mc = acc / n;
  double se = std::sqrt(expected_squared_norm(p, x) / n);
  CHECK((mc - mean_action(p, x)).norm() < 4.0 * se + 1e-12);
}

TEST_CASE("near-degenerate single Gaussian samples its mean") {
  GaussianMixturePolicy p = make_policy(3, 2, 1, 4);
  p.stds[0] = 1e-12;
  Rng rng(2);
  Vec x = random_vec(2, rng);
  Vec a = sample_action(p, x, rng);
  CHECK((a - p.component_mean(0, x)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sampling is deterministic under a fixed seed") {
  GaussianMixturePolicy p = make_policy(2, 2, 2, 8);
  Vec x = Vec::Constant(2, 0.1);
  Rng a(123), b(123);
  for (int i = 0; i < 20; ++i)
    CHECK((sample_action(p, x, a) - sample_action(p, x, b)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("empirical component frequencies follow the weights") {
  GaussianMixturePolicy p;
  p.weights = {0.2, 0.8};
  p.mean_const = {Vec::Constant(1, -10.0), Vec::Constant(1, 10.0)};
  p.mean_lin = {Mat::Zero(1, 1), Mat::Zero(1, 1)};
  p.stds = {0.1, 0.1};
  Rng rng(5);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i)
    if (sample_action(p, Vec::Zero(1), rng)[0] > 0.0) ++hits;
  double freq = static_cast<double>(hits) / n;
  double se = std::sqrt(0.2 * 0.8 / n);
  CHECK(std::abs(freq - 0.8) < 4.0 * se);
}

TEST_CASE("log density at the mode of a single Gaussian") {
  GaussianMixturePolicy p = make_policy(4, 2, 1, 6);
  Rng rng(3);
  Vec x = random_vec(2, rng);
  double expected = -2.0 * std::log(2.0 * M_PI * p.stds[0] * p.stds[0]);  // M = 4
  CHECK(log_density(p, x, p.component_mean(0, x)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("equal-weight mixture density averages the component densities") {
  GaussianMixturePolicy p = make_policy(2, 1, 2, 13);
  p.weights = {0.5, 0.5};
  GaussianMixturePolicy c1 = p, c2 = p;
  c1.weights = {1.0};
  c1.mean_const = {p.mean_const[0]};
  c1.mean_lin = {p.mean_lin[0]};
  c1.stds = {p.stds[0]};
  c2.weights = {1.0};
  c2.mean_const = {p.mean_const[1]};
  c2.mean_lin = {p.mean_lin[1]};
  c2.stds = {p.stds[1]};
  Rng rng(9);
  Vec x = random_vec(1, rng);
  for (int trial = 0; trial < 20; ++trial) {
    Vec a = random_vec(2, rng, 2.0);
    double avg = 0.5 * std::exp(log_density(c1, x, a)) + 0.5 * std::exp(log_density(c2, x, a));
    CHECK(log_density(p, x, a) == doctest::Approx(std::log(avg)).epsilon(1e-10));
  }
}

TEST_CASE("expected squared norm closed forms") {
  GaussianMixturePolicy p;
  p.weights = {1.0};
  p.mean_const = {Vec::Zero(5)};
  p.mean_lin = {Mat::Zero(5, 1)};
  p.stds = {1.0};
  CHECK(expected_squared_norm(p, Vec::Zero(1)) == doctest::Approx(5.0));

  Vec u = Vec::Constant(5, std::sqrt(0.05));  // |u|^2 = 0.25
  p.mean_const = {u};
  p.stds = {0.2};  // sigma^2 = 0.04, M sigma^2 = 0.2
  CHECK(expected_squared_norm(p, Vec::Zero(1)) == doctest::Approx(0.45));
}

TEST_CASE("expected squared norm matches sampling") {
  GaussianMixturePolicy p = make_policy(2, 2, 3, 44);
  Vec x = Vec::Constant(2, 0.3);
  Rng rng(12);
  const int n = 200000;
  double acc = 0.0, acc2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = sample_action(p, x, rng).squaredNorm();
    acc += s;
    acc2 += s * s;
  }
  double mean = acc / n;
  double se = std::sqrt((acc2 / n - mean * mean) / n);
  CHECK(std::abs(mean - expected_squared_norm(p, x)) < 4.0 * se);
}

TEST_CASE("component Hamiltonian vanishes at zero value gradients") {
  ModelSpec spec = make_spec(2, 2);
  GaussianMixturePolicy p = make_policy(2, 2, 3, 7);
  ValueGradients vg = ValueGradients::zero(2, 2);
  Rng rng(1);
  Vec x = random_vec(2, rng);
  for (int k = 0; k < 3; ++k) CHECK(component_hamiltonian(p, k, vg, x, spec) == 0.0);
}

TEST_CASE("component Hamiltonian matches per-component quadrature") {
  Rng rng(55);
  for (int trial = 0; trial < 25; ++trial) {
    ModelSpec spec = make_spec(1, 1);
    spec.c1 = rng.next_uniform(0.5, 5.0);
    spec.inverse_temperature = rng.next_uniform(0.5, 2.0);
    GaussianMixturePolicy p = make_policy(1, 1, 1, 100 + trial);
    Vec x(1);
    x << rng.next_uniform(0.3, 1.2);
    ValueGradients vg = random_gradients(spec, x, rng);
    double closed = component_hamiltonian(p, 0, vg, x, spec);
    double quad = oracles::partition_quadrature(p, 0, vg, x, spec);
    CHECK(std::abs(closed - quad) < 1e-8 * std::max(1.0, std::abs(closed)));
  }
}

TEST_CASE("posterior equals prior at zero value gradients") {
  ModelSpec spec = make_spec(3, 2);
  GaussianMixturePolicy p = make_policy(2, 3, 3, 19);
  ValueGradients vg = ValueGradients::zero(3, 2);
  Rng rng(6);
  Vec x = random_vec(3, rng);
  for (double beta : {1e-6, 0.5, 1.0, 5.0, 100.0}) {
    spec.inverse_temperature = beta;
    PosteriorPolicy post = posterior_policy(p, vg, x, spec);
    for (int k = 0; k < 3; ++k) {
      CHECK(post.weights[k] == doctest::Approx(p.weights[k]).epsilon(1e-13));
      CHECK((post.means[k] - p.component_mean(k, x)).cwiseAbs().maxCoeff() < 1e-13);
      CHECK(post.cov_scalars[k] == doctest::Approx(p.stds[k] * p.stds[k]).epsilon(1e-13));
    }
  }
}

TEST_CASE("posterior weights stay on the simplex") {
  ModelSpec spec = make_spec(2, 2);
  GaussianMixturePolicy p = make_policy(2, 2, 4, 23);
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x = random_vec(2, rng);
    ValueGradients vg = random_gradients(spec, x, rng, 2.0);
    PosteriorPolicy post = posterior_policy(p, vg, x, spec);
    double sum = 0.0;
    for (double w : post.weights) {
      CHECK(w >= 0.0);
      CHECK(w <= 1.0 + 1e-12);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("posterior covariances shrink when the cost curvature is positive") {
  ModelSpec spec = make_spec(2, 2);
  GaussianMixturePolicy p = make_policy(2, 2, 3, 29);
  Rng rng(14);
  Vec x = Vec::Constant(2, 0.8);
  ValueGradients vg = random_gradients(spec, x, rng);
  vg.grad_C = 0.7;  // J_C > 0
  PosteriorPolicy post = posterior_policy(p, vg, x, spec);
  for (int k = 0; k < 3; ++k) CHECK(post.cov_scalars[k] < p.stds[k] * p.stds[k]);
}

TEST_CASE("posterior weights are invariant to a constant Hamiltonian shift") {
  // Shifting every H_k by a constant factors out of the softmax; emulate the
  // shift by scaling all component weights equally before normalization.
  ModelSpec spec = make_spec(2, 1);
  GaussianMixturePolicy p = make_policy(1, 2, 3, 41);
  Rng rng(4);
  Vec x = random_vec(2, rng);
  ValueGradients vg = random_gradients(spec, x, rng, 5.0);
  spec.inverse_temperature = 50.0;  // beta H_k spreads over large magnitudes
  PosteriorPolicy post = posterior_policy(p, vg, x, spec);
  double sum = 0.0;
  for (double w : post.weights) {
    CHECK(std::isfinite(w));
    sum += w;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);

  // Direct shift invariance on the softmax built from component Hamiltonians.
  std::vector<double> h(3);
  for (int k = 0; k < 3; ++k) h[k] = component_hamiltonian(p, k, vg, x, spec);
  auto softmax = [&](double shift) {
    double hmax = -1e300;
    for (int k = 0; k < 3; ++k)
      hmax = std::max(hmax, -spec.inverse_temperature * (h[k] + shift));
    double z = 0.0;
    std::vector<double> w(3);
    for (int k = 0; k < 3; ++k) {
      w[k] = p.weights[k] * std::exp(-spec.inverse_temperature * (h[k] + shift) - hmax);
      z += w[k];
    }
    for (auto& v : w) v /= z;
    return w;
  };
  auto w0 = softmax(0.0);
  auto w1 = softmax(17.5);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(w0[k] - w1[k]) < 1e-12);
    CHECK(std::abs(post.weights[k] - w0[k]) < 1e-12);
  }
}

TEST_CASE("high-beta posterior approaches the zero-temperature action") {
  ModelSpec spec = make_spec(1, 1);
  spec.inverse_temperature = 1e6;
  GaussianMixturePolicy p = make_policy(1, 1, 2, 61);
  Vec x(1);
  x << 0.9;
  ValueGradients vg;
  vg.J = 0.2;
  vg.grad_x = Vec::Constant(1, 0.5);
  vg.grad_C = 1.0;
  vg.projected = spec.mu1_at(x).transpose() * vg.grad_x;
  Vec zt = zero_temperature_action(vg, x, spec);
  PosteriorPolicy post = posterior_policy(p, vg, x, spec);
  for (int k = 0; k < 2; ++k) {
    CHECK((post.means[k] - zt).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(post.cov_scalars[k] < 1e-5);
  }
}

TEST_CASE("posterior mean action identities") {
  ModelSpec spec = make_spec(2, 2);
  GaussianMixturePolicy p = make_policy(2, 2, 3, 71);
  Rng rng(10);
  Vec x = random_vec(2, rng);

  ValueGradients zero_vg = ValueGradients::zero(2, 2);
  CHECK((expected_action_optimal(p, zero_vg, x, spec) - mean_action(p, x))
            .cwiseAbs()
            .maxCoeff() < 1e-13);

  ValueGradients vg = random_gradients(spec, x, rng);
  PosteriorPolicy post = posterior_policy(p, vg, x, spec);
  Vec direct = Vec::Zero(2);
  for (int k = 0; k < 3; ++k) direct += post.weights[k] * post.means[k];
  CHECK((expected_action_optimal(p, vg, x, spec) - direct).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((post.mean_action() - direct).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("posterior mean matches sampling") {
  ModelSpec spec = make_spec(2, 2);
  GaussianMixturePolicy p = make_policy(2, 2, 2, 83);
  Rng rng(15);
  Vec x = Vec::Constant(2, 0.4);
  ValueGradients vg = random_gradients(spec, x, rng);
  PosteriorPolicy post = posterior_policy(p, vg, x, spec);
  const int n = 200000;
  Rng sampler(91);
  Vec acc = Vec::Zero(2);
  for (int i = 0; i < n; ++i) acc += post.sample(sampler);
  Vec mc = acc / n;
  double se = std::sqrt(post.expected_squared_norm() / n);
  CHECK((mc - post.mean_action()).norm() < 4.0 * se + 1e-12);
}

TEST_CASE("expected action sum and difference") {
  ModelSpec spec = make_spec(2, 1);
  GaussianMixturePolicy p = make_policy(1, 2, 2, 97);
  Rng rng(20);
  Vec x = random_vec(2, rng);

  ValueGradients zero_vg = ValueGradients::zero(2, 1);
  auto [plus0, minus0] = expected_action_sum_diff(p, zero_vg, x, spec);
  CHECK(minus0.cwiseAbs().maxCoeff() < 1e-13);
  CHECK((plus0 - 2.0 * mean_action(p, x)).cwiseAbs().maxCoeff() < 1e-13);

  ValueGradients vg = random_gradients(spec, x, rng);
  auto [plus, minus] = expected_action_sum_diff(p, vg, x, spec);
  Vec avg = 0.5 * (plus + minus);
  CHECK((avg - expected_action_optimal(p, vg, x, spec)).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("zero temperature action") {
  ModelSpec spec = make_spec(1, 1);
  spec.c1 = 2.0;
  Vec x(1);
  x << 1.0;  // c1(x) = 2
  ValueGradients vg;
  vg.J = 0.0;
  vg.grad_x = Vec::Zero(1);
  vg.grad_C = 1.0;
  vg.projected = Vec::Constant(1, 4.0);  // m = 4
  CHECK(zero_temperature_action(vg, x, spec)[0] == doctest::Approx(-2.0));

  vg.projected = Vec::Zero(1);
  CHECK(zero_temperature_action(vg, x, spec).cwiseAbs().maxCoeff() == 0.0);

  ModelSpec nocost = spec;
  nocost.c1 = 0.0;
  vg.projected = Vec::Constant(1, 1.0);
  CHECK_THROWS_AS(zero_temperature_action(vg, x, nocost), DegenerateCost);
  vg.grad_C = 0.0;
  CHECK_THROWS_AS(zero_temperature_action(vg, x, spec), DegenerateCost);
}

TEST_CASE("zero temperature action agrees with the large-beta posterior mean") {
  ModelSpec spec = make_spec(1, 1);
  spec.inverse_temperature = 1e8;
  GaussianMixturePolicy p = make_policy(1, 1, 1, 103);
  Vec x(1);
  x << 0.7;
  Rng rng(30);
  ValueGradients vg = random_gradients(spec, x, rng);
  vg.grad_C = 1.0;
  PosteriorPolicy post = posterior_policy(p, vg, x, spec);
  Vec zt = zero_temperature_action(vg, x, spec);
  CHECK((post.means[0] - zt).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("extreme negative curvature raises CurvatureCollapse") {
  ModelSpec spec = make_spec(1, 1);
  GaussianMixturePolicy p = make_policy(1, 1, 1, 111);
  p.stds[0] = 1.0;
  Vec x(1);
  x << 1.0;
  ValueGradients vg = ValueGradients::zero(1, 1);
  vg.grad_C = -1.0;  // 1 + beta sigma^2 c1 J_C = 1 - 5 < floor
  CHECK_THROWS_AS(posterior_policy(p, vg, x, spec), CurvatureCollapse);
  CHECK_THROWS_AS(component_hamiltonian(p, 0, vg, x, spec), CurvatureCollapse);
}

TEST_CASE("policy validation enforces the invariants") {
  GaussianMixturePolicy good = make_policy(2, 2, 2, 1);
  CHECK_NOTHROW(good.validate());

  GaussianMixturePolicy bad = good;
  bad.weights[0] += 0.1;
  CHECK_THROWS(bad.validate());

  bad = good;
  bad.stds[1] = 0.0;
  CHECK_THROWS(bad.validate());

  bad = good;
  bad.weights = {1.5, -0.5};
  CHECK_THROWS(bad.validate());
}
