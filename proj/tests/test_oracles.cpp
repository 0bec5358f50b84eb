#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hjopt/hj_loss.hpp"
#include "hjopt/oracles.hpp"
#include "hjopt/verify.hpp"

using namespace hjopt;
using namespace hjopt::testing;

TEST_CASE("partition quadrature of an untilted density is zero") {
  ModelSpec spec = make_spec(1, 2);
  GaussianMixturePolicy p = make_policy(2, 1, 1, 3);
  ValueGradients vg = ValueGradients::zero(1, 2);
  Vec x(1);
  x << 0.5;
  CHECK(std::abs(oracles::partition_quadrature(p, 0, vg, x, spec)) < 1e-10);
}

TEST_CASE("quadrature agrees with the closed-form partition integral") {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    int M = 1 + trial % 2;
    ModelSpec spec = make_spec(1, M);
    spec.c1 = rng.next_uniform(0.5, 5.0);
    spec.inverse_temperature = rng.next_uniform(0.5, 3.0);
    GaussianMixturePolicy p = make_policy(M, 1, 1, 500 + trial);
    Vec x(1);
    x << rng.next_uniform(0.3, 1.2);
    ValueGradients vg = random_gradients(spec, x, rng);
    double quad = oracles::partition_quadrature(p, 0, vg, x, spec);
    double closed = oracles::partition_closed_form(p, 0, vg, x, spec);
    CHECK(std::abs(quad - closed) < 1e-8 * std::max(1.0, std::abs(closed)));
    CHECK(std::abs(quad - component_hamiltonian(p, 0, vg, x, spec)) <
          1e-8 * std::max(1.0, std::abs(quad)));
  }
}

TEST_CASE("quadrature rejects an unsupported action dimension") {
  ModelSpec spec = make_spec(1, 4);
  GaussianMixturePolicy p = make_policy(4, 1, 1, 3);
  ValueGradients vg = ValueGradients::zero(1, 4);
  CHECK_THROWS(oracles::partition_quadrature(p, 0, vg, Vec::Constant(1, 0.5), spec));
}

TEST_CASE("transition density peaks at the Euler mean") {
  ModelSpec spec = make_spec(3, 1);
  Rng rng(7);
  Vec x = random_vec(3, rng);
  Vec a = random_vec(1, rng);
  double dt = 0.025;
  Vec mode = x + drift(spec, x, a) * dt;
  double log_p = oracles::transition_density(spec, x, mode, a, dt);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    expected += -0.5 * std::log(2.0 * M_PI * spec.sigma[i] * spec.sigma[i] * dt);
  CHECK(log_p == doctest::Approx(expected).epsilon(1e-12));
  // any displacement lowers the density
  Vec off = mode;
  off[1] += 0.01;
  CHECK(oracles::transition_density(spec, x, off, a, dt) < log_p);
}

TEST_CASE("one-dimensional transition density integrates to one") {
  ModelSpec spec = make_spec(1, 1);
  Rng rng(9);
  Vec x(1);
  x << 0.2;
  Vec a(1);
  a << 0.4;
  double dt = 0.025;
  double mean = x[0] + drift(spec, x, a)[0] * dt;
  double sd = spec.sigma[0] * std::sqrt(dt);
  // Simpson on a +-10 sd window
  const int n = 20000;
  double lo = mean - 10.0 * sd, hi = mean + 10.0 * sd;
  double h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    double v = std::exp(oracles::transition_density(spec, x, Vec::Constant(1, lo + i * h), a, dt));
    double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    total += w * v;
  }
  total *= h / 3.0;
  CHECK(std::abs(total - 1.0) < 1e-8);
}

TEST_CASE("density log-ratio reproduces the likelihood exponent") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    int N = 1 + static_cast<int>(rng.next_uniform(0.0, 5.0));
    ModelSpec spec = make_spec(N, 2);
    Vec x = random_vec(N, rng);
    Vec x_next = x + random_vec(N, rng, 0.1);
    Vec a_new = random_vec(2, rng);
    Vec a_old = random_vec(2, rng);
    double dt = 0.025;
    double ratio = oracles::transition_density(spec, x, x_next, a_new, dt) -
                   oracles::transition_density(spec, x, x_next, a_old, dt);
    double ds = oracles::delta_S_general(spec, x, x_next, drift(spec, x, a_new),
                                         drift(spec, x, a_old), dt);
    CHECK(std::abs(-ds - ratio) < 1e-10);
  }
}

TEST_CASE("finite differences on a linear function are exact to noise level") {
  Vec w(4);
  w << 1.0, -2.0, 0.5, 3.0;
  auto f = [&](const Vec& v) { return w.dot(v); };
  auto g = [&](const Vec&) { return w; };
  Rng rng(13);
  auto report = oracles::finite_difference_check(f, g, random_vec(4, rng), 1e-5);
  CHECK(report.max_rel_error < 1e-9);
}

TEST_CASE("finite differences on a quadratic form match its analytic gradient") {
  Mat A(3, 3);
  A << 2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 0.8;
  auto f = [&](const Vec& v) { return 0.5 * v.dot(A * v); };
  auto g = [&](const Vec& v) { return Vec(A * v); };
  Rng rng(15);
  auto report = oracles::finite_difference_check(f, g, random_vec(3, rng), 1e-5);
  CHECK(report.max_rel_error < 1e-7);
}

TEST_CASE("finite differences flag a wrong gradient") {
  auto f = [](const Vec& v) { return v.squaredNorm(); };
  auto wrong = [](const Vec& v) { return Vec(3.0 * v); };
  Rng rng(17);
  auto report = oracles::finite_difference_check(f, wrong, random_vec(3, rng), 1e-5);
  CHECK(report.max_rel_error > 0.1);
}

TEST_CASE("quick verification battery passes") {
  auto checks = run_verification("quick");
  CHECK(checks.size() >= 20);
  for (const auto& c : checks) {
    INFO(c.check_name, " error ", c.max_error, " tolerance ", c.tolerance);
    CHECK(c.pass);
  }
  nlohmann::json report = verification_report(checks);
  REQUIRE(report.is_array());
  CHECK(report.size() == checks.size());
  for (const auto& entry : report) {
    CHECK(entry.contains("check_name"));
    CHECK(entry.contains("max_error"));
    CHECK(entry.contains("tolerance"));
    CHECK(entry.contains("pass"));
  }
}
