#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fie/scenario.hpp"

using namespace fie;

namespace {

/// Std of N(0,1) truncated to [−m, m], by composite Simpson quadrature.
double truncated_std_factor(double m) {
  const int n = 20000;
  const double h = 2 * m / n;
  auto pdf = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi); };
  double mass = 0, second = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = -m + i * h;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    mass += w * pdf(x);
    second += w * x * x * pdf(x);
  }
  return std::sqrt(second / mass);
}

}  // namespace

TEST_CASE("truncated normal sampling") {
  RandomStream rng(123, 0);
  for (int i = 0; i < 10000; ++i) REQUIRE(std::abs(sample_truncated_normal(rng, 0.1, 0.3)) <= 0.3);

  const double factor = truncated_std_factor(3.0);
  CHECK(factor == doctest::Approx(0.98659).epsilon(1e-4));

  RandomStream big(9, 1);
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = sample_truncated_normal(big, 0.1, 0.3);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double std = std::sqrt(sq / n - mean * mean);
  CHECK(std >= 0.095);
  CHECK(std <= 0.100);
  // Sampling error of the std estimate is ~σ/√(2n) ≈ 2.2e-4.
  CHECK(std::abs(std - 0.1 * factor) < 1e-3);

  RandomStream a(5, 7), b(5, 7);
  CHECK(sample_truncated_normal(a, 0.2, 0.6) == sample_truncated_normal(b, 0.2, 0.6));
  CHECK(sample_truncated_normal(a, 0.0, 0.6) == 0.0);
  CHECK_THROWS_AS(sample_truncated_normal(a, 0.1, 0.0), DomainError);
}

TEST_CASE("generate_scenario is reproducible and order independent") {
  ScenarioConfig config;
  config.instances = 10;
  const auto s3 = generate_scenario(config, 3);
  const auto s0 = generate_scenario(config, 0);
  const auto s3again = generate_scenario(config, 3);
  CHECK(s3.x0 == s3again.x0);
  CHECK(s3.w == s3again.w);
  CHECK(s3.v == s3again.v);
  CHECK(s3.y == s3again.y);
  CHECK(s0.x0 != s3.x0);
  CHECK_THROWS_AS(generate_scenario(config, 10), DomainError);

  ScenarioConfig other = config;
  other.seed = 43;
  CHECK(generate_scenario(other, 3).x0 != s3.x0);
}

TEST_CASE("scenario invariants") {
  ScenarioConfig config;
  config.instances = 50;
  const auto model = example_system<double>().first;
  for (int i = 0; i < config.instances; ++i) {
    const auto sc = generate_scenario(config, i, model);
    REQUIRE(sc.w.cols() == config.horizon);
    REQUIRE(sc.v.cols() == config.horizon + 1);
    CHECK(sc.w.cwiseAbs().maxCoeff() <= config.w_bound());
    CHECK(sc.v.cwiseAbs().maxCoeff() <= config.v_bound());
    const auto traj = simulate(model, sc.x0, sc.w);
    CHECK(traj.states == sc.truth.states);
    CHECK(observe(model, traj, sc.v) == sc.y);
  }
}

TEST_CASE("geometric decay and the noise-free limit") {
  ScenarioConfig config;
  config.decay = DecayMode::Geometric;
  config.decay_rate = 0.5;
  config.instances = 20;
  for (int i = 0; i < config.instances; ++i) {
    const auto sc = generate_scenario(config, i);
    CHECK(std::abs(sc.w(0, 10)) <= std::pow(0.5, 10) * 3 * config.sigma_w);
    for (int k = 0; k <= config.horizon; ++k) {
      REQUIRE(std::abs(sc.v(0, k)) <= std::pow(0.5, k) * 3 * config.sigma_v);
    }
  }

  ScenarioConfig quiet;
  quiet.sigma_w = quiet.sigma_v = 0;
  const auto sc = generate_scenario(quiet, 0);
  for (int k = 0; k <= quiet.horizon; ++k) CHECK(sc.y(0, k) == doctest::Approx(std::pow(sc.truth.states(0, k), 3)).epsilon(1e-15));
}

TEST_CASE("config validation") {
  ScenarioConfig config;
  config.instances = 0;
  CHECK_THROWS_AS(config.validate(), DomainError);
  config = {};
  config.truncation = 0;
  CHECK_THROWS_AS(config.validate(), DomainError);
  config = {};
  config.horizon = -1;
  CHECK_THROWS_AS(config.validate(), DomainError);
}
