#include "fie/scenario.hpp"

#include <cmath>

namespace fie {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void ScenarioConfig::validate() const {
  detail::require(sigma_w >= 0 && sigma_v >= 0, "ScenarioConfig: noise std-devs must be nonnegative");
  detail::require(truncation > 0, "ScenarioConfig: truncation multiple must be positive");
  detail::require(x0_std >= 0, "ScenarioConfig: initial-state std must be nonnegative");
  detail::require(horizon >= 0, "ScenarioConfig: horizon must be nonnegative");
  detail::require(instances >= 1, "ScenarioConfig: at least one instance required");
  detail::require(decay == DecayMode::None || (decay_rate > 0 && decay_rate <= 1),
                  "ScenarioConfig: geometric decay rate must lie in (0,1]");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ stream);
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

double RandomStream::normal(double mean, double std) {
  if (std == 0) return mean;
  return std::normal_distribution<double>(mean, std)(engine_);
}

double sample_truncated_normal(RandomStream& rng, double sigma, double bound) {
  detail::require(sigma >= 0, "sample_truncated_normal: sigma must be nonnegative");
  if (sigma == 0) return 0.0;
  detail::require(bound > 0, "sample_truncated_normal: bound must be positive");
  std::normal_distribution<double> dist(0.0, sigma);
  for (;;) {
    const double x = dist(rng.engine());
    if (std::abs(x) <= bound) return x;
  }
}

Scenario generate_scenario(const ScenarioConfig& config, int instance, const Model& model) {
  config.validate();
  detail::require(instance >= 0 && instance < config.instances, "generate_scenario: instance out of range");
  RandomStream rng(config.seed, static_cast<std::uint64_t>(instance));

  Scenario sc;
  sc.instance = instance;
  sc.config = config;
  sc.x0.resize(model.state_dim);
  for (int i = 0; i < model.state_dim; ++i) sc.x0(i) = rng.normal(config.x0_mean, config.x0_std);

  const int horizon = config.horizon;
  sc.w.resize(model.disturbance_dim, horizon);
  sc.v.resize(model.output_dim, horizon + 1);
  for (int k = 0; k < horizon; ++k) {
    for (int i = 0; i < model.disturbance_dim; ++i) {
      sc.w(i, k) = sample_truncated_normal(rng, config.sigma_w, config.w_bound());
    }
  }
  for (int k = 0; k <= horizon; ++k) {
    for (int i = 0; i < model.output_dim; ++i) {
      sc.v(i, k) = sample_truncated_normal(rng, config.sigma_v, config.v_bound());
    }
  }
  if (config.decay == DecayMode::Geometric) {
    double scale = 1.0;
    for (int k = 0; k <= horizon; ++k) {
      if (k < horizon) sc.w.col(k) *= scale;
      sc.v.col(k) *= scale;
      scale *= config.decay_rate;
    }
  }

  sc.truth = simulate(model, sc.x0, sc.w);
  sc.y = observe(model, sc.truth, sc.v);
  return sc;
}

Scenario generate_scenario(const ScenarioConfig& config, int instance) {
  static const Model model = example_system<double>().first;
  return generate_scenario(config, instance, model);
}

}  // namespace fie
