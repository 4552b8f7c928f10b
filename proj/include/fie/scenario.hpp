#pragma once

#include <cstdint>
#include <random>

#include "fie/system_model.hpp"

namespace fie {

using Vec = Vector<double>;
using Mat = Matrix<double>;
using Model = SystemModel<double>;

enum class DecayMode { None, Geometric };

/// Monte-Carlo instance parameters. Defaults reproduce the cubic-output example.
struct ScenarioConfig {
  double sigma_w = 0.1;
  double sigma_v = 0.2;
  double truncation = 3.0;  // disturbances are confined to ±truncation·σ
  double x0_mean = 5.0;
  double x0_std = 2.0;
  double prior = 2.0;
  int horizon = 20;
  std::uint64_t seed = 42;
  int instances = 500;
  DecayMode decay = DecayMode::None;
  double decay_rate = 1.0;

  double w_bound() const { return truncation * sigma_w; }
  double v_bound() const { return truncation * sigma_v; }
  void validate() const;
};

struct Scenario {
  int instance = 0;
  Vec x0;
  Mat w;  // g × T
  Mat v;  // p × (T+1)
  Mat y;  // p × (T+1)
  Trajectory<double> truth;
  ScenarioConfig config;

  int horizon() const { return static_cast<int>(w.cols()); }
};

/// Per-instance random stream. Seeded from (base seed, stream index) through a
/// SplitMix64 finalizer, so instances are independent of generation order.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream);

  double normal(double mean, double std);
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// One draw from N(0, σ²) conditioned on |x| ≤ bound, by rejection. σ = 0 yields 0.
double sample_truncated_normal(RandomStream& rng, double sigma, double bound);

/// Deterministic in (config.seed, instance). Draw order: x₀, w(0..T−1), v(0..T).
Scenario generate_scenario(const ScenarioConfig& config, int instance, const Model& model);
Scenario generate_scenario(const ScenarioConfig& config, int instance);

}  // namespace fie
