#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fie/estimator.hpp"

namespace fie::bench {

enum class ExperimentMode { Paper, Convergence, LongHorizon };

struct RunConfig {
  std::string preset = "paper-exp";
  ScenarioConfig scenario;
  Cost cost = Cost::quadratic(DiscountFamily::ExpDiscount, 0.81, 1, 1, 0.1, 0.2, 2.0);
  bool run_fie = true;
  bool run_ekf = true;
  std::filesystem::path output_dir;  // empty: nothing written
  ExperimentMode mode = ExperimentMode::Paper;
  int threads = 0;                   // 0: hardware concurrency
  SolverOptions solver;

  void validate() const;
};

/// Named configurations: paper-exp, paper-exp-b2-2, paper-poly, convergence, long-horizon.
/// Throws DomainError for an unknown name.
RunConfig preset(std::string_view name);
std::vector<std::string> preset_names();

/// Rebuilds the quadratic cost after scenario σ's change, keeping family, b₂ and λ's.
void refresh_cost_weights(RunConfig& config);

/// The example system's i-IOSS certificate in the family matching the cost's discount.
IossCertificate<double> certificate_for(const Cost& cost);

struct ErrorRecord {
  int instance = 0;
  int t = 0;
  double x_true = 0;
  double xhat_fie = 0;
  double xhat_ekf = 0;
  double e_fie = 0;
  double e_ekf = 0;
  double cost = 0;
  bool feasible = false;
};

struct PerTimeStats {
  int t = 0;
  int n = 0;
  double mean = 0;
  double std = 0;  // population convention
  double mean_abs = 0;
};

struct EstimatorSummary {
  std::string estimator;
  double pooled_std = 0;           // population (÷N)
  double pooled_std_unbiased = 0;  // ÷(N−1); 0 for a single sample
  double pooled_mean = 0;
  double pooled_mean_abs = 0;
  double max_abs = 0;
  long n_samples = 0;
  int failed_instances = 0;
  std::vector<PerTimeStats> per_t;
  std::vector<std::pair<double, double>> ecdf;  // (|e|, cumulative probability)
};

struct RunSummary {
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& at(std::string_view name) const;
};

/// Pooled statistics of (t, e) samples over every pair, plus per-t statistics and the
/// ECDF of |e|.
EstimatorSummary summarize_errors(std::string name, const std::vector<std::pair<int, double>>& samples);

/// Summaries for the estimators present in the records.
RunSummary summarize(const std::vector<ErrorRecord>& records, bool fie = true, bool ekf = true);

struct MonteCarloResult {
  std::vector<ErrorRecord> records;  // sorted by (instance, t)
  RunSummary summary;
  std::vector<int> failed_instances;
  long infeasible_solves = 0;
  long sandwich_checks = 0;
  long sandwich_violations = 0;  // solves with V_t° > V_t(truth)
};

MonteCarloResult run_monte_carlo(const RunConfig& config);

/// records.csv, summary.json, per_t.csv, ecdf_<estimator>.csv under `dir`.
void write_outputs(const std::filesystem::path& dir, const RunConfig& config, const MonteCarloResult& result);

std::string records_csv(const std::vector<ErrorRecord>& records);
std::string summary_json(const RunConfig& config, const MonteCarloResult& result);

/// Command-line entry point. Exit codes: 0 ok, 2 usage, 3 uncertified cost,
/// 4 solver failures on more than 1% of instances.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fie::bench
