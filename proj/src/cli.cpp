#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "fie/bench.hpp"

namespace fie::bench {

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitUncertified = 3;
constexpr int kExitSolverFailures = 4;

void print_summary(std::ostream& out, const RunConfig& config, const MonteCarloResult& result) {
  out << "preset " << config.preset << "  instances " << config.scenario.instances << "  horizon "
      << config.scenario.horizon << "  seed " << config.scenario.seed << '\n';
  out << std::left << std::setw(10) << "estimator" << std::setw(14) << "pooled_std" << std::setw(18)
      << "pooled_mean_abs" << std::setw(12) << "max_abs" << "n_samples\n";
  for (const auto& s : result.summary.estimators) {
    out << std::left << std::setw(10) << s.estimator << std::setw(14) << std::setprecision(6) << s.pooled_std
        << std::setw(18) << s.pooled_mean_abs << std::setw(12) << s.max_abs << s.n_samples << '\n';
  }
  out << "failed instances " << result.failed_instances.size() << "  infeasible solves "
      << result.infeasible_solves << "  sandwich violations " << result.sandwich_violations << '/'
      << result.sandwich_checks << '\n';
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Monte-Carlo benchmark of full-information estimation against an EKF on x+ = 0.9x + w, y = x^3 + v"};

  std::string preset_name = "paper-exp";
  std::optional<double> a2, b2, c2, lambda_w, lambda_v, tau;
  std::optional<int> instances, horizon;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma_w, sigma_v, x0_mean, x0_std, prior, truncation, decay_rate;
  std::string estimators = "fie,ekf";
  std::string output_dir;
  int threads = 0;
  bool allow_uncertified = false;
  int restarts = -1;

  app.add_option("--preset", preset_name, "paper-exp | paper-exp-b2-2 | paper-poly | convergence | long-horizon")
      ->check(CLI::IsMember(preset_names()));
  app.add_option("--a2", a2, "initial-state exponent");
  app.add_option("--b2", b2, "initial-state discount parameter");
  app.add_option("--c2", c2, "initial-state coefficient (default 1/x0_std^2)");
  app.add_option("--lambda-w", lambda_w, "sum/max mixing weight for disturbances")->check(CLI::Range(0.0, 1.0));
  app.add_option("--lambda-v", lambda_v, "sum/max mixing weight for measurement noise")->check(CLI::Range(0.0, 1.0));
  app.add_option("--tau", tau, "log-sum-exp smoothing temperature")->check(CLI::PositiveNumber);
  app.add_option("--instances", instances, "number of Monte-Carlo instances")->check(CLI::PositiveNumber);
  app.add_option("--horizon", horizon, "final time T")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "base seed");
  app.add_option("--sigma-w", sigma_w, "disturbance std")->check(CLI::NonNegativeNumber);
  app.add_option("--sigma-v", sigma_v, "measurement noise std")->check(CLI::NonNegativeNumber);
  app.add_option("--x0-mean", x0_mean, "mean of the true initial state");
  app.add_option("--x0-std", x0_std, "std of the true initial state")->check(CLI::NonNegativeNumber);
  app.add_option("--prior", prior, "prior initial-state estimate");
  app.add_option("--truncation", truncation, "truncation multiple of sigma")->check(CLI::PositiveNumber);
  app.add_option("--decay-rate", decay_rate, "geometric decay of disturbances (1 disables)")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--estimators", estimators, "comma-separated subset of fie,ekf");
  app.add_option("--restarts", restarts, "random restarts per FIE solve")->check(CLI::NonNegativeNumber);
  app.add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out", output_dir, "output directory (env FIE_BENCH_OUT overrides)");
  app.add_flag("--allow-uncertified", allow_uncertified, "run even if the cost fails its RGAS certificate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n' << "run with --help for usage\n";
    return kExitUsage;
  }

  RunConfig config;
  try {
    config = preset(preset_name);
    auto& sc = config.scenario;
    if (instances) sc.instances = *instances;
    if (horizon) sc.horizon = *horizon;
    if (seed) sc.seed = *seed;
    if (sigma_w) sc.sigma_w = *sigma_w;
    if (sigma_v) sc.sigma_v = *sigma_v;
    if (x0_mean) sc.x0_mean = *x0_mean;
    if (x0_std) sc.x0_std = *x0_std;
    if (prior) sc.prior = *prior;
    if (truncation) sc.truncation = *truncation;
    if (decay_rate) {
      sc.decay = *decay_rate < 1 ? DecayMode::Geometric : DecayMode::None;
      sc.decay_rate = *decay_rate;
    }
    refresh_cost_weights(config);
    if (a2) config.cost.a2 = *a2;
    if (b2) config.cost.b2 = *b2;
    if (c2) config.cost.c2 = *c2;
    if (lambda_w) config.cost.lambda_w = *lambda_w;
    if (lambda_v) config.cost.lambda_v = *lambda_v;
    if (tau) config.cost.tau = *tau;
    if (restarts >= 0) config.solver.random_restarts = restarts;
    config.threads = threads;

    config.run_fie = config.run_ekf = false;
    std::stringstream list(estimators);
    for (std::string item; std::getline(list, item, ',');) {
      if (item == "fie") {
        config.run_fie = true;
      } else if (item == "ekf") {
        config.run_ekf = true;
      } else {
        throw DomainError("unknown estimator '" + item + "'");
      }
    }
    config.validate();
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  if (const char* env = std::getenv("FIE_BENCH_OUT"); env && *env) output_dir = env;
  config.output_dir = output_dir;

  if (config.run_fie) {
    const auto verdict = validate_rgas(config.cost, certificate_for(config.cost));
    if (!verdict.pass) {
      err << "cost fails the RGAS certificate (" << to_string(verdict.condition) << "), margin "
          << std::setprecision(6) << verdict.margin << '\n';
      if (!allow_uncertified) {
        err << "refusing to run; pass --allow-uncertified to override\n";
        return kExitUncertified;
      }
    } else {
      out << "certificate " << to_string(verdict.condition) << " passes, margin " << std::setprecision(6)
          << verdict.margin << '\n';
    }
  }

  const auto result = run_monte_carlo(config);
  if (!config.output_dir.empty()) write_outputs(config.output_dir, config, result);
  print_summary(out, config, result);

  if (result.failed_instances.size() * 100 > static_cast<std::size_t>(config.scenario.instances)) {
    err << "solver failures on " << result.failed_instances.size() << " of " << config.scenario.instances
        << " instances\n";
    return kExitSolverFailures;
  }
  return 0;
}

}  // namespace fie::bench
