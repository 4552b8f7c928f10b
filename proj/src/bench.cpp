#include "fie/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fie/ekf.hpp"

namespace fie::bench {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

const char* mode_name(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::Paper: return "paper";
    case ExperimentMode::Convergence: return "convergence";
    case ExperimentMode::LongHorizon: return "long-horizon";
  }
  return "unknown";
}

struct InstanceOutcome {
  std::vector<ErrorRecord> records;
  bool failed = false;
  long infeasible = 0;
  long sandwich_checks = 0;
  long sandwich_violations = 0;
};

InstanceOutcome run_instance(const RunConfig& config, const Model& model, int instance) {
  InstanceOutcome out;
  const Scenario sc = generate_scenario(config.scenario, instance, model);
  const int horizon = sc.horizon();

  FieSequence fie_run;
  if (config.run_fie) {
    SolverOptions options = config.solver;
    options.seed = mix_seed(config.solver.seed ^ config.scenario.seed, static_cast<std::uint64_t>(instance));
    try {
      fie_run = run_fie_sequence(sc, model, config.cost, options);
    } catch (const SolverFailure&) {
      out.failed = true;
      return out;
    }
  }
  Mat ekf_errors;
  if (config.run_ekf) {
    const double sw = std::max(config.scenario.sigma_w, 1e-12);
    const double sv = std::max(config.scenario.sigma_v, 1e-12);
    const Mat Q = Mat::Identity(model.disturbance_dim, model.disturbance_dim) * sw * sw;
    const Mat R = Mat::Identity(model.output_dim, model.output_dim) * sv * sv;
    const Mat P0 = Mat::Identity(model.state_dim, model.state_dim) * config.scenario.x0_std * config.scenario.x0_std;
    const auto init = ekf_init<double>(Vec::Constant(model.state_dim, config.scenario.prior), P0);
    try {
      ekf_errors = run_ekf<double>(sc.truth.states, sc.y, model, init, Q, R);
    } catch (const NumericalError&) {
      out.failed = true;
      return out;
    }
  }

  const bool truth_feasible = (sc.w.size() == 0 || sc.w.cwiseAbs().maxCoeff() <= config.scenario.w_bound()) &&
                              sc.v.cwiseAbs().maxCoeff() <= config.scenario.v_bound();
  for (int t = 0; t <= horizon; ++t) {
    ErrorRecord rec;
    rec.instance = instance;
    rec.t = t;
    rec.x_true = sc.truth.states(0, t);
    rec.xhat_fie = rec.e_fie = rec.cost = kNaN;
    rec.xhat_ekf = rec.e_ekf = kNaN;
    if (config.run_fie) {
      const auto& r = fie_run.results[t];
      rec.xhat_fie = r.states(0, t);
      rec.e_fie = fie_run.errors(0, t);
      rec.cost = r.cost;
      rec.feasible = r.diagnostics.feasible;
      if (!rec.feasible) ++out.infeasible;
      if (rec.feasible && truth_feasible) {
        const auto problem = EstimationProblem::from_scenario(sc, model, t);
        const double at_truth = exact_cost(problem, config.cost, DecisionVector{sc.x0, sc.w.leftCols(t)});
        ++out.sandwich_checks;
        if (r.cost > at_truth + 1e-9 * (1 + std::abs(at_truth))) ++out.sandwich_violations;
      }
    }
    if (config.run_ekf) {
      rec.e_ekf = ekf_errors(0, t);
      rec.xhat_ekf = rec.x_true - rec.e_ekf;
    }
    out.records.push_back(rec);
  }
  return out;
}

}  // namespace

void RunConfig::validate() const {
  detail::require(run_fie || run_ekf, "RunConfig: at least one estimator must be selected");
  scenario.validate();
  cost.validate();
}

RunConfig preset(std::string_view name) {
  RunConfig config;
  config.preset = std::string(name);
  const double sw = config.scenario.sigma_w;
  const double sv = config.scenario.sigma_v;
  const double sx = config.scenario.x0_std;
  if (name == "paper-exp") {
    config.cost = Cost::quadratic(DiscountFamily::ExpDiscount, 0.81, 1, 1, sw, sv, sx);
  } else if (name == "paper-exp-b2-2") {
    config.cost = Cost::quadratic(DiscountFamily::ExpDiscount, 2.0, 1, 1, sw, sv, sx);
  } else if (name == "paper-poly") {
    config.cost = Cost::quadratic(DiscountFamily::PolyDiscount, 0.21, 1, 1, sw, sv, sx);
  } else if (name == "convergence") {
    config.mode = ExperimentMode::Convergence;
    config.scenario.horizon = 40;
    config.scenario.instances = 100;
    config.scenario.decay = DecayMode::Geometric;
    config.scenario.decay_rate = 0.5;
  } else if (name == "long-horizon") {
    config.mode = ExperimentMode::LongHorizon;
    config.scenario.horizon = 60;
    config.scenario.instances = 100;
  } else {
    throw DomainError("unknown preset '" + std::string(name) + "'");
  }
  return config;
}

std::vector<std::string> preset_names() {
  return {"paper-exp", "paper-exp-b2-2", "paper-poly", "convergence", "long-horizon"};
}

void refresh_cost_weights(RunConfig& config) {
  const auto& sc = config.scenario;
  const double sw = std::max(sc.sigma_w, 1e-12);
  const double sv = std::max(sc.sigma_v, 1e-12);
  const double sx = std::max(sc.x0_std, 1e-12);
  config.cost.c2 = 1 / (sx * sx);
  config.cost.stage_w.weight = 1 / (sw * sw);
  config.cost.stage_v.weight = 1 / (sv * sv);
}

IossCertificate<double> certificate_for(const Cost& cost) {
  const auto kind = cost.family == DiscountFamily::ExpDiscount ? ExampleCertificate::Exponential
                                                               : ExampleCertificate::Polynomial;
  return example_system<double>(kind).second;
}

const EstimatorSummary& RunSummary::at(std::string_view name) const {
  for (const auto& s : estimators) {
    if (s.estimator == name) return s;
  }
  throw DomainError("RunSummary: no estimator named '" + std::string(name) + "'");
}

EstimatorSummary summarize_errors(std::string name, const std::vector<std::pair<int, double>>& samples) {
  detail::require(!samples.empty(), "summarize: no samples");
  EstimatorSummary s;
  s.estimator = std::move(name);
  s.n_samples = static_cast<long>(samples.size());

  double sum = 0;
  double sum_abs = 0;
  int max_t = 0;
  for (const auto& [t, e] : samples) {
    sum += e;
    sum_abs += std::abs(e);
    s.max_abs = std::max(s.max_abs, std::abs(e));
    max_t = std::max(max_t, t);
  }
  const double n = static_cast<double>(s.n_samples);
  s.pooled_mean = sum / n;
  s.pooled_mean_abs = sum_abs / n;
  double ss = 0;
  for (const auto& [t, e] : samples) ss += (e - s.pooled_mean) * (e - s.pooled_mean);
  s.pooled_std = std::sqrt(ss / n);
  s.pooled_std_unbiased = s.n_samples > 1 ? std::sqrt(ss / (n - 1)) : 0.0;

  std::vector<std::vector<double>> by_t(max_t + 1);
  for (const auto& [t, e] : samples) by_t[t].push_back(e);
  for (int t = 0; t <= max_t; ++t) {
    const auto& v = by_t[t];
    if (v.empty()) continue;
    PerTimeStats p;
    p.t = t;
    p.n = static_cast<int>(v.size());
    for (double e : v) {
      p.mean += e;
      p.mean_abs += std::abs(e);
    }
    p.mean /= p.n;
    p.mean_abs /= p.n;
    for (double e : v) p.std += (e - p.mean) * (e - p.mean);
    p.std = std::sqrt(p.std / p.n);
    s.per_t.push_back(p);
  }

  std::vector<double> abs_errors;
  abs_errors.reserve(samples.size());
  for (const auto& [t, e] : samples) abs_errors.push_back(std::abs(e));
  std::sort(abs_errors.begin(), abs_errors.end());
  for (std::size_t i = 0; i < abs_errors.size(); ++i) {
    s.ecdf.emplace_back(abs_errors[i], static_cast<double>(i + 1) / n);
  }
  return s;
}

RunSummary summarize(const std::vector<ErrorRecord>& records, bool fie, bool ekf) {
  detail::require(!records.empty(), "summarize: no records");
  RunSummary summary;
  auto collect = [&](double ErrorRecord::*field) {
    std::vector<std::pair<int, double>> samples;
    samples.reserve(records.size());
    for (const auto& r : records) samples.emplace_back(r.t, r.*field);
    return samples;
  };
  if (fie) summary.estimators.push_back(summarize_errors("fie", collect(&ErrorRecord::e_fie)));
  if (ekf) summary.estimators.push_back(summarize_errors("ekf", collect(&ErrorRecord::e_ekf)));
  return summary;
}

MonteCarloResult run_monte_carlo(const RunConfig& config) {
  config.validate();
  const Model model = example_system<double>().first;
  const int count = config.scenario.instances;
  std::vector<InstanceOutcome> outcomes(count);

  int threads = config.threads > 0 ? config.threads : static_cast<int>(std::thread::hardware_concurrency());
  threads = std::clamp(threads, 1, count);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        outcomes[i] = run_instance(config, model, i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);

  MonteCarloResult result;
  for (int i = 0; i < count; ++i) {
    auto& o = outcomes[i];
    if (o.failed) {
      result.failed_instances.push_back(i);
      continue;
    }
    result.infeasible_solves += o.infeasible;
    result.sandwich_checks += o.sandwich_checks;
    result.sandwich_violations += o.sandwich_violations;
    result.records.insert(result.records.end(), o.records.begin(), o.records.end());
  }
  if (!result.records.empty()) {
    result.summary = summarize(result.records, config.run_fie, config.run_ekf);
  }
  for (auto& s : result.summary.estimators) s.failed_instances = static_cast<int>(result.failed_instances.size());
  return result;
}

std::string records_csv(const std::vector<ErrorRecord>& records) {
  std::ostringstream os;
  os << "instance,t,x_true,xhat_fie,xhat_ekf,e_fie,e_ekf,cost,feasible\n";
  for (const auto& r : records) {
    os << r.instance << ',' << r.t << ',' << format_double(r.x_true) << ',' << format_double(r.xhat_fie) << ','
       << format_double(r.xhat_ekf) << ',' << format_double(r.e_fie) << ',' << format_double(r.e_ekf) << ','
       << format_double(r.cost) << ',' << (r.feasible ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string summary_json(const RunConfig& config, const MonteCarloResult& result) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["preset"] = config.preset;
  j["mode"] = mode_name(config.mode);
  const auto& sc = config.scenario;
  j["config"] = {{"instances", sc.instances}, {"horizon", sc.horizon},       {"seed", sc.seed},
                 {"sigma_w", sc.sigma_w},     {"sigma_v", sc.sigma_v},       {"truncation", sc.truncation},
                 {"x0_mean", sc.x0_mean},     {"x0_std", sc.x0_std},         {"prior", sc.prior},
                 {"decay_rate", sc.decay == DecayMode::Geometric ? sc.decay_rate : 1.0}};
  const auto& c = config.cost;
  j["cost"] = {{"family", c.family == DiscountFamily::ExpDiscount ? "exp" : "poly"},
               {"a2", c.a2},
               {"b2", c.b2},
               {"c2", c.c2},
               {"lambda_w", c.lambda_w},
               {"lambda_v", c.lambda_v},
               {"tau", c.tau}};
  ordered_json estimators = ordered_json::array();
  for (const auto& s : result.summary.estimators) {
    estimators.push_back({{"estimator", s.estimator},
                          {"pooled_std", s.pooled_std},
                          {"pooled_mean_abs", s.pooled_mean_abs},
                          {"n_samples", s.n_samples},
                          {"failed_instances", s.failed_instances},
                          {"pooled_std_unbiased", s.pooled_std_unbiased},
                          {"pooled_mean", s.pooled_mean},
                          {"max_abs", s.max_abs}});
  }
  j["estimators"] = estimators;
  j["failed_instances"] = result.failed_instances;
  j["infeasible_solves"] = result.infeasible_solves;
  j["sandwich_checks"] = result.sandwich_checks;
  j["sandwich_violations"] = result.sandwich_violations;
  return j.dump(2) + "\n";
}

void write_outputs(const std::filesystem::path& dir, const RunConfig& config, const MonteCarloResult& result) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / name).string());
    f << content;
  };
  write("records.csv", records_csv(result.records));
  write("summary.json", summary_json(config, result));

  std::ostringstream per_t;
  per_t << "estimator,t,n,mean_e,std_e,mean_abs_e\n";
  for (const auto& s : result.summary.estimators) {
    for (const auto& p : s.per_t) {
      per_t << s.estimator << ',' << p.t << ',' << p.n << ',' << format_double(p.mean) << ','
            << format_double(p.std) << ',' << format_double(p.mean_abs) << '\n';
    }
  }
  write("per_t.csv", per_t.str());

  for (const auto& s : result.summary.estimators) {
    std::ostringstream ecdf;
    ecdf << "abs_error,cum_prob\n";
    for (const auto& [x, p] : s.ecdf) ecdf << format_double(x) << ',' << format_double(p) << '\n';
    write("ecdf_" + s.estimator + ".csv", ecdf.str());
  }
}

}  // namespace fie::bench
