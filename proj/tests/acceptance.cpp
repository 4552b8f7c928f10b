// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <initializer_list>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fie/bench.hpp"

using namespace fie;
using namespace fie::bench;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

bool within(double x, double lo, double hi) { return x >= lo && x <= hi; }
bool within_rel(double x, double ref, double rel) { return std::abs(x - ref) <= rel * std::abs(ref); }

struct Run {
  RunConfig config;
  MonteCarloResult result;
  const EstimatorSummary& fie() const { return result.summary.at("fie"); }
  const EstimatorSummary& ekf() const { return result.summary.at("ekf"); }
};

long total_sandwich_checks = 0, total_sandwich_violations = 0;

Run run(const std::string& name, RunConfig config) {
  const auto start = std::chrono::steady_clock::now();
  Run r{config, run_monte_carlo(config)};
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  total_sandwich_checks += r.result.sandwich_checks;
  total_sandwich_violations += r.result.sandwich_violations;
  std::printf("  [%s] N=%d T=%d: std %.4f mean|e| %.4f max|e| %.4f failed %zu infeasible %ld (%.0fs)\n", name.c_str(),
              config.scenario.instances, config.scenario.horizon, r.fie().pooled_std, r.fie().pooled_mean_abs,
              r.fie().max_abs, r.result.failed_instances.size(), r.result.infeasible_solves, secs);
  std::fflush(stdout);
  return r;
}

RunConfig with_lambda(const std::string& name, double lambda) {
  RunConfig c = preset(name);
  c.cost.lambda_w = c.cost.lambda_v = lambda;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Cost reference_cost(double b2, double lambda) {
  return Cost::quadratic(DiscountFamily::ExpDiscount, b2, lambda, lambda, 0.1, 0.2, 2.0);
}

void statistical_criteria() {
  const Run exp1 = run("paper-exp λ=1", with_lambda("paper-exp", 1));
  report(1, within(exp1.fie().pooled_std, 0.049, 0.081) && within(exp1.fie().pooled_mean_abs, 0.028, 0.046),
         fmt("pooled std %.4f in [0.049, 0.081], mean|e| %.4f in [0.028, 0.046]", exp1.fie().pooled_std,
             exp1.fie().pooled_mean_abs));

  const Run exp0 = run("paper-exp λ=0", with_lambda("paper-exp", 0));
  report(2, within(exp0.fie().pooled_std, 0.061, 0.101) && within(exp0.fie().pooled_mean_abs, 0.035, 0.058),
         fmt("pooled std %.4f in [0.061, 0.101], mean|e| %.4f in [0.035, 0.058]", exp0.fie().pooled_std,
             exp0.fie().pooled_mean_abs));

  const Run b2_1 = run("paper-exp-b2-2 λ=1", with_lambda("paper-exp-b2-2", 1));
  const Run b2_0 = run("paper-exp-b2-2 λ=0", with_lambda("paper-exp-b2-2", 0));
  const bool c3_l1 = within_rel(b2_1.fie().pooled_std, 0.068, 0.25) && within_rel(b2_1.fie().pooled_mean_abs, 0.038, 0.25);
  const bool c3_l0 = within_rel(b2_0.fie().pooled_std, 0.091, 0.25) && within_rel(b2_0.fie().pooled_mean_abs, 0.057, 0.25);
  const bool c3_order = b2_1.fie().pooled_mean_abs >= exp1.fie().pooled_mean_abs;
  report(3, c3_l1 && c3_l0 && c3_order,
         fmt("λ=1 (%.4f, %.4f) vs (0.068, 0.038) ±25%% [%s]; λ=0 (%.4f, %.4f) vs (0.091, 0.057) ±25%% [%s]; "
             "mean|e| b2=2 %.5f >= b2=0.81 %.5f [%s]",
             b2_1.fie().pooled_std, b2_1.fie().pooled_mean_abs, c3_l1 ? "ok" : "out", b2_0.fie().pooled_std,
             b2_0.fie().pooled_mean_abs, c3_l0 ? "ok" : "out", b2_1.fie().pooled_mean_abs,
             exp1.fie().pooled_mean_abs, c3_order ? "ok" : "violated"));

  const Run poly = run("paper-poly λ=1", with_lambda("paper-poly", 1));
  report(4,
         within_rel(poly.fie().pooled_std, exp1.fie().pooled_std, 0.10) &&
             within_rel(poly.fie().pooled_mean_abs, exp1.fie().pooled_mean_abs, 0.10),
         fmt("poly (%.4f, %.4f) vs exp (%.4f, %.4f) within ±10%%", poly.fie().pooled_std, poly.fie().pooled_mean_abs,
             exp1.fie().pooled_std, exp1.fie().pooled_mean_abs));

  {
    const auto& f = exp1.fie().per_t;
    const auto& e = exp1.ekf().per_t;
    bool early = true;
    double early_ratio = 0, late_ratio = 0;
    int late_n = 0;
    std::string per_t;
    for (std::size_t t = 0; t < f.size(); ++t) {
      const double ratio = e[t].mean_abs / f[t].mean_abs;
      if (t <= 5) {
        early = early && f[t].mean_abs < e[t].mean_abs;
        early_ratio += ratio / 6;
        per_t += fmt(" t%zu:%.3f/%.3f", t, f[t].mean_abs, e[t].mean_abs);
      } else {
        late_ratio += ratio;
        ++late_n;
      }
    }
    late_ratio /= late_n;
    report(5, early && late_ratio < early_ratio,
           fmt("FIE < EKF for t<=5 [%s]%s; mean EKF/FIE ratio t<=5 %.2f, t>=6 %.2f", early ? "ok" : "violated",
               per_t.c_str(), early_ratio, late_ratio));
  }

  {
    RunConfig c = preset("convergence");
    const Run conv = run("convergence", c);
    const double e5 = conv.fie().per_t.at(5).mean_abs, e40 = conv.fie().per_t.at(40).mean_abs;
    const bool decay = e40 <= 0.1 * e5;

    bool noise_free = true;
    std::string nf;
    const auto model = example_system<double>().first;
    for (double x0 : {5.0, -3.0, 1.0, 8.0}) {
      ScenarioConfig quiet;
      quiet.sigma_w = quiet.sigma_v = 0;
      quiet.x0_std = 0;
      quiet.x0_mean = x0;
      quiet.horizon = 40;
      const auto sc = generate_scenario(quiet, 0, model);
      const auto seq = run_fie_sequence(sc, model, reference_cost(0.81, 1));
      const double err = std::abs(seq.errors(0, 40));
      noise_free = noise_free && err <= 1e-4;
      nf += fmt(" x0=%g:%.1e", x0, err);
    }
    report(8, decay && noise_free,
           fmt("mean|e(40)| %.2e <= 0.1 x mean|e(5)| %.2e [%s]; noise-free |e(40)| with prior 2:%s", e40, e5,
               decay ? "ok" : "violated", nf.c_str()));
  }

  {
    const Run longrun = run("long-horizon", preset("long-horizon"));
    double max20 = 0;
    for (const auto& r : exp1.result.records) {
      if (r.instance < longrun.config.scenario.instances) max20 = std::max(max20, std::abs(r.e_fie));
    }
    report(9, longrun.fie().max_abs <= 5 * max20,
           fmt("max|e| over T=60 %.4f <= 5 x T=20 max %.4f (same instances)", longrun.fie().max_abs, max20));
  }
}

void certificate_criterion() {
  const auto exp_cert = example_system<double>(ExampleCertificate::Exponential).second;
  const auto poly_cert = example_system<double>(ExampleCertificate::Polynomial).second;
  const auto c081 = check_exp_condition(1.0, 0.9, 2.0, 0.81);
  const auto c080 = check_exp_condition(1.0, 0.9, 2.0, 0.80);
  const double b1 = -std::log(0.9);
  const auto c021 = check_poly_condition(1.0, b1, 2.0, 0.21);
  const auto c025 = check_poly_condition(1.0, b1, 2.0, 0.25);
  const auto v081 = validate_rgas(Cost::quadratic(DiscountFamily::ExpDiscount, 0.81, 1, 1, 0.1, 0.2, 2), exp_cert);
  const auto v080 = validate_rgas(Cost::quadratic(DiscountFamily::ExpDiscount, 0.80, 1, 1, 0.1, 0.2, 2), exp_cert);
  const auto v021 = validate_rgas(Cost::quadratic(DiscountFamily::PolyDiscount, 0.21, 1, 1, 0.1, 0.2, 2), poly_cert);
  const auto v025 = validate_rgas(Cost::quadratic(DiscountFamily::PolyDiscount, 0.25, 1, 1, 0.1, 0.2, 2), poly_cert);
  const bool pass = c081.pass && !c080.pass && c021.pass && !c025.pass && v081.pass && !v080.pass && v021.pass &&
                    !v025.pass;
  report(6, pass,
         fmt("exp b2=0.81 %s (margin %.3g), b2=0.80 %s (margin %.3g); poly b2=0.21 %s (margin %.3g), b2=0.25 %s "
             "(margin %.3g); cost validation agrees [%s]",
             c081.pass ? "pass" : "fail", c081.margin, c080.pass ? "pass" : "fail", c080.margin,
             c021.pass ? "pass" : "fail", c021.margin, c025.pass ? "pass" : "fail", c025.margin,
             (v081.pass && !v080.pass && v021.pass && !v025.pass) ? "ok" : "mismatch"));
}

void solver_criterion() {
  const auto model = example_system<double>().first;
  ScenarioConfig config;
  config.seed = 7;
  config.instances = 2000;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);

  // Gradient check at 100 random points against central differences.
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto sc = generate_scenario(config, i, model);
    const int t = i % 21;
    const double lambda = (i % 3 == 0) ? 1.0 : (i % 3 == 1 ? 0.0 : 0.5);
    Cost cost = Cost::quadratic(i % 2 ? DiscountFamily::PolyDiscount : DiscountFamily::ExpDiscount,
                                i % 2 ? 0.21 : 0.81, lambda, lambda, 0.1, 0.2, 2.0);
    auto p = EstimationProblem::from_scenario(sc, model, t);
    DecisionVector d{Vec::Constant(1, sc.x0(0) + 0.05 * u(rng)), Mat(1, t)};
    for (int k = 0; k < t; ++k) d.omega(0, k) = p.w_bound * u(rng);
    NoiseBoxPenalty penalty;
    penalty.rho = 10 / (p.v_bound * p.v_bound);
    penalty.multiplier_upper = Mat::Constant(1, t + 1, 0.1 * (i % 4));
    penalty.multiplier_lower = Mat::Constant(1, t + 1, 0.05 * (i % 4));
    const auto ov = objective_and_gradient(p, cost, d, &penalty);
    const Vec z = d.flatten();
    Vec fd(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(z(j)));
      Vec zp = z, zm = z;
      zp(j) += h;
      zm(j) -= h;
      const double fp = objective_and_gradient(p, cost, DecisionVector::unflatten(zp, 1, 1, t), &penalty).value;
      const double fm = objective_and_gradient(p, cost, DecisionVector::unflatten(zm, 1, 1, t), &penalty).value;
      fd(j) = (fp - fm) / (2 * h);
    }
    worst = std::max(worst, (ov.gradient - fd).norm() / std::max(1.0, fd.norm()));
  }
  const bool gradient_ok = worst <= 1e-5;

  // Oracle dominance at t <= 2 on 50 instances.
  double worst_gap = -std::numeric_limits<double>::infinity();
  int compared = 0;
  for (int i = 0; i < 50; ++i) {
    const auto sc = generate_scenario(config, 1000 + i, model);
    for (int t = 0; t <= 2; ++t) {
      const auto p = EstimationProblem::from_scenario(sc, model, t);
      const auto cost = reference_cost(0.81, 1);
      const auto r = solve_fie(p, cost);
      OracleGrid grid = OracleGrid::around_prior(p, 2.0);
      const auto coarse = brute_force_oracle(p, cost, grid);
      const double centre = std::cbrt(p.measurements(0, 0));
      grid.chi0_lower = centre - 0.02;
      grid.chi0_upper = centre + 0.02;
      const auto fine = brute_force_oracle(p, cost, grid);
      for (const auto* o : {&coarse, &fine}) {
        if (!o->found) continue;
        ++compared;
        worst_gap = std::max(worst_gap, r.cost - o->cost);
      }
    }
  }
  const bool oracle_ok = worst_gap <= 1e-3 && compared >= 150;

  if (total_sandwich_checks == 0) run("paper-exp sandwich", [] {
    RunConfig c = preset("paper-exp");
    c.scenario.instances = 50;
    return c;
  }());
  const bool sandwich_ok = total_sandwich_violations == 0 && total_sandwich_checks > 0;
  report(7, gradient_ok && oracle_ok && sandwich_ok,
         fmt("worst gradient rel. error %.2e <= 1e-5; worst solver-minus-grid cost %.2e <= 1e-3 over %d grid optima; "
             "sandwich violations %ld of %ld feasible solves",
             worst, worst_gap, compared, total_sandwich_violations, total_sandwich_checks));
}

void determinism_criterion() {
  RunConfig config = preset("paper-exp");
  config.scenario.instances = 24;
  config.scenario.horizon = 20;
  const fs::path base = fs::temp_directory_path() / "fie_acceptance_determinism";
  fs::remove_all(base);
  bool same = true;
  std::vector<std::string> files;
  for (int threads : {1, 4}) {
    config.threads = threads;
    write_outputs(base / std::to_string(threads), config, run_monte_carlo(config));
  }
  for (const auto& entry : fs::directory_iterator(base / "1")) {
    const auto name = entry.path().filename();
    files.push_back(name.string());
    same = same && fs::exists(base / "4" / name) && slurp(entry.path()) == slurp(base / "4" / name);
  }
  same = same && files.size() == 5;
  std::sort(files.begin(), files.end());
  std::string list;
  for (const auto& f : files) list += " " + f;
  report(10, same, fmt("threads 1 vs 4, paper-exp N=24 T=20, byte-identical:%s", list.c_str()));
}

void guarded(std::initializer_list<int> ids, void (*body)()) {
  try {
    body();
  } catch (const std::exception& e) {
    for (int id : ids) report(id, false, std::string("threw: ") + e.what());
  }
}

}  // namespace

// Optional arguments select criteria by number; default runs all ten.
int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wants = [&](std::initializer_list<int> ids) {
    if (selected.empty()) return true;
    for (int id : ids) {
      if (selected.count(id)) return true;
    }
    return false;
  };
  const auto start = std::chrono::steady_clock::now();
  if (wants({6})) guarded({6}, certificate_criterion);
  if (wants({1, 2, 3, 4, 5, 8, 9})) guarded({1, 2, 3, 4, 5, 8, 9}, statistical_criteria);
  if (wants({7})) guarded({7}, solver_criterion);
  if (wants({10})) guarded({10}, determinism_criterion);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d criteria failed (%.0fs)\n", failures, secs);
  return failures == 0 ? 0 : 1;
}
