#include "fie/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "fie/projected_bfgs.hpp"

namespace fie {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double box_violation(const Mat& nu, double bound) {
  if (nu.size() == 0) return 0;
  return std::max(0.0, nu.cwiseAbs().maxCoeff() - bound);
}

struct Candidate {
  DecisionVector decision;
  double cost = kInf;
  double violation = kInf;
  int iterations = 0;
  double gradient_norm = 0;
};

bool better(const Candidate& a, const Candidate& b, double tolerance) {
  const bool fa = a.violation <= tolerance;
  const bool fb = b.violation <= tolerance;
  if (fa != fb) return fa;
  if (fa) return a.cost < b.cost;
  return a.violation < b.violation;
}

}  // namespace

void EstimationProblem::validate() const {
  detail::require(measurements.cols() >= 1, "EstimationProblem: at least one measurement required");
  detail::require(measurements.rows() == model.output_dim, "EstimationProblem: measurement dimension mismatch");
  detail::require(prior.size() == model.state_dim, "EstimationProblem: prior dimension mismatch");
  detail::require(w_bound > 0 && v_bound > 0, "EstimationProblem: box bounds must be positive");
}

EstimationProblem EstimationProblem::from_scenario(const Scenario& scenario, const Model& model, int t) {
  detail::require(t >= 0 && t <= scenario.horizon(), "EstimationProblem: time outside the scenario horizon");
  EstimationProblem problem;
  problem.model = model;
  problem.measurements = scenario.y.leftCols(t + 1);
  problem.prior = Vec::Constant(model.state_dim, scenario.config.prior);
  // A zero-noise scenario still needs a nonempty box for the solver.
  problem.w_bound = std::max(scenario.config.w_bound(), 1e-12);
  problem.v_bound = std::max(scenario.config.v_bound(), 1e-12);
  return problem;
}

Vec DecisionVector::flatten() const {
  Vec z(chi0.size() + omega.size());
  z.head(chi0.size()) = chi0;
  z.tail(omega.size()) = omega.reshaped();
  return z;
}

DecisionVector DecisionVector::unflatten(const Vec& z, int state_dim, int disturbance_dim, int horizon) {
  detail::require(z.size() == state_dim + disturbance_dim * horizon, "DecisionVector: flat size mismatch");
  DecisionVector d;
  d.chi0 = z.head(state_dim);
  d.omega = z.tail(disturbance_dim * horizon).reshaped(disturbance_dim, horizon);
  return d;
}

Rollout rollout(const EstimationProblem& problem, const DecisionVector& decision) {
  const auto& model = problem.model;
  const int t = problem.horizon();
  detail::require(decision.chi0.size() == model.state_dim, "rollout: chi0 dimension mismatch");
  detail::require(decision.omega.cols() == t && (t == 0 || decision.omega.rows() == model.disturbance_dim),
                  "rollout: omega must be g × t");
  Rollout out;
  out.states.resize(model.state_dim, t + 1);
  out.nu.resize(model.output_dim, t + 1);
  out.states.col(0) = decision.chi0;
  for (int k = 0; k <= t; ++k) {
    if (k > 0) out.states.col(k) = model.transition(out.states.col(k - 1), decision.omega.col(k - 1));
    out.nu.col(k) = problem.measurements.col(k) - model.output(out.states.col(k));
  }
  return out;
}

double NoiseBoxPenalty::value(const Mat& nu, double bound, Mat* grad) const {
  if (rho <= 0) {
    if (grad) grad->setZero(nu.rows(), nu.cols());
    return 0;
  }
  const bool has_mult = multiplier_upper.size() == nu.size();
  double total = 0;
  if (grad) grad->resize(nu.rows(), nu.cols());
  for (Eigen::Index j = 0; j < nu.cols(); ++j) {
    for (Eigen::Index i = 0; i < nu.rows(); ++i) {
      const double mu_up = has_mult ? multiplier_upper(i, j) : 0.0;
      const double mu_lo = has_mult ? multiplier_lower(i, j) : 0.0;
      const double up = std::max(0.0, mu_up + rho * (nu(i, j) - bound));
      const double lo = std::max(0.0, mu_lo + rho * (-nu(i, j) - bound));
      total += (up * up - mu_up * mu_up + lo * lo - mu_lo * mu_lo) / (2 * rho);
      if (grad) (*grad)(i, j) = up - lo;
    }
  }
  return total;
}

void NoiseBoxPenalty::update_multipliers(const Mat& nu, double bound) {
  if (multiplier_upper.size() != nu.size()) {
    multiplier_upper.setZero(nu.rows(), nu.cols());
    multiplier_lower.setZero(nu.rows(), nu.cols());
  }
  for (Eigen::Index j = 0; j < nu.cols(); ++j) {
    for (Eigen::Index i = 0; i < nu.rows(); ++i) {
      multiplier_upper(i, j) = std::max(0.0, multiplier_upper(i, j) + rho * (nu(i, j) - bound));
      multiplier_lower(i, j) = std::max(0.0, multiplier_lower(i, j) + rho * (-nu(i, j) - bound));
    }
  }
}

ObjectiveValue objective_and_gradient(const EstimationProblem& problem, const Cost& cost,
                                      const DecisionVector& decision, const NoiseBoxPenalty* penalty) {
  const auto& model = problem.model;
  if (!model.differentiable()) throw UnsupportedModelError("objective_and_gradient: model has no Jacobian hooks");
  const int t = problem.horizon();
  const int n = model.state_dim;
  const int g = model.disturbance_dim;

  const Rollout path = rollout(problem, decision);
  CostGradient<double> cg;
  ObjectiveValue out;
  out.value = evaluate_smoothed_cost(cost, decision.chi0, problem.prior, decision.omega, path.nu, t, &cg);

  Mat d_nu = cg.nu;
  if (penalty) {
    Mat pg;
    out.value += penalty->value(path.nu, problem.v_bound, &pg);
    d_nu += pg;
  }

  // Adjoint recursion: λ_k = ∂J/∂χ(k) = −H_xᵀ ∂J/∂ν(k) + F_xᵀ λ_{k+1}.
  out.gradient.resize(n + g * t);
  Vec adjoint = -model.output_jacobian(path.states.col(t)).transpose() * d_nu.col(t);
  for (int k = t - 1; k >= 0; --k) {
    const Vec x = path.states.col(k);
    const Vec w = decision.omega.col(k);
    out.gradient.segment(n + g * k, g) =
        cg.omega.col(k) + model.transition_jacobian_disturbance(x, w).transpose() * adjoint;
    adjoint = model.transition_jacobian_state(x, w).transpose() * adjoint -
              model.output_jacobian(x).transpose() * d_nu.col(k);
  }
  out.gradient.head(n) = cg.chi0 + adjoint;
  return out;
}

double exact_cost(const EstimationProblem& problem, const Cost& cost, const DecisionVector& decision) {
  const Rollout path = rollout(problem, decision);
  return evaluate_cost(cost, decision.chi0, problem.prior, decision.omega, path.nu, problem.horizon()).total;
}

namespace {

/// One start: τ continuation (when max terms are present) around an augmented
/// Lagrangian loop on the ν box.
Candidate solve_from(const EstimationProblem& problem, const Cost& cost, const SolverOptions& options,
                     DecisionVector start) {
  const int n = problem.model.state_dim;
  const int g = problem.model.disturbance_dim;
  const int t = problem.horizon();

  Vec lower = Vec::Constant(n + g * t, -kInf);
  Vec upper = Vec::Constant(n + g * t, kInf);
  lower.tail(g * t).setConstant(-problem.w_bound);
  upper.tail(g * t).setConstant(problem.w_bound);

  std::vector<double> taus{cost.tau};
  if (cost.has_max_terms()) {
    taus = {cost.tau * 10, cost.tau};
    if (options.refine_tau < cost.tau) taus.push_back(options.refine_tau);
  }

  QuasiNewtonOptions qn;
  qn.max_iterations = options.max_iterations;
  qn.gradient_tolerance = options.gradient_tolerance;

  Candidate cand;
  Vec z = start.flatten();
  const double rho0 = options.initial_penalty > 0 ? options.initial_penalty
                                                  : 10.0 / (problem.v_bound * problem.v_bound);
  // A growing discount (b₂ > 1) makes the initial-state term dominate by orders of
  // magnitude; the solver works on the objective divided by that weight.
  const double scale = 1.0 / std::max(1.0, cost.c2 * cost.discount(t));
  for (double tau : taus) {
    Cost stage_cost = cost;
    stage_cost.tau = tau;
    NoiseBoxPenalty penalty;
    penalty.rho = rho0 / scale;
    double previous_violation = kInf;
    for (int stage = 0; stage < options.max_penalty_stages; ++stage) {
      auto fg = [&](const Vec& x, Vec& grad) {
        const auto dv = DecisionVector::unflatten(x, n, g, t);
        auto ov = objective_and_gradient(problem, stage_cost, dv, &penalty);
        grad = scale * ov.gradient;
        return scale * ov.value;
      };
      const auto res = minimize_box<double>(fg, z, lower, upper, qn);
      if (!std::isfinite(res.value)) return cand;
      z = res.x;
      cand.iterations += res.iterations;
      cand.gradient_norm = res.projected_gradient;

      const Rollout path = rollout(problem, DecisionVector::unflatten(z, n, g, t));
      const double violation = box_violation(path.nu, problem.v_bound);
      const bool ramp_done = stage + 1 >= options.penalty_stages;
      if (violation <= 1e-10 || (ramp_done && violation <= 0.01 * options.feasibility_tolerance)) break;
      penalty.update_multipliers(path.nu, problem.v_bound);
      if (violation > 0.25 * previous_violation || stage + 1 < options.penalty_stages) {
        penalty.rho *= options.penalty_growth;
      }
      previous_violation = violation;
    }
  }
  cand.decision = DecisionVector::unflatten(z, n, g, t);
  const Rollout path = rollout(problem, cand.decision);
  cand.violation = box_violation(path.nu, problem.v_bound);
  cand.cost = evaluate_cost(cost, cand.decision.chi0, problem.prior, cand.decision.omega, path.nu, t).total;
  if (!std::isfinite(cand.cost)) cand.violation = kInf;
  return cand;
}

}  // namespace

EstimateResult solve_fie(const EstimationProblem& problem, const Cost& cost, const SolverOptions& options,
                         const std::optional<DecisionVector>& warm_start) {
  problem.validate();
  cost.validate();
  const int n = problem.model.state_dim;
  const int g = problem.model.disturbance_dim;
  const int t = problem.horizon();

  std::vector<DecisionVector> starts;
  starts.push_back({problem.prior, Mat::Zero(g, t)});
  if (warm_start) {
    detail::require(warm_start->chi0.size() == n, "solve_fie: warm start dimension mismatch");
    DecisionVector w{warm_start->chi0, Mat::Zero(g, t)};
    const auto keep = std::min<Eigen::Index>(t, warm_start->omega.cols());
    if (keep > 0) w.omega.leftCols(keep) = warm_start->omega.leftCols(keep);
    starts.push_back(std::move(w));
  }
  RandomStream rng(options.seed, static_cast<std::uint64_t>(t));
  for (int r = 0; r < options.random_restarts; ++r) {
    Vec chi0(n);
    for (int i = 0; i < n; ++i) chi0(i) = rng.normal(problem.prior(i), options.restart_std);
    starts.push_back({chi0, Mat::Zero(g, t)});
  }

  Candidate best;
  SolverDiagnostics diag;
  for (const auto& start : starts) {
    Candidate cand = solve_from(problem, cost, options, start);
    diag.iterations += cand.iterations;
    ++diag.restarts_used;
    if (std::isfinite(cand.cost) && better(cand, best, options.feasibility_tolerance)) best = std::move(cand);
  }
  if (!std::isfinite(best.cost)) {
    throw SolverFailure("solve_fie: every start produced a non-finite objective", diag, t);
  }

  EstimateResult result;
  result.decision = best.decision;
  const Rollout path = rollout(problem, best.decision);
  result.states = path.states;
  result.nu = path.nu;
  result.cost = best.cost;
  diag.gradient_norm = best.gradient_norm;
  diag.nu_violation = best.violation;
  diag.feasible = best.violation <= options.feasibility_tolerance;
  result.diagnostics = diag;
  return result;
}

OracleGrid OracleGrid::around_prior(const EstimationProblem& problem, double prior_std) {
  detail::require(problem.prior.size() == 1, "OracleGrid: scalar state only");
  OracleGrid grid;
  grid.chi0_lower = problem.prior(0) - 4 * prior_std;
  grid.chi0_upper = problem.prior(0) + 4 * prior_std;
  return grid;
}

OracleResult brute_force_oracle(const EstimationProblem& problem, const Cost& cost, const OracleGrid& grid) {
  problem.validate();
  const auto& model = problem.model;
  const int t = problem.horizon();
  detail::require(model.state_dim == 1 && model.disturbance_dim == 1, "brute_force_oracle: scalar state only");
  detail::require(t <= 3, "brute_force_oracle: horizon must be at most 3");
  detail::require(grid.chi0_points >= 1 && grid.omega_points >= 1, "brute_force_oracle: empty grid");
  double total = grid.chi0_points;
  for (int k = 0; k < t; ++k) total *= grid.omega_points;
  detail::require(total <= 1e7, "brute_force_oracle: grid exceeds 1e7 points");

  auto node = [](double lo, double hi, int points, int i) {
    return points == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (points - 1);
  };

  OracleResult out;
  out.cost = kInf;
  out.best.chi0 = Vec::Zero(1);
  out.best.omega = Mat::Zero(1, t);
  Vec chi0(1);
  Mat omega(1, t);
  Mat nu(1, t + 1);
  Vec x(1);
  Vec w(1);

  // Depth-first over ω with the ν box checked as soon as each state is known.
  std::function<void(int, const Vec&)> descend = [&](int k, const Vec& state) {
    nu.col(k) = problem.measurements.col(k) - model.output(state);
    if (std::abs(nu(0, k)) > problem.v_bound) return;
    if (k == t) {
      ++out.evaluated;
      const double c = evaluate_cost(cost, chi0, problem.prior, omega, nu, t).total;
      if (c < out.cost) {
        out.cost = c;
        out.best.chi0 = chi0;
        out.best.omega = omega;
        out.found = true;
      }
      return;
    }
    for (int j = 0; j < grid.omega_points; ++j) {
      w(0) = node(-problem.w_bound, problem.w_bound, grid.omega_points, j);
      omega(0, k) = w(0);
      descend(k + 1, model.transition(state, w));
    }
  };
  for (int i = 0; i < grid.chi0_points; ++i) {
    chi0(0) = node(grid.chi0_lower, grid.chi0_upper, grid.chi0_points, i);
    descend(0, chi0);
  }
  return out;
}

FieSequence run_fie_sequence(const Scenario& scenario, const Model& model, const Cost& cost,
                             const SolverOptions& options) {
  const int horizon = scenario.horizon();
  FieSequence seq;
  seq.results.reserve(horizon + 1);
  seq.errors.resize(model.state_dim, horizon + 1);
  std::optional<DecisionVector> warm;
  for (int t = 0; t <= horizon; ++t) {
    const auto problem = EstimationProblem::from_scenario(scenario, model, t);
    try {
      seq.results.push_back(solve_fie(problem, cost, options, options.warm_start ? warm : std::nullopt));
    } catch (const SolverFailure& e) {
      throw SolverFailure(e.what(), e.diagnostics(), t);
    }
    const auto& result = seq.results.back();
    seq.errors.col(t) = scenario.truth.states.col(t) - result.current_estimate();
    warm = result.decision;
  }
  return seq;
}

}  // namespace fie
