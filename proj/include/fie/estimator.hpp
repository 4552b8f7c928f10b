#pragma once

// Full-information estimation: at time t, minimize the cost over (χ(0), ω) subject to
// the single-shooting dynamics, the disturbance box and the measurement-noise box.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fie/cost.hpp"
#include "fie/scenario.hpp"

namespace fie {

using Cost = CostSpec<double>;

struct EstimationProblem {
  Model model;
  Mat measurements;  // p × (t+1)
  Vec prior;
  double w_bound = 0.3;
  double v_bound = 0.6;

  int horizon() const { return static_cast<int>(measurements.cols()) - 1; }
  void validate() const;

  /// Problem at time t built from the first t+1 measurements of a scenario.
  static EstimationProblem from_scenario(const Scenario& scenario, const Model& model, int t);
};

struct DecisionVector {
  Vec chi0;
  Mat omega;  // g × t

  Vec flatten() const;
  static DecisionVector unflatten(const Vec& z, int state_dim, int disturbance_dim, int horizon);
};

struct Rollout {
  Mat states;  // n × (t+1)
  Mat nu;      // p × (t+1)
};

/// Augmented-Lagrangian term for −B ≤ ν(k) ≤ B (componentwise). With zero multipliers it
/// is the plain quadratic penalty (ρ/2)·Σ max(0, |ν|−B)².
struct NoiseBoxPenalty {
  double rho = 0;
  Mat multiplier_upper;
  Mat multiplier_lower;

  double value(const Mat& nu, double bound, Mat* grad) const;
  void update_multipliers(const Mat& nu, double bound);
};

struct ObjectiveValue {
  double value = 0;
  Vec gradient;  // ordered as DecisionVector::flatten
};

struct SolverOptions {
  int max_iterations = 200;       // per inner solve
  double gradient_tolerance = 1e-8;
  int random_restarts = 4;
  double restart_std = 2.0;       // std of prior-centered random starts
  double initial_penalty = 0;     // 0 selects 10/B_v²
  double penalty_growth = 10;
  int penalty_stages = 3;
  int max_penalty_stages = 10;    // extra stages are used only while infeasible
  double feasibility_tolerance = 1e-6;
  double refine_tau = 1e-4;       // final smoothing temperature when max terms are present
  bool warm_start = true;
  std::uint64_t seed = 0;
};

struct SolverDiagnostics {
  int iterations = 0;
  double gradient_norm = 0;
  int restarts_used = 0;
  double nu_violation = 0;
  bool feasible = false;
};

struct EstimateResult {
  DecisionVector decision;  // x̂(0|t) and ŵ_t
  Mat states;               // x̂(k|t), k = 0..t
  Mat nu;                   // ν̂_t
  double cost = 0;          // exact V_t at the estimate
  SolverDiagnostics diagnostics;

  Vec current_estimate() const { return states.col(states.cols() - 1); }
};

class SolverFailure : public std::runtime_error {
 public:
  SolverFailure(const std::string& what, SolverDiagnostics diagnostics, int time = -1)
      : std::runtime_error(what), diagnostics_(diagnostics), time_(time) {}

  const SolverDiagnostics& diagnostics() const { return diagnostics_; }
  int time() const { return time_; }

 private:
  SolverDiagnostics diagnostics_;
  int time_;
};

Rollout rollout(const EstimationProblem& problem, const DecisionVector& decision);

/// Smoothed objective (plus the ν-box term when `penalty` is given) and its gradient by
/// reverse accumulation through the shooting recursion.
ObjectiveValue objective_and_gradient(const EstimationProblem& problem, const Cost& cost,
                                      const DecisionVector& decision, const NoiseBoxPenalty* penalty = nullptr);

/// Exact (non-smoothed) cost of a decision, ν taken from the rollout.
double exact_cost(const EstimationProblem& problem, const Cost& cost, const DecisionVector& decision);

EstimateResult solve_fie(const EstimationProblem& problem, const Cost& cost, const SolverOptions& options = {},
                         const std::optional<DecisionVector>& warm_start = std::nullopt);

struct OracleGrid {
  double chi0_lower = 0;
  double chi0_upper = 0;
  int chi0_points = 401;
  int omega_points = 61;

  /// χ(0) ∈ [x̄₀ − 4σ, x̄₀ + 4σ]; ω over the full disturbance box.
  static OracleGrid around_prior(const EstimationProblem& problem, double prior_std);
};

struct OracleResult {
  DecisionVector best;
  double cost = 0;  // +inf when no grid point satisfies the ν box
  bool found = false;
  std::uint64_t evaluated = 0;
};

/// Exhaustive grid search with hard ν-box rejection. Scalar state only, t ≤ 3 and at
/// most 1e7 grid points.
OracleResult brute_force_oracle(const EstimationProblem& problem, const Cost& cost, const OracleGrid& grid);

struct FieSequence {
  std::vector<EstimateResult> results;  // t = 0..T
  Mat errors;                           // e(t|t) = x(t) − x̂(t|t), n × (T+1)
};

FieSequence run_fie_sequence(const Scenario& scenario, const Model& model, const Cost& cost,
                             const SolverOptions& options = {});

}  // namespace fie
