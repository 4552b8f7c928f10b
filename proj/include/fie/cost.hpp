#pragma once

// RGAS-certified full-information cost functions
//
//   V_t = c₂‖χ(0)−x̄₀‖^a₂·δ(t)
//       + 1/(t+1)·(λ_w Σ l_w(ω(i)) + λ_v Σ l_v(ν(i)))
//       + (1−λ_w)·max_i l_w(ω(i)) + (1−λ_v)·max_i l_v(ν(i))
//
// with δ(t) = (t+1)^(−b₂) (polynomial discount) or b₂ᵗ (exponential discount),
// ω over I_{0:t−1} and ν over I_{0:t}. The smoothed variant replaces each max by a
// log-sum-exp at temperature τ.

#include <algorithm>
#include <cmath>
#include <type_traits>
#include <limits>

#include "fie/comparison_functions.hpp"
#include "fie/system_model.hpp"

namespace fie {

enum class DiscountFamily { PolyDiscount, ExpDiscount };

/// Stage penalty l(x) = weight·‖x‖^exponent.
template <typename Scalar>
struct StagePenalty {
  Scalar weight = 1;
  Scalar exponent = 2;

  Scalar operator()(const Vector<Scalar>& x) const {
    if (exponent == 2) return weight * x.squaredNorm();
    return weight * std::pow(x.norm(), exponent);
  }

  Vector<Scalar> gradient(const Vector<Scalar>& x) const {
    if (exponent == 2) return 2 * weight * x;
    const Scalar r = x.norm();
    if (r == 0) return Vector<Scalar>::Zero(x.size());
    return weight * exponent * std::pow(r, exponent - 2) * x;
  }
};

template <typename Scalar>
struct CostSpec {
  DiscountFamily family = DiscountFamily::ExpDiscount;
  Scalar a2 = 2;
  Scalar b2 = Scalar(0.81);
  Scalar c2 = Scalar(0.25);
  Scalar lambda_w = 1;
  Scalar lambda_v = 1;
  StagePenalty<Scalar> stage_w{100, 2};
  StagePenalty<Scalar> stage_v{25, 2};
  Scalar tau = Scalar(1e-3);

  /// Quadratic stages weighted by 1/σ² and c₂ = 1/σ²_{x₀}.
  static CostSpec quadratic(DiscountFamily family, Scalar b2, Scalar lambda_w, Scalar lambda_v, Scalar sigma_w,
                            Scalar sigma_v, Scalar sigma_x0) {
    CostSpec spec;
    spec.family = family;
    spec.b2 = b2;
    spec.c2 = 1 / (sigma_x0 * sigma_x0);
    spec.lambda_w = lambda_w;
    spec.lambda_v = lambda_v;
    spec.stage_w = {1 / (sigma_w * sigma_w), 2};
    spec.stage_v = {1 / (sigma_v * sigma_v), 2};
    spec.validate();
    return spec;
  }

  bool has_max_terms() const { return lambda_w < 1 || lambda_v < 1; }

  Scalar discount(int t) const {
    if (family == DiscountFamily::PolyDiscount) return std::pow(Scalar(t + 1), -b2);
    return std::pow(b2, Scalar(t));
  }

  void validate() const {
    detail::require(a2 > 0 && b2 > 0 && c2 > 0, "CostSpec: a2, b2, c2 must be positive");
    detail::require(lambda_w >= 0 && lambda_w <= 1 && lambda_v >= 0 && lambda_v <= 1,
                    "CostSpec: mixing weights must lie in [0,1]");
    detail::require(tau > 0, "CostSpec: smoothing temperature must be positive");
    detail::require(stage_w.weight > 0 && stage_v.weight > 0 && stage_w.exponent > 0 && stage_v.exponent > 0,
                    "CostSpec: stage penalties must be positive");
  }
};

template <typename Scalar>
struct CostBreakdown {
  Scalar total = 0;
  Scalar initial = 0;
  Scalar averaged_sum = 0;
  Scalar max_w = 0;
  Scalar max_v = 0;
};

/// Partial derivatives of the smoothed cost with respect to its raw arguments.
template <typename Scalar>
struct CostGradient {
  Vector<Scalar> chi0;
  Matrix<Scalar> omega;
  Matrix<Scalar> nu;
};

namespace detail {

template <typename Scalar>
void check_cost_arguments(const Vector<Scalar>& chi0, const Vector<Scalar>& prior, const Matrix<Scalar>& omega,
                          const Matrix<Scalar>& nu, int t) {
  require(t >= 0, "cost: horizon must be nonnegative");
  require(chi0.size() == prior.size(), "cost: chi0 and prior dimensions differ");
  require(omega.cols() == t, "cost: omega must have length t");
  require(nu.cols() == t + 1, "cost: nu must have length t+1");
}

/// τ·log Σ exp(xᵢ/τ), evaluated around the max; fills softmax weights when asked.
template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& values, Scalar tau, Vector<Scalar>* weights) {
  if (values.size() == 0) {
    if (weights) weights->resize(0);
    return 0;
  }
  const Scalar peak = values.maxCoeff();
  const Vector<Scalar> e = ((values.array() - peak) / tau).exp().matrix();
  const Scalar sum = e.sum();
  if (weights) *weights = e / sum;
  return peak + tau * std::log(sum);
}

template <typename Scalar>
Vector<Scalar> stage_values(const StagePenalty<Scalar>& stage, const Matrix<Scalar>& seq) {
  Vector<Scalar> out(seq.cols());
  for (Eigen::Index i = 0; i < seq.cols(); ++i) out(i) = stage(Vector<Scalar>(seq.col(i)));
  return out;
}

template <typename Scalar>
Scalar initial_term(const CostSpec<Scalar>& spec, const Vector<Scalar>& delta, int t) {
  const Scalar r = delta.norm();
  const Scalar base = spec.a2 == 2 ? delta.squaredNorm() : (r == 0 ? Scalar(0) : std::pow(r, spec.a2));
  return spec.c2 * base * spec.discount(t);
}

}  // namespace detail

/// Exact (non-smoothed) cost. ‖·‖ max terms use the sup over the sequence.
template <typename Scalar>
CostBreakdown<Scalar> evaluate_cost(const CostSpec<Scalar>& spec, const std::type_identity_t<Vector<Scalar>>& chi0,
                                    const std::type_identity_t<Vector<Scalar>>& prior, const std::type_identity_t<Matrix<Scalar>>& omega,
                                    const std::type_identity_t<Matrix<Scalar>>& nu, int t) {
  detail::check_cost_arguments(chi0, prior, omega, nu, t);
  const Vector<Scalar> lw = detail::stage_values(spec.stage_w, omega);
  const Vector<Scalar> lv = detail::stage_values(spec.stage_v, nu);

  CostBreakdown<Scalar> out;
  out.initial = detail::initial_term(spec, Vector<Scalar>(chi0 - prior), t);
  out.averaged_sum = (spec.lambda_w * lw.sum() + spec.lambda_v * lv.sum()) / Scalar(t + 1);
  out.max_w = lw.size() > 0 ? (1 - spec.lambda_w) * lw.maxCoeff() : Scalar(0);
  out.max_v = (1 - spec.lambda_v) * lv.maxCoeff();
  out.total = out.initial + out.averaged_sum + out.max_w + out.max_v;
  return out;
}

/// Smoothed cost; max ≤ smoothed ≤ max + τ·ln(count) for each max term. Optionally
/// returns the gradient with respect to χ(0), ω and ν.
template <typename Scalar>
Scalar evaluate_smoothed_cost(const CostSpec<Scalar>& spec, const std::type_identity_t<Vector<Scalar>>& chi0,
                              const std::type_identity_t<Vector<Scalar>>& prior, const std::type_identity_t<Matrix<Scalar>>& omega,
                              const std::type_identity_t<Matrix<Scalar>>& nu, int t, CostGradient<Scalar>* grad = nullptr) {
  detail::check_cost_arguments(chi0, prior, omega, nu, t);
  const Vector<Scalar> delta = chi0 - prior;
  const Vector<Scalar> lw = detail::stage_values(spec.stage_w, omega);
  const Vector<Scalar> lv = detail::stage_values(spec.stage_v, nu);
  const Scalar inv_len = Scalar(1) / Scalar(t + 1);
  const Scalar mix_w = 1 - spec.lambda_w;
  const Scalar mix_v = 1 - spec.lambda_v;

  Vector<Scalar> soft_w;
  Vector<Scalar> soft_v;
  Scalar value = detail::initial_term(spec, delta, t) + (spec.lambda_w * lw.sum() + spec.lambda_v * lv.sum()) * inv_len;
  if (mix_w > 0) value += mix_w * detail::log_sum_exp(lw, spec.tau, grad ? &soft_w : nullptr);
  if (mix_v > 0) value += mix_v * detail::log_sum_exp(lv, spec.tau, grad ? &soft_v : nullptr);

  if (grad) {
    const Scalar r = delta.norm();
    if (spec.a2 == 2) {
      grad->chi0 = 2 * spec.c2 * spec.discount(t) * delta;
    } else if (r == 0) {
      grad->chi0 = Vector<Scalar>::Zero(delta.size());
    } else {
      grad->chi0 = spec.c2 * spec.a2 * std::pow(r, spec.a2 - 2) * spec.discount(t) * delta;
    }
    grad->omega.resize(omega.rows(), omega.cols());
    for (Eigen::Index i = 0; i < omega.cols(); ++i) {
      Scalar coeff = spec.lambda_w * inv_len;
      if (mix_w > 0) coeff += mix_w * soft_w(i);
      grad->omega.col(i) = coeff * spec.stage_w.gradient(Vector<Scalar>(omega.col(i)));
    }
    grad->nu.resize(nu.rows(), nu.cols());
    for (Eigen::Index i = 0; i < nu.cols(); ++i) {
      Scalar coeff = spec.lambda_v * inv_len;
      if (mix_v > 0) coeff += mix_v * soft_v(i);
      grad->nu.col(i) = coeff * spec.stage_v.gradient(Vector<Scalar>(nu.col(i)));
    }
  }
  return value;
}

/// Checks the cost's initial-state discount against the system's i-IOSS bound.
/// Same-family pairings use the closed-form exponent conditions; mixed pairings go
/// through the general sensitivity condition with π = identity.
template <typename Scalar>
CertificateVerdict<Scalar> validate_rgas(const CostSpec<Scalar>& spec, const IossCertificate<Scalar>& cert) {
  spec.validate();
  const Scalar a1 = cert.beta.k.exponent();
  const Scalar b1 = cert.beta.l.rate();
  const bool system_exp = cert.beta.l.family() == LFamily::ExpDecay;
  const bool cost_exp = spec.family == DiscountFamily::ExpDiscount;

  if (!system_exp && !cost_exp) return check_poly_condition(a1, b1, spec.a2, spec.b2);
  if (system_exp && cost_exp) return check_exp_condition(a1, b1, spec.a2, spec.b2);

  if (cost_exp && !(spec.b2 < 1)) {
    throw UnsupportedFamilyError("validate_rgas: exponential discount with b2 >= 1 against a polynomial i-IOSS bound");
  }
  const LFunc<Scalar> phi2 = cost_exp ? LFunc<Scalar>::exp(spec.b2) : LFunc<Scalar>::poly(spec.b2);
  return check_sensitivity_condition(cert.beta.k, KFunc<Scalar>(spec.c2, spec.a2), cert.beta.l, phi2,
                                     KFunc<Scalar>::identity());
}

}  // namespace fie
