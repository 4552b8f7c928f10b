#pragma once

// Parametric comparison functions (class K, L, KL and separable K·L) and the
// certificate conditions that tie a cost function's initial-state discount to
// the system's incremental stability bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "fie/errors.hpp"

namespace fie {

/// K∞ function s ↦ c·s^a with c, a > 0.
template <typename Scalar>
class KFunc {
 public:
  KFunc(Scalar coefficient, Scalar exponent) : coefficient_(coefficient), exponent_(exponent) {
    detail::require(coefficient > 0 && exponent > 0, "KFunc: coefficient and exponent must be positive");
  }

  static KFunc identity() { return KFunc(1, 1); }

  Scalar coefficient() const { return coefficient_; }
  Scalar exponent() const { return exponent_; }

  Scalar operator()(Scalar s) const {
    detail::require(s >= 0, "KFunc: argument must be nonnegative");
    if (s == 0) return 0;
    return coefficient_ * std::pow(s, exponent_);
  }

 private:
  Scalar coefficient_;
  Scalar exponent_;
};

template <typename Scalar>
Scalar eval_k(const KFunc<Scalar>& f, Scalar s) {
  return f(s);
}

/// Inverse of c·s^a, which is (s/c)^(1/a) = c^(-1/a)·s^(1/a).
template <typename Scalar>
KFunc<Scalar> invert_k(const KFunc<Scalar>& f) {
  const Scalar inv_exponent = Scalar(1) / f.exponent();
  return KFunc<Scalar>(std::pow(f.coefficient(), -inv_exponent), inv_exponent);
}

/// f(Σ aᵢ) ≤ Σ f(n·aᵢ) for any K function f and n = values.size().
template <typename Scalar>
bool check_weak_triangle(const KFunc<Scalar>& f, std::span<const Scalar> values) {
  detail::require(!values.empty(), "check_weak_triangle: values must be nonempty");
  const auto n = static_cast<Scalar>(values.size());
  Scalar sum = 0;
  Scalar rhs = 0;
  for (Scalar a : values) {
    detail::require(a >= 0, "check_weak_triangle: values must be nonnegative");
    sum += a;
    rhs += f(n * a);
  }
  return f(sum) <= rhs;
}

enum class LFamily { PolyDecay, ExpDecay };

/// L function: (t+1)^(-b) with b > 0, or b^t with 0 < b < 1.
template <typename Scalar>
class LFunc {
 public:
  LFunc(LFamily family, Scalar rate) : family_(family), rate_(rate) {
    if (family == LFamily::PolyDecay) {
      detail::require(rate > 0, "LFunc: polynomial decay rate must be positive");
    } else {
      detail::require(rate > 0 && rate < 1, "LFunc: exponential decay base must lie in (0,1)");
    }
  }

  static LFunc poly(Scalar b) { return LFunc(LFamily::PolyDecay, b); }
  static LFunc exp(Scalar b) { return LFunc(LFamily::ExpDecay, b); }

  LFamily family() const { return family_; }
  Scalar rate() const { return rate_; }

  Scalar operator()(Scalar t) const {
    detail::require(t >= 0, "LFunc: time must be nonnegative");
    if (family_ == LFamily::PolyDecay) return std::pow(t + 1, -rate_);
    return std::pow(rate_, t);
  }

 private:
  LFamily family_;
  Scalar rate_;
};

/// Separable KL function β(s,t) = k(s)·l(t).
template <typename Scalar>
struct KLFunc {
  KFunc<Scalar> k;
  LFunc<Scalar> l;

  Scalar operator()(Scalar s, Scalar t) const { return k(s) * l(t); }
};

/// Every representable KL function is already a K·L product, so the bound is the input.
template <typename Scalar>
KLFunc<Scalar> factorize_kl_bound(const KLFunc<Scalar>& beta) {
  return beta;
}

enum class ConditionId { PolyRatio, ExpRoot, GeneralSensitivity };

template <typename Scalar>
struct CertificateVerdict {
  bool pass = false;
  Scalar margin = 0;  // signed slack of the decisive inequality
  ConditionId condition = ConditionId::GeneralSensitivity;

  static CertificateVerdict from_margin(Scalar margin, ConditionId id) { return {margin >= 0, margin, id}; }
};

inline const char* to_string(ConditionId id) {
  switch (id) {
    case ConditionId::PolyRatio: return "poly-ratio";
    case ConditionId::ExpRoot: return "exp-root";
    case ConditionId::GeneralSensitivity: return "general-sensitivity";
  }
  return "unknown";
}

/// Polynomial discount condition a2/b2 ≥ a1/b1.
template <typename Scalar>
CertificateVerdict<Scalar> check_poly_condition(Scalar a1, Scalar b1, Scalar a2, Scalar b2) {
  detail::require(a1 > 0 && b1 > 0 && a2 > 0 && b2 > 0, "check_poly_condition: arguments must be positive");
  return CertificateVerdict<Scalar>::from_margin(a2 / b2 - a1 / b1, ConditionId::PolyRatio);
}

/// Exponential discount condition b2^(1/a2) ≥ b1^(1/a1). b2 ≥ 1 is admissible.
template <typename Scalar>
CertificateVerdict<Scalar> check_exp_condition(Scalar a1, Scalar b1, Scalar a2, Scalar b2) {
  detail::require(b1 > 0 && b1 < 1, "check_exp_condition: b1 must lie in (0,1)");
  detail::require(a1 > 0 && a2 > 0 && b2 > 0, "check_exp_condition: a1, a2, b2 must be positive");
  const Scalar lhs = a2 == 1 ? b2 : std::pow(b2, Scalar(1) / a2);
  const Scalar rhs = a1 == 1 ? b1 : std::pow(b1, Scalar(1) / a1);
  return CertificateVerdict<Scalar>::from_margin(lhs - rhs, ConditionId::ExpRoot);
}

template <typename Scalar>
struct SensitivityGrid {
  std::vector<Scalar> s;
  std::vector<Scalar> t;

  /// s ∈ logspace(1e-3, 1e3, 50), t ∈ {0, …, 200}.
  static SensitivityGrid standard() {
    SensitivityGrid grid;
    constexpr int kPoints = 50;
    for (int i = 0; i < kPoints; ++i) {
      grid.s.push_back(std::pow(Scalar(10), Scalar(-3) + Scalar(6) * i / (kPoints - 1)));
    }
    for (int k = 0; k <= 200; ++k) grid.t.push_back(static_cast<Scalar>(k));
    return grid;
  }
};

/// g(s,t) = μ₁(4·μ₂⁻¹(π(s)/φ₂(t)))·φ₁(t).
template <typename Scalar>
Scalar sensitivity_term(const KFunc<Scalar>& mu1, const KFunc<Scalar>& mu2, const LFunc<Scalar>& phi1,
                        const LFunc<Scalar>& phi2, const KFunc<Scalar>& pi, Scalar s, Scalar t) {
  return mu1(4 * invert_k(mu2)(pi(s) / phi2(t))) * phi1(t);
}

/// Decides whether sup_t g(s,t) is bounded by a K function π'(s).
///
/// For Power μ's the time dependence of g factors out as φ₂(t)^(-a₁/a₂)·φ₁(t), whose
/// supremum has a closed form for every pairing of the two decay families. The closed
/// form is decisive; the grid evaluation must stay below the resulting envelope
/// π'(s) = 4^a₁·c₁·(π(s)/c₂)^(a₁/a₂)·sup_t[φ₂^(-a₁/a₂)φ₁] or the verdict is a failure.
///
/// Margins: poly/poly reports a₂/b₂ − a₁/b₁ (same as check_poly_condition), exp/exp
/// reports b₂^(1/a₂) − b₁^(1/a₁) (same as check_exp_condition), mixed pairings report the
/// exponential decay rate of the time factor (positive when it decays).
template <typename Scalar>
CertificateVerdict<Scalar> check_sensitivity_condition(const KFunc<Scalar>& mu1, const KFunc<Scalar>& mu2,
                                                       const LFunc<Scalar>& phi1, const LFunc<Scalar>& phi2,
                                                       const KFunc<Scalar>& pi,
                                                       const SensitivityGrid<Scalar>& grid =
                                                           SensitivityGrid<Scalar>::standard()) {
  const Scalar a1 = mu1.exponent();
  const Scalar a2 = mu2.exponent();
  const Scalar ratio = a1 / a2;
  const Scalar b1 = phi1.rate();
  const Scalar b2 = phi2.rate();

  Scalar margin = 0;
  Scalar time_sup = 1;  // sup_t φ₂(t)^(-a₁/a₂)·φ₁(t) when bounded
  if (phi1.family() == LFamily::PolyDecay && phi2.family() == LFamily::PolyDecay) {
    // (t+1)^(b₂a₁/a₂ - b₁)
    margin = a2 / b2 - a1 / b1;
  } else if (phi1.family() == LFamily::ExpDecay && phi2.family() == LFamily::ExpDecay) {
    // (b₁·b₂^(-a₁/a₂))^t
    margin = std::pow(b2, Scalar(1) / a2) - std::pow(b1, Scalar(1) / a1);
  } else if (phi1.family() == LFamily::PolyDecay && phi2.family() == LFamily::ExpDecay) {
    // (t+1)^(-b₁)·b₂^(-t·a₁/a₂) grows exponentially
    margin = ratio * std::log(b2);
  } else {
    // b₁^t·(t+1)^p, p = b₂a₁/a₂: bounded, peak at t* = p/(-ln b₁) - 1
    margin = -std::log(b1);
    const Scalar p = b2 * ratio;
    const Scalar t_star = p / margin - 1;
    if (t_star > 0) time_sup = std::pow(b1, t_star) * std::pow(t_star + 1, p);
  }

  auto verdict = CertificateVerdict<Scalar>::from_margin(margin, ConditionId::GeneralSensitivity);
  if (!verdict.pass) return verdict;

  const Scalar scale = std::pow(Scalar(4), a1) * mu1.coefficient() * time_sup;
  for (Scalar s : grid.s) {
    const Scalar envelope = scale * std::pow(pi(s) / mu2.coefficient(), ratio);
    for (Scalar t : grid.t) {
      const Scalar g = sensitivity_term(mu1, mu2, phi1, phi2, pi, s, t);
      if (!std::isfinite(g) || g > envelope * (1 + 64 * std::numeric_limits<Scalar>::epsilon())) {
        verdict.pass = false;
        verdict.margin = std::min(verdict.margin, -std::numeric_limits<Scalar>::epsilon());
        return verdict;
      }
    }
  }
  return verdict;
}

}  // namespace fie
