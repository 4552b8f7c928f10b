#pragma once

#include <cmath>
#include <functional>
#include <type_traits>
#include <utility>

#include <Eigen/Dense>

#include "fie/comparison_functions.hpp"
#include "fie/errors.hpp"

namespace fie {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Discrete-time system x⁺ = f(x, w), y = h(x) + v.
///
/// Sequences are stored column-per-time-step. The Jacobian hooks are optional; the
/// estimators that need them refuse models that leave them empty.
template <typename Scalar>
struct SystemModel {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  int state_dim = 0;
  int disturbance_dim = 0;
  int output_dim = 0;
  std::function<Vec(const Vec&, const Vec&)> transition;
  std::function<Vec(const Vec&)> output;
  std::function<Mat(const Vec&, const Vec&)> transition_jacobian_state;
  std::function<Mat(const Vec&, const Vec&)> transition_jacobian_disturbance;
  std::function<Mat(const Vec&)> output_jacobian;

  bool differentiable() const {
    return transition_jacobian_state && transition_jacobian_disturbance && output_jacobian;
  }
};

/// i-IOSS bound |x₁(t)−x₂(t)| ≤ β(|x₀₁−x₀₂|, t) ⊕ α₁(‖w₁−w₂‖) ⊕ α₂(‖h(x₁)−h(x₂)‖).
/// Supplied as data; nothing here proves it.
template <typename Scalar>
struct IossCertificate {
  KLFunc<Scalar> beta;
  KFunc<Scalar> alpha1;
  KFunc<Scalar> alpha2;

  bool exp_ioss() const { return beta.l.family() == LFamily::ExpDecay; }
};

template <typename Scalar>
struct Trajectory {
  Matrix<Scalar> states;        // n × (T+1)
  Matrix<Scalar> disturbances;  // g × T

  int horizon() const { return static_cast<int>(disturbances.cols()); }
};

template <typename Scalar>
Trajectory<Scalar> simulate(const SystemModel<Scalar>& model, const std::type_identity_t<Vector<Scalar>>& x0,
                            const std::type_identity_t<Matrix<Scalar>>& w) {
  detail::require(x0.size() == model.state_dim, "simulate: initial state dimension mismatch");
  detail::require(w.rows() == model.disturbance_dim || w.cols() == 0, "simulate: disturbance dimension mismatch");
  const auto horizon = w.cols();
  Trajectory<Scalar> traj;
  traj.disturbances = w;
  traj.states.resize(model.state_dim, horizon + 1);
  traj.states.col(0) = x0;
  for (Eigen::Index k = 0; k < horizon; ++k) {
    const Vector<Scalar> next = model.transition(traj.states.col(k), w.col(k));
    detail::require(next.size() == model.state_dim, "simulate: transition returned wrong dimension");
    traj.states.col(k + 1) = next;
  }
  return traj;
}

/// y(k) = h(x(k)) + v(k) for k = 0..T.
template <typename Scalar>
Matrix<Scalar> observe(const SystemModel<Scalar>& model, const Trajectory<Scalar>& traj,
                       const std::type_identity_t<Matrix<Scalar>>& v) {
  detail::require(v.cols() == traj.states.cols(), "observe: noise length must equal T+1");
  detail::require(v.rows() == model.output_dim, "observe: noise dimension mismatch");
  Matrix<Scalar> y(model.output_dim, traj.states.cols());
  for (Eigen::Index k = 0; k < y.cols(); ++k) y.col(k) = model.output(traj.states.col(k)) + v.col(k);
  return y;
}

/// Generic constructor for user-supplied maps; Jacobians may be attached afterwards.
template <typename Scalar>
SystemModel<Scalar> make_model(int n, int g, int p, std::function<Vector<Scalar>(const Vector<Scalar>&, const Vector<Scalar>&)> f,
                               std::function<Vector<Scalar>(const Vector<Scalar>&)> h) {
  detail::require(n > 0 && g > 0 && p > 0, "make_model: dimensions must be positive");
  SystemModel<Scalar> model;
  model.state_dim = n;
  model.disturbance_dim = g;
  model.output_dim = p;
  model.transition = std::move(f);
  model.output = std::move(h);
  return model;
}

enum class ExampleCertificate { Exponential, Polynomial };

/// Scalar system x⁺ = 0.9x + w, y = x³ + v.
///
/// The exponential certificate is β(s,t) = s·0.9ᵗ; the polynomial one is the looser
/// β(s,t) = s·(t+1)^(ln 0.9). With identical disturbances the state gap contracts by
/// exactly 0.9 per step, so α₁(s) = 10s (geometric sum of 0.9ᵏ) and any α₂ serve.
template <typename Scalar = double>
std::pair<SystemModel<Scalar>, IossCertificate<Scalar>> example_system(
    ExampleCertificate kind = ExampleCertificate::Exponential) {
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;
  auto model = make_model<Scalar>(
      1, 1, 1, [](const Vec& x, const Vec& w) -> Vec { return Scalar(0.9) * x + w; },
      [](const Vec& x) -> Vec { return x.array().cube().matrix(); });
  model.transition_jacobian_state = [](const Vec&, const Vec&) -> Mat { return Mat::Constant(1, 1, Scalar(0.9)); };
  model.transition_jacobian_disturbance = [](const Vec&, const Vec&) -> Mat { return Mat::Identity(1, 1); };
  model.output_jacobian = [](const Vec& x) -> Mat { return Mat::Constant(1, 1, 3 * x(0) * x(0)); };

  const auto decay = kind == ExampleCertificate::Exponential ? LFunc<Scalar>::exp(Scalar(0.9))
                                                             : LFunc<Scalar>::poly(-std::log(Scalar(0.9)));
  IossCertificate<Scalar> cert{KLFunc<Scalar>{KFunc<Scalar>::identity(), decay}, KFunc<Scalar>(10, 1),
                               KFunc<Scalar>::identity()};
  return {std::move(model), std::move(cert)};
}

}  // namespace fie
