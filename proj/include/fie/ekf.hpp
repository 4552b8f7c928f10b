#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "fie/system_model.hpp"

namespace fie {

template <typename Scalar>
struct EkfState {
  Vector<Scalar> mean;
  Matrix<Scalar> covariance;
};

namespace detail {

template <typename Scalar>
void require_covariance(const Matrix<Scalar>& P, const char* what) {
  constexpr Scalar kTol = Scalar(1e-12);
  require(P.rows() == P.cols(), what);
  require((P - P.transpose()).cwiseAbs().maxCoeff() <= kTol * std::max<Scalar>(1, P.cwiseAbs().maxCoeff()), what);
  if (P.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(P, Eigen::EigenvaluesOnly);
  require(eig.eigenvalues().minCoeff() >= -kTol, what);
}

}  // namespace detail

template <typename Scalar>
EkfState<Scalar> ekf_init(const Vector<Scalar>& mean, const Matrix<Scalar>& covariance) {
  detail::require(covariance.rows() == mean.size(), "ekf_init: covariance size mismatch");
  detail::require_covariance(covariance, "ekf_init: covariance must be symmetric positive semidefinite");
  return {mean, covariance};
}

/// m⁻ = f(m, 0), P⁻ = A P Aᵀ + Q with A = ∂f/∂x at (m, 0).
template <typename Scalar>
EkfState<Scalar> ekf_predict(const EkfState<Scalar>& state, const SystemModel<Scalar>& model, const Matrix<Scalar>& Q) {
  detail::require(model.transition_jacobian_state != nullptr, "ekf_predict: model has no state Jacobian");
  const Vector<Scalar> zero = Vector<Scalar>::Zero(model.disturbance_dim);
  const Matrix<Scalar> A = model.transition_jacobian_state(state.mean, zero);
  EkfState<Scalar> out;
  out.mean = model.transition(state.mean, zero);
  out.covariance = A * state.covariance * A.transpose() + Q;
  return out;
}

/// K = P Cᵀ (C P Cᵀ + R)⁻¹, m⁺ = m + K(y − h(m)), P⁺ = (I − KC) P.
template <typename Scalar>
EkfState<Scalar> ekf_update(const EkfState<Scalar>& state, const Vector<Scalar>& y, const SystemModel<Scalar>& model,
                            const Matrix<Scalar>& R) {
  detail::require(model.output_jacobian != nullptr, "ekf_update: model has no output Jacobian");
  const Matrix<Scalar> C = model.output_jacobian(state.mean);
  const Matrix<Scalar> S = C * state.covariance * C.transpose() + R;
  Eigen::LLT<Matrix<Scalar>> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("ekf_update: innovation covariance is not positive definite");
  const Matrix<Scalar> K = llt.solve(C * state.covariance).transpose();
  const auto n = state.mean.size();

  EkfState<Scalar> out;
  out.mean = state.mean + K * (y - model.output(state.mean));
  out.covariance = (Matrix<Scalar>::Identity(n, n) - K * C) * state.covariance;
  out.covariance = Scalar(0.5) * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

template <typename Scalar>
EkfState<Scalar> ekf_step(const EkfState<Scalar>& state, const Vector<Scalar>& y, const SystemModel<Scalar>& model,
                          const Matrix<Scalar>& Q, const Matrix<Scalar>& R) {
  return ekf_update(ekf_predict(state, model, Q), y, model, R);
}

/// Filtered errors e(t|t) = x(t) − x̂(t|t). The t = 0 estimate updates the initial
/// state with y(0) without a prediction.
template <typename Scalar>
Matrix<Scalar> run_ekf(const Matrix<Scalar>& true_states, const Matrix<Scalar>& measurements,
                       const SystemModel<Scalar>& model, const EkfState<Scalar>& initial, const Matrix<Scalar>& Q,
                       const Matrix<Scalar>& R) {
  detail::require(true_states.cols() == measurements.cols(), "run_ekf: states and measurements must align");
  Matrix<Scalar> errors(true_states.rows(), true_states.cols());
  EkfState<Scalar> state = initial;
  for (Eigen::Index t = 0; t < measurements.cols(); ++t) {
    const Vector<Scalar> y = measurements.col(t);
    state = t == 0 ? ekf_update(state, y, model, R) : ekf_step(state, y, model, Q, R);
    errors.col(t) = true_states.col(t) - state.mean;
  }
  return errors;
}

}  // namespace fie
