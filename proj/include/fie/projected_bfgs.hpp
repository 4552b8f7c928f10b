#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace fie {

struct QuasiNewtonOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;  // on ‖x − P(x − ∇f)‖∞, relative to 1 + |f|
};

template <typename Scalar>
struct QuasiNewtonResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar value = 0;
  Scalar projected_gradient = 0;
  int iterations = 0;
  bool converged = false;
};

/// Box-constrained BFGS with projected backtracking line search.
///
/// `objective(x, grad)` returns f(x) and writes ∇f(x). Variables sitting on a bound with
/// the gradient pointing outward are frozen for the step; the inverse-Hessian estimate is
/// applied to the remaining ones. Bounds may be infinite.
template <typename Scalar, typename Objective>
QuasiNewtonResult<Scalar> minimize_box(Objective&& objective, Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x,
                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& lower,
                                       const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& upper,
                                       const QuasiNewtonOptions& options = {}) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const auto n = x.size();
  auto project = [&](const Vec& z) -> Vec { return z.cwiseMax(lower).cwiseMin(upper); };

  QuasiNewtonResult<Scalar> out;
  x = project(x);
  Vec g(n);
  Scalar f = objective(x, g);
  Mat H = Mat::Identity(n, n) / std::max<Scalar>(1, g.template lpNorm<Eigen::Infinity>());
  bool fresh = true;  // H is still a scaled identity

  Vec gn(n);
  Vec d(n);
  for (;;) {
    out.projected_gradient = (x - project(x - g)).template lpNorm<Eigen::Infinity>();
    if (!std::isfinite(f)) break;
    if (out.projected_gradient <= options.gradient_tolerance * (1 + std::abs(f))) {
      out.converged = true;
      break;
    }
    if (out.iterations >= options.max_iterations) break;
    ++out.iterations;

    Vec free_grad = g;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lower = x(i) <= lower(i) && g(i) > 0;
      const bool at_upper = x(i) >= upper(i) && g(i) < 0;
      if (at_lower || at_upper) free_grad(i) = 0;
    }
    d.noalias() = -H * free_grad;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (free_grad(i) == 0 && g(i) != 0) d(i) = 0;
    }
    if (g.dot(d) >= 0) {
      H = Mat::Identity(n, n) / std::max<Scalar>(1, g.template lpNorm<Eigen::Infinity>());
      fresh = true;
      d = -H * free_grad;
    }

    Scalar step = 1;
    Vec xn(n);
    Scalar fn = 0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, step *= Scalar(0.5)) {
      xn = project(x + step * d);
      fn = objective(xn, gn);
      if (std::isfinite(fn) && fn <= f + Scalar(1e-4) * g.dot(xn - x)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (fresh) break;  // no progress even along the scaled gradient
      H = Mat::Identity(n, n) / std::max<Scalar>(1, g.template lpNorm<Eigen::Infinity>());
      fresh = true;
      continue;
    }

    const Vec s = xn - x;
    const Vec y = gn - g;
    const Scalar sy = s.dot(y);
    if (sy > std::numeric_limits<Scalar>::epsilon() * s.norm() * y.norm() && sy > 0) {
      if (fresh) {
        H = Mat::Identity(n, n) * (sy / y.squaredNorm());
        fresh = false;
      }
      const Scalar rho = 1 / sy;
      const Vec Hy = H * y;
      const Scalar yHy = y.dot(Hy);
      H.noalias() -= rho * (Hy * s.transpose() + s * Hy.transpose());
      H.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
    }
    const bool stalled = std::abs(f - fn) <= std::numeric_limits<Scalar>::epsilon() * (1 + std::abs(f)) &&
                         s.template lpNorm<Eigen::Infinity>() <= std::numeric_limits<Scalar>::epsilon() * (1 + x.norm());
    x = xn;
    f = fn;
    g = gn;
    if (stalled) {
      out.projected_gradient = (x - project(x - g)).template lpNorm<Eigen::Infinity>();
      break;
    }
  }
  out.x = std::move(x);
  out.value = f;
  return out;
}

}  // namespace fie
