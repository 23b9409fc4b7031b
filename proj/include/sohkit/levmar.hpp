#pragma once

// Box-constrained nonlinear least squares by damped Gauss-Newton
// (Levenberg-Marquardt). The Jacobian comes from forward finite differences
// (relative step, direction flipped at a bound so trial points stay inside the
// box), bounds are handled by projection with per-iteration active-set
// freeing, and the damping parameter is scaled on the normal-equation
// diagonal. Accepted iterations strictly decrease the residual sum of
// squares, so the recorded cost history is non-increasing. A residual
// evaluation may signal "not evaluable" by returning non-finite entries; such
// trial steps are rejected and the damping escalates, which shortens the next
// proposed step.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sohkit/common.hpp"

namespace sohkit {

struct LevmarOptions {
  int max_iterations = 100;
  double fd_relative_step = 1e-6;
  // converged when the accepted step's infinity norm, relative to the iterate
  // magnitude, falls below this
  double step_tolerance = 1e-10;
  // ... or when an accepted iteration decreases the cost by less than this
  double cost_decrease_tolerance = 1e-14;
  double lambda_init = 1e-3;
  double lambda_max = 1e12;
};

struct LevmarResult {
  Eigen::VectorXd x;
  double cost = std::numeric_limits<double>::infinity();  // residual sum of squares
  int iterations = 0;
  bool converged = false;
  // cost after initialization and after each accepted step; non-increasing
  std::vector<double> cost_history;
  std::string note;
};

namespace detail {

inline double cost_of(const Eigen::VectorXd& r) {
  double c = 0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r[i])) return std::numeric_limits<double>::infinity();
    c += r[i] * r[i];
  }
  return c;
}

}  // namespace detail

template <typename ResidualFn>
LevmarResult levmar_minimize(ResidualFn&& residual_fn, const Eigen::VectorXd& x_init,
                             const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                             const LevmarOptions& opt = {}) {
  const Eigen::Index n = x_init.size();
  if (n == 0) throw Error("least-squares problem has no variables");
  if (lower.size() != n || upper.size() != n)
    throw Error("bound vectors do not match the variable count");
  for (Eigen::Index j = 0; j < n; ++j)
    if (!(lower[j] < upper[j])) throw Error("bounds must satisfy lower < upper");
  if (opt.max_iterations < 1) throw Error("max_iterations must be >= 1");

  auto project = [&](Eigen::VectorXd v) {
    for (Eigen::Index j = 0; j < n; ++j) v[j] = std::clamp(v[j], lower[j], upper[j]);
    return v;
  };

  LevmarResult res;
  res.x = project(x_init);
  Eigen::VectorXd r = residual_fn(res.x);
  res.cost = detail::cost_of(r);
  if (!std::isfinite(res.cost))
    throw Error("residuals are not evaluable at the initial point");
  res.cost_history.push_back(res.cost);

  const Eigen::Index m = r.size();
  double lambda = opt.lambda_init;

  for (int it = 0; it < opt.max_iterations; ++it) {
    res.iterations = it + 1;
    if (res.cost <= 1e-28) {  // exact fit: nothing left to minimize
      res.converged = true;
      res.note = "residual vanished";
      break;
    }

    // forward-difference Jacobian, stepping away from active bounds
    Eigen::MatrixXd jac(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double h = opt.fd_relative_step * std::max(std::abs(res.x[j]), opt.fd_relative_step);
      if (res.x[j] + h > upper[j]) h = -h;
      Eigen::VectorXd xt = res.x;
      xt[j] += h;
      Eigen::VectorXd rt = residual_fn(xt);
      if (!std::isfinite(detail::cost_of(rt))) {  // retry on the other side
        h = -h;
        xt = res.x;
        xt[j] = std::clamp(res.x[j] + h, lower[j], upper[j]);
        rt = residual_fn(xt);
        h = xt[j] - res.x[j];
      }
      if (h == 0.0 || !std::isfinite(detail::cost_of(rt))) {
        jac.col(j).setZero();
        res.note = "jacobian column " + std::to_string(j) + " not evaluable";
      } else {
        jac.col(j) = (rt - r) / h;
      }
    }

    const Eigen::VectorXd grad = jac.transpose() * r;  // gradient of 1/2 cost

    // freeze variables pinned at a bound whose descent direction points outside
    std::vector<Eigen::Index> free_idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double span = upper[j] - lower[j];
      const bool at_lower = res.x[j] <= lower[j] + 1e-12 * span;
      const bool at_upper = res.x[j] >= upper[j] - 1e-12 * span;
      if ((at_lower && grad[j] > 0) || (at_upper && grad[j] < 0)) continue;
      free_idx.push_back(j);
    }
    if (free_idx.empty()) {  // first-order optimal on the active box face
      res.converged = true;
      res.note = "all variables pinned at bounds";
      break;
    }

    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    Eigen::MatrixXd a(nf, nf);
    Eigen::VectorXd g(nf);
    for (Eigen::Index a_i = 0; a_i < nf; ++a_i) {
      g[a_i] = grad[free_idx[static_cast<std::size_t>(a_i)]];
      for (Eigen::Index a_j = 0; a_j < nf; ++a_j)
        a(a_i, a_j) = jac.col(free_idx[static_cast<std::size_t>(a_i)])
                          .dot(jac.col(free_idx[static_cast<std::size_t>(a_j)]));
    }

    bool accepted = false;
    while (lambda <= opt.lambda_max) {
      Eigen::MatrixXd damped = a;
      for (Eigen::Index j = 0; j < nf; ++j)
        damped(j, j) += lambda * std::max(a(j, j), 1e-12);  // Marquardt diagonal scaling
      const Eigen::VectorXd step_f = damped.ldlt().solve(-g);
      if (!step_f.allFinite()) {
        lambda *= 10;
        continue;
      }

      Eigen::VectorXd x_try = res.x;
      for (Eigen::Index j = 0; j < nf; ++j)
        x_try[free_idx[static_cast<std::size_t>(j)]] += step_f[j];
      x_try = project(x_try);

      double rel_step = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        rel_step = std::max(rel_step,
                            std::abs(x_try[j] - res.x[j]) / std::max(1.0, std::abs(res.x[j])));
      if (rel_step == 0.0 || rel_step < opt.step_tolerance) {
        // the damped proposal no longer moves the iterate: stationary
        res.converged = true;
        res.note = "step below tolerance";
        accepted = true;  // nothing to evaluate; terminate the outer loop
        break;
      }

      const Eigen::VectorXd r_try = residual_fn(x_try);
      const double cost_try = detail::cost_of(r_try);
      if (cost_try < res.cost) {
        const double decrease = res.cost - cost_try;
        res.x = x_try;
        r = r_try;
        res.cost = cost_try;
        res.cost_history.push_back(cost_try);
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (rel_step < opt.step_tolerance) {
          res.converged = true;
          res.note = "step below tolerance";
        } else if (decrease < opt.cost_decrease_tolerance) {
          res.converged = true;
          res.note = "cost decrease below tolerance";
        }
        break;
      }
      lambda *= 10;
    }

    if (!accepted) {
      // damping exhausted without an acceptable step: report the best iterate
      res.converged = res.cost <= 1e-28;
      res.note = "damping exhausted without improvement";
      break;
    }
    if (res.converged) break;
  }

  if (!res.converged && res.note.empty()) res.note = "iteration cap reached";
  return res;
}

}  // namespace sohkit
