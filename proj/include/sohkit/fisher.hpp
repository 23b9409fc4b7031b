#pragma once

// Fisher information over the four health parameters, the D/E/A optimality
// metrics on it, and the closed-form estimation-error prediction for the
// reference-voltage least-squares problem:
//
//   F = sum_k s(t_k)^T s(t_k)                      (4x4, symmetric PSD)
//   E[theta_true - theta_hat] = -F^{-1} (sum_k s(t_k)^T) * delta_bar
//   cov(theta_true - theta_hat) = 2 F^{-1} sigma^2
//
// The factor 2 is structural: differencing two measurements with independent
// noise of variance sigma^2 doubles the lumped noise variance.
//
// Metrics: D = det(F), E = lambda_min(F), A = trace(F^{-1}). A is reported so
// that LOWER is better; optimizers maximize -A. The determinant uses the
// closed-form 4x4 cofactor expansion (exact for small-integer test matrices);
// eigenvalues come from the self-adjoint solver.

#include <cstddef>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/sensitivity.hpp"

namespace sohkit {

struct FisherMatrix {
  Eigen::Matrix4d matrix = Eigen::Matrix4d::Zero();
  std::size_t sample_count = 0;
  // parameter ordering is fixed: HealthVector::names()
};

inline FisherMatrix fisher(const SensitivityTrajectory& sens) {
  if (sens.rows.rows() == 0) throw Error("cannot build a Fisher matrix from zero samples");
  FisherMatrix f;
  f.sample_count = static_cast<std::size_t>(sens.rows.rows());
  for (Eigen::Index k = 0; k < sens.rows.rows(); ++k) {
    const Eigen::RowVector4d s = sens.rows.row(k);
    f.matrix += s.transpose() * s;
  }
  return f;
}

enum class OptimalityCriterion { D, E, A };

inline OptimalityCriterion criterion_from_string(const std::string& s) {
  if (s == "d" || s == "D") return OptimalityCriterion::D;
  if (s == "e" || s == "E") return OptimalityCriterion::E;
  if (s == "a" || s == "A") return OptimalityCriterion::A;
  throw Error("unknown optimality criterion '" + s + "' (expected d, e, or a)");
}

inline std::string to_string(OptimalityCriterion c) {
  switch (c) {
    case OptimalityCriterion::D: return "D";
    case OptimalityCriterion::E: return "E";
    case OptimalityCriterion::A: return "A";
  }
  return "?";
}

namespace detail {

// Condition number from the symmetric eigenvalue spectrum; used to reject
// (near-)singular information matrices before inversion.
inline double symmetric_condition(const Eigen::Matrix4d& m, double* lambda_min = nullptr) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
  const auto& ev = es.eigenvalues();
  if (lambda_min) *lambda_min = ev.minCoeff();
  if (ev.minCoeff() <= 0) return std::numeric_limits<double>::infinity();
  return ev.maxCoeff() / ev.minCoeff();
}

}  // namespace detail

inline double optimality_metric(const FisherMatrix& f, OptimalityCriterion criterion) {
  switch (criterion) {
    case OptimalityCriterion::D:
      return f.matrix.determinant();
    case OptimalityCriterion::E: {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(f.matrix);
      return es.eigenvalues().minCoeff();
    }
    case OptimalityCriterion::A: {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(f.matrix);
      const auto& ev = es.eigenvalues();
      const double cond = ev.minCoeff() <= 0 ? std::numeric_limits<double>::infinity()
                                             : ev.maxCoeff() / ev.minCoeff();
      if (!(cond < 1e12))
        throw Error("Fisher matrix too ill-conditioned for A-optimality (condition number " +
                    format_sig(cond) + ")");
      // trace(F^-1) = sum of reciprocal eigenvalues, compensated (Neumaier)
      // summation so the result is correctly rounded
      double sum = 0, comp = 0;
      for (int i = 0; i < 4; ++i) {
        const double x = 1.0 / ev[i];
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
      }
      return sum + comp;
    }
  }
  throw Error("unreachable optimality criterion");
}

struct ErrorPrediction {
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();       // E[theta_true - theta_hat]
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // cov of the same error
  double delta_bar_V = 0;  // lumped constant uncertainty input, echoed
  double sigma_V = 0;      // per-measurement noise sigma, echoed
};

inline ErrorPrediction predict_error(const FisherMatrix& f, const SensitivityTrajectory& sens,
                                     double delta_bar_V, double sigma_V) {
  const double cond = detail::symmetric_condition(f.matrix);
  if (!(cond < 1e12))
    throw Error("Fisher matrix too ill-conditioned for error prediction (condition number " +
                format_sig(cond) + ")");
  const Eigen::Matrix4d finv = f.matrix.inverse();
  const Eigen::Vector4d sum_s = sens.rows.colwise().sum().transpose();
  ErrorPrediction pred;
  pred.mean = -(finv * sum_s) * delta_bar_V;
  pred.covariance = 2.0 * finv * sigma_V * sigma_V;
  pred.delta_bar_V = delta_bar_V;
  pred.sigma_V = sigma_V;
  return pred;
}

// Rescales sensitivity columns to relative parameters theta_i / scale_i
// (chain rule: dV/d(theta/scale) = scale * dV/dtheta). The design objective
// uses BOL values as scales so all four parameters contribute comparably;
// estimation and error prediction stay in natural units.
inline SensitivityTrajectory scale_columns(const SensitivityTrajectory& sens,
                                           const HealthVector& scale) {
  SensitivityTrajectory out = sens;
  const auto a = scale.as_array();
  for (int c = 0; c < 4; ++c) out.rows.col(c) *= a[static_cast<size_t>(c)];
  return out;
}

}  // namespace sohkit
