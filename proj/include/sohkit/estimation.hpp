#pragma once

// Joint estimation of the four health parameters from measured voltage, by
// box-constrained nonlinear least squares in two formulations:
//
//   conventional: r_k = V_aged^m(t_k) - S(theta_hat, t_k)
//   reference:    r_k = (V_aged^m(t_k) - V_ref^m(t_k))
//                       - (S(theta_hat, t_k) - S(theta_0, t_k))
//
// where S is the estimation model and V_ref^m is a stored measurement of the
// same excitation taken at the nominal (begin-of-life) parameters. Model and
// sensor offsets common to both measurements cancel in the reference
// formulation, as does the input-correlated part of the model's structural
// error - at the price of doubling the measurement-noise variance.
//
// S(theta_0, .) never changes during a solve, so it is simulated once per
// problem and cached. The reference measurement is an input artifact and is
// never recomputed.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/levmar.hpp"
#include "sohkit/ocp_model.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/random.hpp"
#include "sohkit/spme.hpp"
#include "sohkit/trajectory.hpp"

namespace sohkit {

enum class EstimationMode { conventional, reference };

inline EstimationMode estimation_mode_from_string(const std::string& s) {
  if (s == "conventional") return EstimationMode::conventional;
  if (s == "reference") return EstimationMode::reference;
  throw Error("unknown estimation mode '" + s + "' (expected conventional or reference)");
}

inline std::string to_string(EstimationMode m) {
  return m == EstimationMode::conventional ? "conventional" : "reference";
}

// Which forward model plays the role of S. The dynamic cell model is the
// default; the algebraic OCP model makes the least-squares problem exactly
// match the closed-form error statistics and is used to validate them.
enum class EstimationModel { spme, ocp };

inline EstimationModel estimation_model_from_string(const std::string& s) {
  if (s == "spme") return EstimationModel::spme;
  if (s == "ocp") return EstimationModel::ocp;
  throw Error("unknown estimation model '" + s + "' (expected spme or ocp)");
}

inline std::string to_string(EstimationModel m) {
  return m == EstimationModel::spme ? "spme" : "ocp";
}

// default search box: [0.5, 1.2] x nominal, capped so stoichiometries stay
// strictly inside the physical range
inline void default_health_bounds(const HealthVector& theta0, HealthVector& lower,
                                  HealthVector& upper) {
  const auto t = theta0.as_array();
  std::array<double, 4> lo{}, up{};
  for (size_t i = 0; i < 4; ++i) {
    lo[i] = 0.5 * t[i];
    up[i] = std::min(1.2 * t[i], 0.98);
  }
  lower = HealthVector::from_array(lo);
  upper = HealthVector::from_array(up);
}

struct EstimationProblem {
  EstimationMode mode = EstimationMode::conventional;
  EstimationModel model = EstimationModel::spme;
  VoltageTrajectory aged;       // measured voltage of the cell under estimation
  VoltageTrajectory reference;  // stored nominal-cell measurement (reference mode)
  HealthVector theta0;          // nominal health values
  ParameterSet params;          // template; non-target parameters stay fixed
  ExcitationProfile profile;
  double initial_soc = 0;
  HealthVector lower, upper;  // search box
  HealthVector theta_init;
  bool multi_start = false;  // 1 + (multi_start_count-1) perturbed starts
  int multi_start_count = 5;
  double multi_start_spread = 0.05;  // relative perturbation of theta_init
  std::uint64_t rng_seed = 0;
  LevmarOptions solver;

  static void validate(const EstimationProblem& p) {
    ExcitationProfile::validate(p.profile);
    p.aged.require_consistent();
    if (p.aged.size() != p.profile.sample_count())
      throw Error("aged measurement has " + std::to_string(p.aged.size()) +
                  " samples, excitation provides " + std::to_string(p.profile.sample_count()));
    if (p.mode == EstimationMode::reference) {
      p.reference.require_consistent();
      if (p.reference.size() != p.aged.size())
        throw Error("reference and aged measurements have different lengths");
      for (size_t k = 0; k < p.aged.size(); ++k)
        if (std::abs(p.reference.time_s[k] - p.aged.time_s[k]) > 1e-9)
          throw Error("reference and aged timestamps differ at sample " + std::to_string(k));
    }
    if (!(p.initial_soc >= 0 && p.initial_soc <= 1))
      throw Error("initial SOC out of [0,1]");
    const auto lo = p.lower.as_array(), up = p.upper.as_array();
    const auto ti = p.theta_init.as_array(), t0 = p.theta0.as_array();
    for (size_t i = 0; i < 4; ++i) {
      if (!(lo[i] < up[i]))
        throw Error("health bounds must satisfy lower < upper for " + HealthVector::names()[i]);
      if (ti[i] < lo[i] || ti[i] > up[i])
        throw Error("initial guess for " + HealthVector::names()[i] + " is outside the bounds");
      if (!(t0[i] > 0))
        throw Error("nominal value for " + HealthVector::names()[i] + " must be > 0");
    }
    if (p.multi_start && p.multi_start_count < 1)
      throw Error("multi_start_count must be >= 1");
  }
};

// problem skeleton with nominal values, default box and default start; the
// caller attaches the measured trajectories
inline EstimationProblem make_estimation_problem(const ParameterSet& params,
                                                 const ExcitationProfile& profile,
                                                 EstimationMode mode) {
  EstimationProblem p;
  p.mode = mode;
  p.params = params;
  p.profile = profile;
  p.theta0 = extract_health(params);
  p.theta_init = p.theta0;
  default_health_bounds(p.theta0, p.lower, p.upper);
  return p;
}

struct EstimationResult {
  HealthVector theta_hat;
  double residual_ssq = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // non-increasing across accepted steps
  std::string note;
  // per-parameter percent error vs a known truth; set by attach_truth
  std::optional<std::array<double, 4>> error_pct;
};

// the estimation model's voltage response at a trial health vector
inline VoltageTrajectory simulate_estimation_model(const ParameterSet& base,
                                                   const HealthVector& theta,
                                                   const ExcitationProfile& profile,
                                                   double initial_soc, EstimationModel model) {
  const ParameterSet p = with_health(base, theta);
  if (model == EstimationModel::ocp) return simulate_ocp_model(p, profile, initial_soc);
  SpmeOptions opt;  // safety monitoring is the harness's job, not the solver's
  opt.enforce_voltage_window = false;
  return simulate_spme(p, profile, CellState::equilibrium(initial_soc), opt);
}

namespace detail {

inline Eigen::VectorXd infinite_residuals(Eigen::Index n) {
  return Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
}

// residuals with an optional cached S(theta_0); non-evaluable trial points
// yield infinite residuals so the solver retreats instead of aborting
inline Eigen::VectorXd residuals_impl(const HealthVector& theta, const EstimationProblem& p,
                                      const Eigen::VectorXd* s0_cache) {
  const Eigen::Index n = static_cast<Eigen::Index>(p.aged.size());
  VoltageTrajectory sim;
  try {
    sim = simulate_estimation_model(p.params, theta, p.profile, p.initial_soc, p.model);
  } catch (const Error&) {
    return infinite_residuals(n);
  }
  Eigen::VectorXd r(n);
  if (p.mode == EstimationMode::conventional) {
    for (Eigen::Index k = 0; k < n; ++k)
      r[k] = p.aged.voltage_V[static_cast<size_t>(k)] - sim.voltage_V[static_cast<size_t>(k)];
    return r;
  }
  Eigen::VectorXd s0;
  if (s0_cache == nullptr) {
    const VoltageTrajectory nominal =
        simulate_estimation_model(p.params, p.theta0, p.profile, p.initial_soc, p.model);
    s0.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) s0[k] = nominal.voltage_V[static_cast<size_t>(k)];
    s0_cache = &s0;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto ku = static_cast<size_t>(k);
    r[k] = (p.aged.voltage_V[ku] - p.reference.voltage_V[ku]) -
           (sim.voltage_V[ku] - (*s0_cache)[k]);
  }
  return r;
}

}  // namespace detail

inline Eigen::VectorXd residuals(const HealthVector& theta, const EstimationProblem& problem) {
  EstimationProblem::validate(problem);
  return detail::residuals_impl(theta, problem, nullptr);
}

inline EstimationResult estimate(const EstimationProblem& problem) {
  EstimationProblem::validate(problem);

  // cache the nominal model response once per problem (reference mode only)
  Eigen::VectorXd s0;
  if (problem.mode == EstimationMode::reference) {
    const VoltageTrajectory nominal = simulate_estimation_model(
        problem.params, problem.theta0, problem.profile, problem.initial_soc, problem.model);
    s0.resize(static_cast<Eigen::Index>(nominal.size()));
    for (Eigen::Index k = 0; k < s0.size(); ++k)
      s0[k] = nominal.voltage_V[static_cast<size_t>(k)];
  }

  auto residual_fn = [&](const Eigen::VectorXd& x) {
    const HealthVector th = HealthVector::from_array({x[0], x[1], x[2], x[3]});
    return detail::residuals_impl(th, problem,
                                  problem.mode == EstimationMode::reference ? &s0 : nullptr);
  };

  const auto lo = problem.lower.as_array(), up = problem.upper.as_array();
  Eigen::VectorXd lower(4), upper(4);
  for (Eigen::Index j = 0; j < 4; ++j) {
    lower[j] = lo[static_cast<size_t>(j)];
    upper[j] = up[static_cast<size_t>(j)];
  }

  std::vector<Eigen::VectorXd> starts;
  {
    const auto ti = problem.theta_init.as_array();
    Eigen::VectorXd x0(4);
    for (Eigen::Index j = 0; j < 4; ++j) x0[j] = ti[static_cast<size_t>(j)];
    starts.push_back(x0);
    if (problem.multi_start) {
      for (int s = 1; s < problem.multi_start_count; ++s) {
        NormalSampler rng(derive_seed(problem.rng_seed, {0x57A27u, static_cast<uint64_t>(s)}));
        Eigen::VectorXd xs = x0;
        for (Eigen::Index j = 0; j < 4; ++j) {
          xs[j] *= 1.0 + problem.multi_start_spread * rng.uniform(-1.0, 1.0);
          xs[j] = std::clamp(xs[j], lower[j], upper[j]);
        }
        starts.push_back(xs);
      }
    }
  }

  LevmarResult best;
  for (const auto& x0 : starts) {
    const LevmarResult run = levmar_minimize(residual_fn, x0, lower, upper, problem.solver);
    if (run.cost < best.cost) best = run;
  }

  EstimationResult out;
  out.theta_hat = HealthVector::from_array({best.x[0], best.x[1], best.x[2], best.x[3]});
  out.residual_ssq = best.cost;
  out.iterations = best.iterations;
  out.converged = best.converged;
  out.cost_history = best.cost_history;
  out.note = best.note;
  return out;
}

// per-parameter percent error of an estimate against a known truth
inline std::array<double, 4> evaluate_against_truth(const HealthVector& estimate,
                                                    const HealthVector& truth) {
  const auto e = estimate.as_array(), t = truth.as_array();
  std::array<double, 4> pct{};
  for (size_t i = 0; i < 4; ++i) {
    if (!(t[i] != 0)) throw Error("truth value for " + HealthVector::names()[i] + " is zero");
    pct[i] = 100.0 * (e[i] - t[i]) / t[i];
  }
  return pct;
}

inline void attach_truth(EstimationResult& result, const HealthVector& truth) {
  result.error_pct = evaluate_against_truth(result.theta_hat, truth);
}

}  // namespace sohkit
