#pragma once

// Information-optimal excitation design. A candidate excitation is a vector of
// per-interval currents; its merit is an optimality metric of the Fisher
// information that the resulting voltage trajectory carries about the four
// health parameters, with the sensitivity columns scaled by the nominal
// parameter values so the criteria compare relative errors.
//
// Candidate screening runs on the algebraic cell model in soft mode, so a
// candidate can never abort the search: operating-window excursions are
// accumulated as violation integrals and charged to the objective as an
// additive penalty. Cell voltage under load is approximated for screening by
// the open-circuit voltage minus an estimated dynamic drop proportional to the
// applied current; the winning profile is re-verified afterwards on the full
// diffusion plant and any discrepancy is reported, not silently fixed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/fisher.hpp"
#include "sohkit/ocp_model.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/pso.hpp"
#include "sohkit/sensitivity.hpp"
#include "sohkit/spme.hpp"

namespace sohkit {

struct DesignSpec {
  double horizon_s = 600.0;
  int intervals = 10;
  double sample_period_s = 1.0;
  double c_rate_bound = 1.0;    // |I| <= c_rate_bound * 1C
  double initial_soc = 0.0;
  double soc_min = 0.0;
  double soc_max = 1.0;
  // NaN means: take the cell's safety window from the parameter set
  double voltage_min_V = std::numeric_limits<double>::quiet_NaN();
  double voltage_max_V = std::numeric_limits<double>::quiet_NaN();
  OptimalityCriterion criterion = OptimalityCriterion::D;
  // screening estimate of the dynamic voltage drop per ampere; the check
  // voltage is V_ocp(t) - R_drop * I(t)
  double dynamic_drop_estimate_ohm = 0.022;

  double segment_duration_s() const { return horizon_s / intervals; }

  static void validate(const DesignSpec& s) {
    if (!(s.horizon_s > 0)) throw Error("design horizon must be > 0");
    if (s.intervals < 1) throw Error("design intervals must be >= 1");
    if (!(s.sample_period_s > 0)) throw Error("design sample period must be > 0");
    if (!(s.c_rate_bound > 0)) throw Error("design c-rate bound must be > 0");
    if (!(s.initial_soc >= 0 && s.initial_soc <= 1))
      throw Error("design initial SOC must be in [0, 1]");
    if (!(s.soc_min < s.soc_max)) throw Error("design SOC bounds must satisfy min < max");
    if (!(s.dynamic_drop_estimate_ohm >= 0))
      throw Error("design dynamic drop estimate must be >= 0");
    const double seg = s.segment_duration_s();
    const double per = seg / s.sample_period_s;
    if (std::abs(per - std::round(per)) > 1e-9 || per < 0.5)
      throw Error("design sample period must divide the segment duration");
  }
};

// resolves NaN voltage-window fields from the parameter set
inline DesignSpec resolve_design_spec(DesignSpec spec, const ParameterSet& params) {
  if (std::isnan(spec.voltage_min_V)) spec.voltage_min_V = params.voltage_min_V;
  if (std::isnan(spec.voltage_max_V)) spec.voltage_max_V = params.voltage_max_V;
  if (!(spec.voltage_min_V < spec.voltage_max_V))
    throw Error("design voltage window must satisfy min < max");
  return spec;
}

struct ConstraintReport {
  // extreme values observed during screening
  double max_abs_current_A = 0;
  double min_soc = 0;
  double max_soc = 0;
  double min_check_voltage_V = 0;
  double max_check_voltage_V = 0;
  // violation magnitudes (zero when the candidate respects every constraint)
  double current_violation_As = 0;   // sum of excess amps x segment duration
  double soc_violation = 0;          // integral of SOC excursion outside bounds
  double stoich_violation = 0;       // integral of stoichiometry excursion
  double voltage_violation_Vs = 0;   // integral of check-voltage excursion

  double total_violation() const {
    return current_violation_As + soc_violation + stoich_violation + voltage_violation_Vs;
  }
  bool feasible() const { return total_violation() == 0.0; }

  std::string describe() const {
    std::string out;
    auto add = [&](const char* label, double v) {
      if (v > 0) out += std::string(out.empty() ? "" : ", ") + label + "=" + format_sig(v);
    };
    add("current_As", current_violation_As);
    add("soc", soc_violation);
    add("stoich", stoich_violation);
    add("voltage_Vs", voltage_violation_Vs);
    return out.empty() ? "none" : out;
  }
};

struct DesignEvaluation {
  double objective = 0;   // penalized, sign-adjusted so larger is better
  double raw_metric = 0;  // un-penalized criterion value (D, E: larger better; A: smaller)
  bool feasible = false;
  ConstraintReport report;
};

namespace detail {

// metric value sign-adjusted so that larger is always better; a metric that
// cannot be computed (singular information) maps to a deeply negative score
inline double sign_adjusted_metric(const FisherMatrix& f, OptimalityCriterion crit,
                                   double* raw) {
  constexpr double kSingularScore = -1e30;
  try {
    const double m = optimality_metric(f, crit);
    if (raw) *raw = m;
    if (!std::isfinite(m)) return kSingularScore;
    return crit == OptimalityCriterion::A ? -m : m;
  } catch (const Error&) {
    if (raw) *raw = std::numeric_limits<double>::infinity();
    return kSingularScore;
  }
}

}  // namespace detail

inline DesignEvaluation evaluate_design(const std::vector<double>& segment_currents_A,
                                        const DesignSpec& spec_in, const ParameterSet& params,
                                        double penalty_weight = 1e6) {
  const DesignSpec spec = resolve_design_spec(spec_in, params);
  DesignSpec::validate(spec);
  if (segment_currents_A.size() != static_cast<std::size_t>(spec.intervals))
    throw Error("candidate has " + std::to_string(segment_currents_A.size()) +
                " segments, expected " + std::to_string(spec.intervals));
  for (double c : segment_currents_A)
    if (!std::isfinite(c)) throw Error("candidate currents must be finite");

  DesignEvaluation ev;
  ConstraintReport& rep = ev.report;

  ExcitationProfile profile;
  profile.segment_duration_s = spec.segment_duration_s();
  profile.segment_currents_A = segment_currents_A;
  profile.sample_period_s = spec.sample_period_s;

  const double limit_A = spec.c_rate_bound * params.one_c_current_A();
  rep.max_abs_current_A = profile.max_abs_current_A();
  for (double c : segment_currents_A)
    rep.current_violation_As += std::max(0.0, std::abs(c) - limit_A) * profile.segment_duration_s;

  OcpSimOptions opts;
  opts.soft = true;
  const OcpOutput sim = run_ocp_model(params, profile, spec.initial_soc, opts);
  rep.stoich_violation = sim.stoich_violation;
  rep.min_soc = *std::min_element(sim.soc.begin(), sim.soc.end());
  rep.max_soc = *std::max_element(sim.soc.begin(), sim.soc.end());

  // SOC-window and voltage checks against the design bounds; the voltage check
  // uses the open-circuit voltage with a resistive estimate of the dynamic
  // drop under load
  rep.min_check_voltage_V = std::numeric_limits<double>::infinity();
  rep.max_check_voltage_V = -std::numeric_limits<double>::infinity();
  const double dt = profile.sample_period_s;
  for (std::size_t k = 0; k < sim.trajectory.size(); ++k) {
    rep.soc_violation += (std::max(0.0, sim.soc[k] - spec.soc_max) +
                          std::max(0.0, spec.soc_min - sim.soc[k])) *
                         dt;
    const double v_chk = sim.trajectory.voltage_V[k] -
                         spec.dynamic_drop_estimate_ohm * sim.trajectory.current_A[k];
    rep.min_check_voltage_V = std::min(rep.min_check_voltage_V, v_chk);
    rep.max_check_voltage_V = std::max(rep.max_check_voltage_V, v_chk);
    rep.voltage_violation_Vs += (std::max(0.0, spec.voltage_min_V - v_chk) +
                                 std::max(0.0, v_chk - spec.voltage_max_V)) *
                                dt;
  }

  SensitivityTrajectory sens =
      sensitivities_from_ocp_output(params, sim, spec.initial_soc);
  sens = scale_columns(sens, extract_health(params));
  const FisherMatrix f = fisher(sens);
  ev.objective = detail::sign_adjusted_metric(f, spec.criterion, &ev.raw_metric);
  ev.feasible = rep.feasible();
  if (!ev.feasible) ev.objective -= penalty_weight * rep.total_violation();
  return ev;
}

// constant 1C charge over the full horizon: the conventional baseline the
// designed excitations are compared against
inline ExcitationProfile cc_baseline(const DesignSpec& spec, const ParameterSet& params) {
  DesignSpec::validate(spec);
  return ExcitationProfile::constant(-params.one_c_current_A(), spec.horizon_s,
                                     spec.intervals, spec.sample_period_s);
}

struct DesignResult {
  ExcitationProfile profile;
  double objective = 0;   // sign-adjusted, zero penalty (the result is feasible)
  double raw_metric = 0;
  ConstraintReport report;
  std::vector<double> history;  // best-so-far objective, non-decreasing
  int iterations = 0;
  std::size_t evaluations = 0;
  // outcome of re-running the winning profile on the full diffusion plant
  bool plant_verified = false;
  std::string plant_note;
  double plant_min_voltage_V = 0;
  double plant_max_voltage_V = 0;
};

inline DesignResult design_excitation(const DesignSpec& spec_in, const PsoConfig& pso,
                                      const ParameterSet& params) {
  const DesignSpec spec = resolve_design_spec(spec_in, params);
  DesignSpec::validate(spec);

  const std::size_t dims = static_cast<std::size_t>(spec.intervals);
  const double limit_A = spec.c_rate_bound * params.one_c_current_A();
  const std::vector<double> lower(dims, -limit_A);
  const std::vector<double> upper(dims, limit_A);

  // seed the swarm with the constant-charge baseline so the search never
  // returns anything worse than the conventional profile
  PsoConfig cfg = pso;
  if (cfg.initial_guesses.size() < static_cast<std::size_t>(cfg.swarm_size))
    cfg.initial_guesses.push_back(cc_baseline(spec, params).segment_currents_A);

  auto objective = [&](const std::vector<double>& x) {
    return evaluate_design(x, spec, params, cfg.penalty_weight).objective;
  };
  const PsoResult sol = pso_maximize(objective, lower, upper, cfg);

  const DesignEvaluation best = evaluate_design(sol.best_position, spec, params,
                                                cfg.penalty_weight);
  if (!best.feasible)
    throw Error("excitation design found no feasible profile (best violations: " +
                best.report.describe() + ")");

  DesignResult res;
  res.profile.segment_duration_s = spec.segment_duration_s();
  res.profile.segment_currents_A = sol.best_position;
  res.profile.sample_period_s = spec.sample_period_s;
  res.objective = best.objective;
  res.raw_metric = best.raw_metric;
  res.report = best.report;
  res.history = sol.history;
  res.iterations = sol.iterations;
  res.evaluations = sol.evaluations;

  // re-verify on the full diffusion plant; a failure here is reported so the
  // caller can tighten the screening margins, never silently patched
  try {
    SpmeOptions plant_opts;
    plant_opts.fidelity = SolidFidelity::shells;
    plant_opts.enforce_voltage_window = false;
    const SpmeOutput plant =
        run_spme(params, res.profile, CellState::equilibrium(spec.initial_soc), plant_opts);
    res.plant_min_voltage_V = *std::min_element(plant.trajectory.voltage_V.begin(),
                                                plant.trajectory.voltage_V.end());
    res.plant_max_voltage_V = *std::max_element(plant.trajectory.voltage_V.begin(),
                                                plant.trajectory.voltage_V.end());
    if (res.plant_min_voltage_V < spec.voltage_min_V ||
        res.plant_max_voltage_V > spec.voltage_max_V) {
      res.plant_verified = false;
      res.plant_note = "plant voltage range [" + format_sig(res.plant_min_voltage_V) + ", " +
                       format_sig(res.plant_max_voltage_V) + "] V leaves the window [" +
                       format_sig(spec.voltage_min_V) + ", " + format_sig(spec.voltage_max_V) +
                       "] V";
    } else {
      res.plant_verified = true;
    }
  } catch (const Error& e) {
    res.plant_verified = false;
    res.plant_note = std::string("plant simulation failed: ") + e.what();
  }
  return res;
}

}  // namespace sohkit
