#pragma once

// Quasi-static OCP cell model: exact Coulomb counting of the passed charge
// maps SOC to per-electrode surface stoichiometry, and the terminal voltage
// is the OCP difference U_p(x_p) - U_n(x_n) with no dynamic terms. The charge
// integral is an exact prefix sum (piecewise-constant current), so there is
// no integrator error in this model.
//
// Strict mode throws on the first sample where SOC leaves [0,1] or a
// stoichiometry leaves its OCP knot range. Soft mode (used by the excitation
// design search, which must survive arbitrarily bad candidates) clamps OCP
// evaluations and accumulates violation integrals instead.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/trajectory.hpp"

namespace sohkit {

struct OcpSimOptions {
  bool soft = false;
};

struct OcpOutput {
  VoltageTrajectory trajectory;  // model-predicted; breakdown: ocp = V, dynamics = 0
  std::vector<double> soc;
  std::vector<double> x_neg, x_pos;          // surface stoichiometries per sample
  std::vector<double> slope_neg, slope_pos;  // dU/dx per sample (same eval as the voltage)
  std::vector<double> charge_As;             // q(t_k) = integral of I dt, A*s
  double min_voltage_V = 0, max_voltage_V = 0;
  // soft-mode violation integrals; identically zero in strict mode
  double soc_violation = 0;     // integral of dist(SOC, [0,1]) dt
  double stoich_violation = 0;  // integral of dist(x, knot range) dt, both electrodes
};

inline OcpOutput run_ocp_model(const ParameterSet& params, const ExcitationProfile& profile,
                               double soc0, const OcpSimOptions& options = {}) {
  ExcitationProfile::validate(profile);
  if (!(soc0 >= 0 && soc0 <= 1)) throw Error("initial SOC out of [0,1]");

  const double dt = profile.sample_period_s;
  const size_t n = profile.sample_count();
  const double cap_neg = params.negative.stoich_capacity_As(ParameterSet::faraday);
  const double cap_pos = params.positive.stoich_capacity_As(ParameterSet::faraday);
  const double xn0 = params.negative.stoich_at_0 +
                     (params.negative.stoich_at_100 - params.negative.stoich_at_0) * soc0;
  const double xp0 = params.positive.stoich_at_0 +
                     (params.positive.stoich_at_100 - params.positive.stoich_at_0) * soc0;
  const double soc_window_neg = params.negative.stoich_at_100 - params.negative.stoich_at_0;

  OcpOutput out;
  out.trajectory.sample_period_s = dt;
  out.trajectory.provenance = Provenance::model_predicted;
  out.trajectory.has_components = true;
  auto& tr = out.trajectory;
  tr.time_s.reserve(n);
  tr.current_A.reserve(n);
  tr.voltage_V.reserve(n);
  tr.ocp_V.reserve(n);
  tr.eta_V.assign(n, 0.0);
  tr.phie_V.assign(n, 0.0);
  tr.ir_V.assign(n, 0.0);
  out.soc.reserve(n);
  out.x_neg.reserve(n);
  out.x_pos.reserve(n);
  out.slope_neg.reserve(n);
  out.slope_pos.reserve(n);
  out.charge_As.reserve(n);

  double q = 0.0;  // passed charge, A*s; positive = discharged
  for (size_t k = 1; k <= n; ++k) {
    const double i_k = profile.current_for_sample(k);
    q += i_k * dt;
    const double t_k = static_cast<double>(k) * dt;
    // discharge removes lithium from the negative electrode, inserts into the positive
    const double x_n = xn0 - q / cap_neg;
    const double x_p = xp0 + q / cap_pos;
    const double soc = (x_n - params.negative.stoich_at_0) / soc_window_neg;

    if (options.soft) {
      out.soc_violation += (std::max(0.0, soc - 1.0) + std::max(0.0, -soc)) * dt;
      const auto& on = params.ocp_negative;
      const auto& op = params.ocp_positive;
      out.stoich_violation += (std::max(0.0, x_n - on.x_max()) + std::max(0.0, on.x_min() - x_n) +
                               std::max(0.0, x_p - op.x_max()) + std::max(0.0, op.x_min() - x_p)) *
                              dt;
    } else {
      if (soc < -1e-9 || soc > 1 + 1e-9)
        throw Error("SOC exited [0,1] at t=" + format_sig(t_k) + " s (SOC=" + format_sig(soc) +
                    ")");
      auto check_range = [&](const OcpCurve& c, double x, const char* side) {
        if (x < c.x_min() || x > c.x_max())
          throw Error(std::string(side) + " stoichiometry " + format_sig(x) +
                      " exited the OCP knot range [" + format_sig(c.x_min()) + ", " +
                      format_sig(c.x_max()) + "] at t=" + format_sig(t_k) + " s");
      };
      check_range(params.ocp_negative, x_n, "negative");
      check_range(params.ocp_positive, x_p, "positive");
    }

    const OcpCurve::Eval un = options.soft ? params.ocp_negative.eval_clamped(x_n)
                                           : params.ocp_negative.eval(x_n);
    const OcpCurve::Eval up = options.soft ? params.ocp_positive.eval_clamped(x_p)
                                           : params.ocp_positive.eval(x_p);
    const double v = up.value - un.value;

    tr.time_s.push_back(t_k);
    tr.current_A.push_back(i_k);
    tr.voltage_V.push_back(v);
    tr.ocp_V.push_back(v);
    out.soc.push_back(soc);
    out.x_neg.push_back(x_n);
    out.x_pos.push_back(x_p);
    out.slope_neg.push_back(un.slope);
    out.slope_pos.push_back(up.slope);
    out.charge_As.push_back(q);
    if (k == 1) {
      out.min_voltage_V = out.max_voltage_V = v;
    } else {
      out.min_voltage_V = std::min(out.min_voltage_V, v);
      out.max_voltage_V = std::max(out.max_voltage_V, v);
    }
  }
  return out;
}

inline VoltageTrajectory simulate_ocp_model(const ParameterSet& params,
                                            const ExcitationProfile& profile, double soc0) {
  return run_ocp_model(params, profile, soc0).trajectory;
}

}  // namespace sohkit
