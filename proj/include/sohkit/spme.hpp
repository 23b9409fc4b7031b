#pragma once

// Single particle model with electrolyte dynamics at two fidelities sharing
// one parameter set, electrolyte model, kinetics, and voltage composition:
//
//   - reduced (the estimation model): three-parameter polynomial-profile
//     solid diffusion per electrode — volume-averaged concentration, averaged
//     concentration-flux state, algebraic surface reconstruction;
//   - shells (the data-generation plant): finite-volume radial diffusion with
//     N shells per particle.
//
// The fidelity gap in the solid phase is the structural, input-correlated
// model uncertainty the reference-voltage method is designed to cancel.
//
// Voltage composition (per sample): V = (U_p - U_n) + (eta_p - eta_n) + phi_e
// - I*R_l, with symmetric Butler-Volmer kinetics (inverse-sinh form), a
// two-node electrolyte concentration model (one node per electrode, diffusive
// exchange through the separator), and the electrolyte potential from the
// concentration-ratio log term plus an ohmic electrolyte drop.
//
// Integration: fixed-step explicit RK4, `substeps` steps per sample period;
// current is constant within a sample interval by construction (the sample
// period divides the excitation segment duration).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/trajectory.hpp"
#include "sohkit/uncertainty.hpp"

namespace sohkit {

struct CellState {
  double soc = 0;
  // Reduced: {volume-averaged concentration, averaged flux state} per electrode.
  // Shells: N shell concentrations per electrode. Empty = equilibrated at `soc`.
  std::vector<double> solid_neg, solid_pos;
  // Electrolyte node concentrations, mol/m^3; negative values = initial value
  // from the parameter set.
  double ce_neg = -1, ce_pos = -1;

  static CellState equilibrium(double soc0) {
    CellState s;
    s.soc = soc0;
    return s;
  }
  bool is_equilibrium() const { return solid_neg.empty() && solid_pos.empty(); }
};

enum class SolidFidelity { reduced, shells };

struct SpmeOptions {
  SolidFidelity fidelity = SolidFidelity::reduced;
  int shell_count = 20;  // plant radial shells per particle
  // RK4 steps per sample period; 0 = choose automatically from the stiffest
  // diffusion rate so the explicit integrator stays inside its stability region.
  int substeps = 0;
  bool enforce_voltage_window = true;
};

struct SpmeOutput {
  VoltageTrajectory trajectory;  // model-predicted, with the four-part breakdown
  std::vector<double> soc;
  CellState final_state;
  double min_voltage_V = 0, max_voltage_V = 0;
};

namespace detail {

// Precomputed per-run constants; state vector layout:
//   reduced: [cbar_n, qbar_n, cbar_p, qbar_p, ce_n, ce_p]
//   shells:  [c_n(0..N-1), c_p(0..N-1), ce_n, ce_p]
struct SpmeModel {
  const ParameterSet& p;
  SpmeOptions opt;
  // electrode order: [0] = negative, [1] = positive
  double sign[2];        // surface flux j_i = sign_i * I * jfac_i (j > 0 = delithiation)
  double jfac[2];        // R_p / (3 eps_s A delta F)
  double cmax[2];
  double diff[2];
  double radius[2];
  double rate[2];
  const OcpCurve* ocp[2];
  double stoich_cap[2];  // F A delta c_max eps_s, A*s per unit stoichiometry
  // electrolyte
  double vol_e[2];       // pore volume per electrode node, m^3
  double exchange;       // diffusive exchange conductance G_e, m^3/s
  double resist_e;       // lumped electrolyte ohmic resistance, ohm
  double src_e;          // (1 - t_plus)/F, mol/C
  double thermal;        // 2RT/F, V
  // shells geometry
  int nshell = 0;
  double dr[2];
  std::vector<double> cell_vol[2];  // (r_{i+1}^3 - r_i^3)/3 per shell
  double surf_r2[2];                // R^2 (outer face area / 4pi)
  std::vector<double> face_r2[2];   // r_f^2 for interior faces f = 1..N-1

  SpmeModel(const ParameterSet& params, const SpmeOptions& options) : p(params), opt(options) {
    const double faraday = ParameterSet::faraday;
    const ElectrodeParams* el[2] = {&p.negative, &p.positive};
    sign[0] = +1.0;  // discharge delithiates the negative electrode
    sign[1] = -1.0;  // ... and lithiates the positive electrode
    ocp[0] = &p.ocp_negative;
    ocp[1] = &p.ocp_positive;
    for (int e = 0; e < 2; ++e) {
      jfac[e] = el[e]->particle_radius_m /
                (3.0 * el[e]->active_volume_fraction * el[e]->area_m2 * el[e]->thickness_m *
                 faraday);
      cmax[e] = el[e]->max_concentration_mol_m3;
      diff[e] = el[e]->diffusivity_m2_s;
      radius[e] = el[e]->particle_radius_m;
      rate[e] = el[e]->reaction_rate_constant;
      stoich_cap[e] = el[e]->stoich_capacity_As(faraday);
    }
    const auto& ly = p.electrolyte;
    vol_e[0] = p.negative.area_m2 * p.negative.thickness_m * ly.porosity_negative;
    vol_e[1] = p.positive.area_m2 * p.positive.thickness_m * ly.porosity_positive;
    const double sep_eff = std::pow(ly.porosity_separator, 1.5);
    exchange = ly.diffusivity_m2_s * sep_eff * p.negative.area_m2 /
               (ly.separator_thickness_m +
                0.5 * (p.negative.thickness_m + p.positive.thickness_m));
    const double k_neg_eff = ly.conductivity_S_m * std::pow(ly.porosity_negative, 1.5);
    const double k_pos_eff = ly.conductivity_S_m * std::pow(ly.porosity_positive, 1.5);
    const double k_sep_eff = ly.conductivity_S_m * sep_eff;
    resist_e = (p.negative.thickness_m / (2.0 * k_neg_eff) +
                ly.separator_thickness_m / k_sep_eff +
                p.positive.thickness_m / (2.0 * k_pos_eff)) /
               p.negative.area_m2;
    src_e = (1.0 - ly.transference_number) / faraday;
    thermal = 2.0 * constants::gas_J_per_mol_K * p.temperature_K / faraday;

    if (opt.fidelity == SolidFidelity::shells) {
      nshell = opt.shell_count;
      if (nshell < 3) throw Error("plant shell_count must be >= 3");
      for (int e = 0; e < 2; ++e) {
        dr[e] = radius[e] / nshell;
        cell_vol[e].resize(nshell);
        face_r2[e].resize(nshell);  // index f = face between shells f-1 and f
        for (int i = 0; i < nshell; ++i) {
          const double r0 = dr[e] * i, r1 = dr[e] * (i + 1);
          cell_vol[e][i] = (r1 * r1 * r1 - r0 * r0 * r0) / 3.0;
          face_r2[e][i] = r0 * r0;
        }
        surf_r2[e] = radius[e] * radius[e];
      }
    }
  }

  int state_size() const {
    return opt.fidelity == SolidFidelity::reduced ? 6 : 2 * nshell + 2;
  }

  int solid_offset(int e) const {
    return opt.fidelity == SolidFidelity::reduced ? 2 * e : nshell * e;
  }

  int ce_offset() const { return state_size() - 2; }

  void init_state(const CellState& s0, std::vector<double>& y) const {
    y.assign(state_size(), 0.0);
    const double x0[2] = {
        p.negative.stoich_at_0 + (p.negative.stoich_at_100 - p.negative.stoich_at_0) * s0.soc,
        p.positive.stoich_at_0 + (p.positive.stoich_at_100 - p.positive.stoich_at_0) * s0.soc};
    if (s0.is_equilibrium()) {
      if (!(s0.soc >= 0 && s0.soc <= 1)) throw Error("initial SOC out of [0,1]");
      for (int e = 0; e < 2; ++e) {
        const double c = x0[e] * cmax[e];
        if (opt.fidelity == SolidFidelity::reduced) {
          y[solid_offset(e) + 0] = c;  // cbar
          y[solid_offset(e) + 1] = 0;  // qbar (no internal gradient at rest)
        } else {
          for (int i = 0; i < nshell; ++i) y[solid_offset(e) + i] = c;
        }
      }
    } else {
      const std::vector<double>* src[2] = {&s0.solid_neg, &s0.solid_pos};
      const size_t want = opt.fidelity == SolidFidelity::reduced
                              ? 2
                              : static_cast<size_t>(nshell);
      for (int e = 0; e < 2; ++e) {
        if (src[e]->size() != want)
          throw Error("cell state solid vector size does not match the simulator fidelity");
        for (size_t i = 0; i < want; ++i) y[solid_offset(e) + static_cast<int>(i)] = (*src[e])[i];
      }
    }
    y[ce_offset() + 0] =
        s0.ce_neg >= 0 ? s0.ce_neg : p.electrolyte.initial_concentration_mol_m3;
    y[ce_offset() + 1] =
        s0.ce_pos >= 0 ? s0.ce_pos : p.electrolyte.initial_concentration_mol_m3;
  }

  void deriv(const std::vector<double>& y, double current, std::vector<double>& dy) const {
    for (int e = 0; e < 2; ++e) {
      const double j = sign[e] * current * jfac[e];
      const int off = solid_offset(e);
      if (opt.fidelity == SolidFidelity::reduced) {
        dy[off + 0] = -3.0 * j / radius[e];
        dy[off + 1] = -30.0 * diff[e] / (radius[e] * radius[e]) * y[off + 1] -
                      45.0 / (2.0 * radius[e] * radius[e]) * j;
      } else {
        // finite-volume radial diffusion; interior faces by Fick's law, outer
        // face from the surface flux boundary condition
        double flow_in = 0.0;  // outward molar flow (/4pi) through the inner face
        for (int i = 0; i < nshell; ++i) {
          const double flow_out =
              i + 1 < nshell
                  ? diff[e] * (y[off + i] - y[off + i + 1]) / dr[e] * face_r2[e][i + 1]
                  : j * surf_r2[e];
          dy[off + i] = (flow_in - flow_out) / cell_vol[e][i];
          flow_in = flow_out;
        }
      }
    }
    const int ce = ce_offset();
    const double ex = exchange * (y[ce + 0] - y[ce + 1]);
    dy[ce + 0] = (src_e * current - ex) / vol_e[0];
    dy[ce + 1] = (-src_e * current + ex) / vol_e[1];
  }

  double surface_concentration(const std::vector<double>& y, double current, int e) const {
    const double j = sign[e] * current * jfac[e];
    const int off = solid_offset(e);
    if (opt.fidelity == SolidFidelity::reduced)
      return y[off + 0] + 8.0 * radius[e] * y[off + 1] / 35.0 -
             radius[e] * j / (35.0 * diff[e]);
    return y[off + nshell - 1] - j * dr[e] / (2.0 * diff[e]);
  }

  // Volume-averaged solid concentration (for SOC bookkeeping and checks).
  double mean_concentration(const std::vector<double>& y, int e) const {
    const int off = solid_offset(e);
    if (opt.fidelity == SolidFidelity::reduced) return y[off + 0];
    double total = 0.0, vol = 0.0;
    for (int i = 0; i < nshell; ++i) {
      total += cell_vol[e][i] * y[off + i];
      vol += cell_vol[e][i];
    }
    return total / vol;
  }

  struct VoltageParts {
    double ocp, eta, phie, ir;
    double value() const { return ocp + eta + phie + ir; }
  };

  VoltageParts voltage(const std::vector<double>& y, double current, double t_s) const {
    const double faraday = ParameterSet::faraday;
    double u[2], eta[2];
    for (int e = 0; e < 2; ++e) {
      const double cse = surface_concentration(y, current, e);
      const double x = cse / cmax[e];
      if (x < ocp[e]->x_min() || x > ocp[e]->x_max())
        throw Error(std::string(e == 0 ? "negative" : "positive") + " surface stoichiometry " +
                    format_sig(x) + " exited the OCP knot range at t=" + format_sig(t_s) + " s");
      u[e] = ocp[e]->eval(x).value;
      const double ce_node = y[ce_offset() + e];
      if (!(ce_node > 0))
        throw Error("electrolyte concentration depleted at t=" + format_sig(t_s) + " s");
      const double i0 = faraday * rate[e] * std::sqrt(ce_node * cse * (cmax[e] - cse));
      const double j = sign[e] * current * jfac[e];
      eta[e] = thermal * std::asinh(faraday * j / (2.0 * i0));
    }
    VoltageParts parts;
    parts.ocp = u[1] - u[0];
    parts.eta = eta[1] - eta[0];
    parts.phie = thermal * (1.0 - p.electrolyte.transference_number) *
                     std::log(y[ce_offset() + 1] / y[ce_offset() + 0]) -
                 current * resist_e;
    parts.ir = -current * p.lumped_resistance_ohm;
    return parts;
  }

  // Largest decay rate (1/s) among the linear sub-dynamics; RK4 on a real pole
  // lambda is stable for h*lambda < 2.785, so substeps are sized against this.
  double stiffest_rate() const {
    double rate_max = 0.0;
    for (int e = 0; e < 2; ++e) {
      const double r2 = radius[e] * radius[e];
      if (opt.fidelity == SolidFidelity::reduced)
        rate_max = std::max(rate_max, 30.0 * diff[e] / r2);
      else
        rate_max = std::max(rate_max, 4.0 * diff[e] / (dr[e] * dr[e]));
    }
    rate_max = std::max(rate_max, exchange * (1.0 / vol_e[0] + 1.0 / vol_e[1]));
    return rate_max;
  }

  void check_solid_bounds(const std::vector<double>& y, double t_s) const {
    const int per = opt.fidelity == SolidFidelity::reduced ? 1 : nshell;
    for (int e = 0; e < 2; ++e) {
      const int off = solid_offset(e);
      for (int i = 0; i < per; ++i) {
        const double c = y[off + i];
        if (!(c >= 0 && c <= cmax[e]))
          throw Error("solid concentration out of [0, c_max] at t=" + format_sig(t_s) +
                      " s — integrator step too large or excitation outside the model's range");
      }
    }
  }
};

}  // namespace detail

inline SpmeOutput run_spme(const ParameterSet& params, const ExcitationProfile& profile,
                           const CellState& state0, const SpmeOptions& options = {}) {
  ExcitationProfile::validate(profile);
  if (options.substeps < 0) throw Error("substeps must be >= 0 (0 = automatic)");
  const detail::SpmeModel model(params, options);

  std::vector<double> y;
  model.init_state(state0, y);
  const size_t nstate = y.size();
  std::vector<double> k1(nstate), k2(nstate), k3(nstate), k4(nstate), tmp(nstate);

  const double dt = profile.sample_period_s;
  int substeps = options.substeps;
  if (substeps == 0)  // target h * lambda_max <= 1: well inside RK4 stability
    substeps = std::max(1, static_cast<int>(std::ceil(model.stiffest_rate() * dt)));
  const double h = dt / substeps;
  const size_t n = profile.sample_count();

  SpmeOutput out;
  auto& tr = out.trajectory;
  tr.sample_period_s = dt;
  tr.provenance = Provenance::model_predicted;
  tr.has_components = true;
  tr.time_s.reserve(n);
  tr.current_A.reserve(n);
  tr.voltage_V.reserve(n);
  tr.ocp_V.reserve(n);
  tr.eta_V.reserve(n);
  tr.phie_V.reserve(n);
  tr.ir_V.reserve(n);
  out.soc.reserve(n);

  const double beta0 = params.negative.stoich_at_0;
  const double window = params.negative.stoich_at_100 - beta0;

  for (size_t k = 1; k <= n; ++k) {
    const double i_k = profile.current_for_sample(k);
    for (int s = 0; s < substeps; ++s) {
      model.deriv(y, i_k, k1);
      for (size_t i = 0; i < nstate; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
      model.deriv(tmp, i_k, k2);
      for (size_t i = 0; i < nstate; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
      model.deriv(tmp, i_k, k3);
      for (size_t i = 0; i < nstate; ++i) tmp[i] = y[i] + h * k3[i];
      model.deriv(tmp, i_k, k4);
      for (size_t i = 0; i < nstate; ++i)
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    const double t_k = static_cast<double>(k) * dt;
    model.check_solid_bounds(y, t_k);
    const auto parts = model.voltage(y, i_k, t_k);
    const double v = parts.value();
    if (options.enforce_voltage_window && (v < params.voltage_min_V || v > params.voltage_max_V))
      throw Error("voltage " + format_sig(v) + " V exited the safety window [" +
                  format_sig(params.voltage_min_V) + ", " + format_sig(params.voltage_max_V) +
                  "] V at t=" + format_sig(t_k) + " s");

    tr.time_s.push_back(t_k);
    tr.current_A.push_back(i_k);
    tr.voltage_V.push_back(v);
    tr.ocp_V.push_back(parts.ocp);
    tr.eta_V.push_back(parts.eta);
    tr.phie_V.push_back(parts.phie);
    tr.ir_V.push_back(parts.ir);
    out.soc.push_back((model.mean_concentration(y, 0) / model.cmax[0] - beta0) / window);
    if (k == 1) {
      out.min_voltage_V = out.max_voltage_V = v;
    } else {
      out.min_voltage_V = std::min(out.min_voltage_V, v);
      out.max_voltage_V = std::max(out.max_voltage_V, v);
    }
  }

  out.final_state.soc = out.soc.empty() ? state0.soc : out.soc.back();
  const int per = options.fidelity == SolidFidelity::reduced ? 2 : options.shell_count;
  out.final_state.solid_neg.assign(y.begin() + model.solid_offset(0),
                                   y.begin() + model.solid_offset(0) + per);
  out.final_state.solid_pos.assign(y.begin() + model.solid_offset(1),
                                   y.begin() + model.solid_offset(1) + per);
  out.final_state.ce_neg = y[model.ce_offset() + 0];
  out.final_state.ce_pos = y[model.ce_offset() + 1];
  return out;
}

// Estimation-model fidelity (reduced solid diffusion).
inline VoltageTrajectory simulate_spme(const ParameterSet& params,
                                       const ExcitationProfile& profile,
                                       const CellState& state0, const SpmeOptions& options = {}) {
  SpmeOptions opt = options;
  opt.fidelity = SolidFidelity::reduced;
  return run_spme(params, profile, state0, opt).trajectory;
}

// Plant fidelity (shell-resolved solid diffusion) with injected uncertainty;
// the result is "measured" data: plant provenance, no composition breakdown.
inline VoltageTrajectory simulate_plant(const ParameterSet& params,
                                        const ExcitationProfile& profile,
                                        const CellState& state0, const UncertaintySpec& unc,
                                        const SpmeOptions& options = {}) {
  SpmeOptions opt = options;
  opt.fidelity = SolidFidelity::shells;
  const SpmeOutput clean = run_spme(params, profile, state0, opt);
  return apply_uncertainty(clean.trajectory, unc);
}

}  // namespace sohkit
