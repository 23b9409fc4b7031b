#pragma once

// Chain-rule sensitivities of the OCP-model voltage to the four health
// parameters. The OCP model (not the full dynamic model) supplies the
// sensitivities by design: its surface stoichiometry is an explicit function
// of the passed charge, so the partial derivatives are closed-form products
// of the OCP slope and a charge-dependent factor.
//
// Column order matches HealthVector: (eps_s_pos, eps_s_neg, beta_pos_0,
// beta_neg_0). With q(t) the passed charge and n_i = F A_i delta_i c_max,i
// eps_i the electrode stoichiometry capacity:
//
//   dV/d eps_p   = -U_p'(x_p) * q(t) / (n_p * eps_p)
//   dV/d eps_n   = -U_n'(x_n) * q(t) / (n_n * eps_n)
//   dV/d beta_p0 = +U_p'(x_p) * (1 - SOC0)
//   dV/d beta_n0 = -U_n'(x_n) * (1 - SOC0)
//
// The beta factor is evaluated at the initial SOC: differentiating the
// Coulomb-counting map exactly gives a constant (1 - SOC0) — the
// beta-dependence of the SOC trajectory cancels against the window width.
// A running-SOC variant, which substitutes (1 - SOC(t)), is kept behind
// SensitivityConvention::running_soc for comparison studies; it does not
// match finite differences of the simulator and is not the default.

#include <vector>

#include <Eigen/Dense>

#include "sohkit/excitation.hpp"
#include "sohkit/ocp_model.hpp"
#include "sohkit/parameters.hpp"

namespace sohkit {

enum class SensitivityConvention { initial_soc, running_soc };

struct SensitivityTrajectory {
  std::vector<double> time_s;
  // one row per sample; columns ordered as HealthVector::names()
  Eigen::Matrix<double, Eigen::Dynamic, 4> rows;
};

inline SensitivityTrajectory sensitivities_from_ocp_output(
    const ParameterSet& params, const OcpOutput& sim, double soc0,
    SensitivityConvention convention = SensitivityConvention::initial_soc) {
  const size_t n = sim.trajectory.size();
  SensitivityTrajectory s;
  s.time_s = sim.trajectory.time_s;
  s.rows.resize(static_cast<Eigen::Index>(n), 4);
  const double cap_pos = params.positive.stoich_capacity_As(ParameterSet::faraday);
  const double cap_neg = params.negative.stoich_capacity_As(ParameterSet::faraday);
  const double eps_p = params.positive.active_volume_fraction;
  const double eps_n = params.negative.active_volume_fraction;
  for (size_t k = 0; k < n; ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double q = sim.charge_As[k];
    const double up = sim.slope_pos[k];
    const double un = sim.slope_neg[k];
    const double soc_factor =
        convention == SensitivityConvention::initial_soc ? 1.0 - soc0 : 1.0 - sim.soc[k];
    s.rows(i, 0) = -up * q / (cap_pos * eps_p);
    s.rows(i, 1) = -un * q / (cap_neg * eps_n);
    s.rows(i, 2) = up * soc_factor;
    s.rows(i, 3) = -un * soc_factor;
  }
  return s;
}

inline SensitivityTrajectory sensitivities_ocp(
    const ParameterSet& params, const ExcitationProfile& profile, double soc0,
    SensitivityConvention convention = SensitivityConvention::initial_soc) {
  const OcpOutput sim = run_ocp_model(params, profile, soc0);
  return sensitivities_from_ocp_output(params, sim, soc0, convention);
}

}  // namespace sohkit
