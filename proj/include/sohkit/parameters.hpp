#pragma once

// Cell parameterization: electrode/electrolyte parameter structs, the
// four-component health vector targeted by estimation, degradation scenarios,
// and JSON load/save with strict validation (bad values are rejected with the
// field name and the violated bound, never clamped).
//
// Sign conventions documented here once, relied on everywhere:
//   - current I > 0 discharges the cell;
//   - the negative electrode lithiates on charge: stoich_at_0 < stoich_at_100;
//   - the positive electrode delithiates on charge: stoich_at_0 > stoich_at_100;
//   - SOC is defined on the negative electrode stoichiometry window and mapped
//     to the positive electrode by charge balance.

#include <array>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sohkit/common.hpp"
#include "sohkit/ocp_curve.hpp"

namespace sohkit {

struct ElectrodeParams {
  double area_m2 = 0;
  double thickness_m = 0;
  double max_concentration_mol_m3 = 0;
  double active_volume_fraction = 0;  // eps_s
  double stoich_at_0 = 0;             // beta_0%
  double stoich_at_100 = 0;           // beta_100%
  double particle_radius_m = 0;
  double diffusivity_m2_s = 0;
  double reaction_rate_constant = 0;  // m^2.5 mol^-0.5 s^-1 (Butler-Volmer prefactor)

  // Charge (A*s) that moves this electrode's stoichiometry by 1.0.
  double stoich_capacity_As(double faraday) const {
    return faraday * area_m2 * thickness_m * max_concentration_mol_m3 * active_volume_fraction;
  }
  // Usable electrode capacity over its stoichiometry window, A*s.
  double window_capacity_As(double faraday) const {
    return stoich_capacity_As(faraday) * std::abs(stoich_at_100 - stoich_at_0);
  }
};

struct ElectrolyteParams {
  double initial_concentration_mol_m3 = 0;
  double diffusivity_m2_s = 0;
  double transference_number = 0;
  double conductivity_S_m = 0;
  double porosity_negative = 0;
  double porosity_positive = 0;
  double porosity_separator = 0;
  double separator_thickness_m = 0;
};

struct ParameterSet {
  std::string name;
  double temperature_K = 298.15;
  double nominal_capacity_Ah = 0;
  double voltage_min_V = 0;
  double voltage_max_V = 0;
  double lumped_resistance_ohm = 0;  // R_l
  ElectrodeParams positive, negative;
  ElectrolyteParams electrolyte;
  OcpCurve ocp_positive, ocp_negative;
  // OCP table file names as written in the parameter file (kept for re-save).
  std::string ocp_positive_source, ocp_negative_source;

  static constexpr double faraday = constants::faraday_C_per_mol;

  // Current that discharges the nominal capacity in one hour (the 1C rate), A.
  double one_c_current_A() const { return nominal_capacity_Ah; }
};

// The joint estimation target, in the fixed ordering used by sensitivity
// columns, Fisher matrices, and reports.
struct HealthVector {
  double eps_s_pos = 0;   // positive active material volume fraction
  double eps_s_neg = 0;   // negative active material volume fraction
  double beta_pos_0 = 0;  // positive stoichiometry at 0% SOC
  double beta_neg_0 = 0;  // negative stoichiometry at 0% SOC

  std::array<double, 4> as_array() const { return {eps_s_pos, eps_s_neg, beta_pos_0, beta_neg_0}; }
  static HealthVector from_array(const std::array<double, 4>& a) {
    return {a[0], a[1], a[2], a[3]};
  }
  static const std::array<std::string, 4>& names() {
    static const std::array<std::string, 4> n = {"eps_s_pos", "eps_s_neg", "beta_pos_0",
                                                 "beta_neg_0"};
    return n;
  }
};

struct DegradationScenario {
  std::string label;
  std::array<double, 4> ratios{1, 1, 1, 1};  // multipliers on the BOL HealthVector
};

namespace detail {

inline void check(bool ok, const std::string& message) {
  if (!ok) throw Error(message);
}

inline void validate_electrode(const ElectrodeParams& e, const std::string& side,
                               bool beta0_below_beta100) {
  check(e.area_m2 > 0, side + ".area_m2 must be > 0");
  check(e.thickness_m > 0, side + ".thickness_m must be > 0");
  check(e.particle_radius_m > 0, side + ".particle_radius_m must be > 0");
  check(e.max_concentration_mol_m3 > 0, side + ".max_concentration_mol_m3 must be > 0");
  check(e.diffusivity_m2_s > 0, side + ".solid_diffusivity_m2_s must be > 0");
  check(e.reaction_rate_constant > 0, side + ".reaction_rate_constant must be > 0");
  check(e.active_volume_fraction > 0 && e.active_volume_fraction < 1,
        side + ".active_volume_fraction out of (0,1)");
  check(e.stoich_at_0 >= 0 && e.stoich_at_0 <= 1, side + ".stoich_at_0_soc out of [0,1]");
  check(e.stoich_at_100 >= 0 && e.stoich_at_100 <= 1, side + ".stoich_at_100_soc out of [0,1]");
  check(e.stoich_at_0 != e.stoich_at_100,
        side + ": degenerate stoichiometry window (stoich_at_0_soc == stoich_at_100_soc)");
  if (beta0_below_beta100)
    check(e.stoich_at_0 < e.stoich_at_100,
          side + ": negative electrode requires stoich_at_0_soc < stoich_at_100_soc");
  else
    check(e.stoich_at_0 > e.stoich_at_100,
          side + ": positive electrode requires stoich_at_0_soc > stoich_at_100_soc");
}

}  // namespace detail

inline void validate(const ParameterSet& p) {
  using detail::check;
  detail::validate_electrode(p.negative, "negative", /*beta0_below_beta100=*/true);
  detail::validate_electrode(p.positive, "positive", /*beta0_below_beta100=*/false);
  check(p.lumped_resistance_ohm >= 0, "contact_resistance_ohm must be >= 0");
  check(p.temperature_K > 0, "temperature_K must be > 0");
  check(p.nominal_capacity_Ah > 0, "nominal_capacity_Ah must be > 0");
  check(p.voltage_min_V < p.voltage_max_V, "voltage window degenerate: voltage_min_V >= voltage_max_V");
  const auto& el = p.electrolyte;
  check(el.initial_concentration_mol_m3 > 0, "electrolyte.initial_concentration_mol_m3 must be > 0");
  check(el.diffusivity_m2_s > 0, "electrolyte.diffusivity_m2_s must be > 0");
  check(el.transference_number > 0 && el.transference_number < 1,
        "electrolyte.transference_number out of (0,1)");
  check(el.conductivity_S_m > 0, "electrolyte.conductivity_S_m must be > 0");
  check(el.porosity_negative > 0 && el.porosity_negative < 1,
        "electrolyte.porosity_negative out of (0,1)");
  check(el.porosity_positive > 0 && el.porosity_positive < 1,
        "electrolyte.porosity_positive out of (0,1)");
  check(el.porosity_separator > 0 && el.porosity_separator < 1,
        "electrolyte.porosity_separator out of (0,1)");
  check(el.separator_thickness_m > 0, "electrolyte.separator_thickness_m must be > 0");
  for (const ElectrodeParams* e : {&p.negative, &p.positive})
    check(std::isfinite(e->window_capacity_As(ParameterSet::faraday)) &&
              e->window_capacity_As(ParameterSet::faraday) > 0,
          "electrode window capacity must be finite and positive");
}

inline HealthVector extract_health(const ParameterSet& p) {
  return {p.positive.active_volume_fraction, p.negative.active_volume_fraction,
          p.positive.stoich_at_0, p.negative.stoich_at_0};
}

// Returns a copy of `p` with the four health fields replaced; everything else
// is untouched. Validates the result.
inline ParameterSet with_health(ParameterSet p, const HealthVector& h) {
  p.positive.active_volume_fraction = h.eps_s_pos;
  p.negative.active_volume_fraction = h.eps_s_neg;
  p.positive.stoich_at_0 = h.beta_pos_0;
  p.negative.stoich_at_0 = h.beta_neg_0;
  validate(p);
  return p;
}

inline ParameterSet apply_degradation(const ParameterSet& bol, const DegradationScenario& s) {
  for (size_t i = 0; i < 4; ++i)
    detail::check(s.ratios[i] > 0 && s.ratios[i] <= 1,
                  "degradation scenario '" + s.label + "': ratio for " + HealthVector::names()[i] +
                      " out of (0,1]");
  const HealthVector h = extract_health(bol);
  const auto a = h.as_array();
  HealthVector degraded = HealthVector::from_array(
      {a[0] * s.ratios[0], a[1] * s.ratios[1], a[2] * s.ratios[2], a[3] * s.ratios[3]});
  return with_health(bol, degraded);
}

// Bundled degradation levels: mild / moderate / severe combined loss of
// active material (eps_s) and lithium inventory (beta_0%).
inline std::vector<DegradationScenario> standard_degradation_levels() {
  return {{"5pct", {0.95, 0.95, 0.975, 0.975}},
          {"10pct", {0.90, 0.90, 0.95, 0.95}},
          {"20pct", {0.80, 0.80, 0.95, 0.95}}};
}

inline const DegradationScenario& find_scenario(const std::vector<DegradationScenario>& all,
                                                const std::string& label) {
  for (const auto& s : all)
    if (s.label == label) return s;
  throw Error("unknown degradation scenario label: " + label);
}

namespace detail {

inline double get_number(const nlohmann::json& j, const std::string& key,
                         const std::string& context) {
  if (!j.contains(key)) throw Error("parameter file missing field: " + context + key);
  const auto& v = j.at(key);
  if (!v.is_number()) throw Error("parameter field is not a number: " + context + key);
  return v.get<double>();
}

inline std::string get_string(const nlohmann::json& j, const std::string& key,
                              const std::string& context) {
  if (!j.contains(key)) throw Error("parameter file missing field: " + context + key);
  const auto& v = j.at(key);
  if (!v.is_string()) throw Error("parameter field is not a string: " + context + key);
  return v.get<std::string>();
}

inline ElectrodeParams load_electrode(const nlohmann::json& j, double shared_area,
                                      const std::string& side) {
  ElectrodeParams e;
  const std::string ctx = side + ".";
  e.area_m2 = shared_area;
  e.thickness_m = get_number(j, "thickness_m", ctx);
  e.particle_radius_m = get_number(j, "particle_radius_m", ctx);
  e.active_volume_fraction = get_number(j, "active_volume_fraction", ctx);
  e.max_concentration_mol_m3 = get_number(j, "max_concentration_mol_m3", ctx);
  e.diffusivity_m2_s = get_number(j, "solid_diffusivity_m2_s", ctx);
  e.reaction_rate_constant = get_number(j, "reaction_rate_constant", ctx);
  e.stoich_at_0 = get_number(j, "stoich_at_0_soc", ctx);
  e.stoich_at_100 = get_number(j, "stoich_at_100_soc", ctx);
  return e;
}

}  // namespace detail

inline ParameterSet load_parameter_set(const std::string& path,
                                       OcpInterpolation ocp_rule = OcpInterpolation::monotone_cubic) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path), nullptr, /*allow_exceptions=*/true,
                              /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw Error("cannot parse parameter file " + path + ": " + e.what());
  }
  using detail::get_number;
  using detail::get_string;
  ParameterSet p;
  p.name = j.value("name", std::string("unnamed"));
  p.temperature_K = get_number(j, "temperature_K", "");
  p.nominal_capacity_Ah = get_number(j, "nominal_capacity_Ah", "");
  p.voltage_min_V = get_number(j, "voltage_min_V", "");
  p.voltage_max_V = get_number(j, "voltage_max_V", "");
  p.lumped_resistance_ohm = get_number(j, "contact_resistance_ohm", "");
  const double area = get_number(j, "electrode_area_m2", "");
  if (!j.contains("negative") || !j.contains("positive") || !j.contains("electrolyte"))
    throw Error("parameter file missing field: negative/positive/electrolyte section");
  p.negative = detail::load_electrode(j.at("negative"), area, "negative");
  p.positive = detail::load_electrode(j.at("positive"), area, "positive");

  const auto& je = j.at("electrolyte");
  auto& el = p.electrolyte;
  el.initial_concentration_mol_m3 = get_number(je, "initial_concentration_mol_m3", "electrolyte.");
  el.diffusivity_m2_s = get_number(je, "diffusivity_m2_s", "electrolyte.");
  el.transference_number = get_number(je, "transference_number", "electrolyte.");
  el.conductivity_S_m = get_number(je, "conductivity_S_m", "electrolyte.");
  el.porosity_negative = get_number(je, "porosity_negative", "electrolyte.");
  el.porosity_positive = get_number(je, "porosity_positive", "electrolyte.");
  el.porosity_separator = get_number(je, "porosity_separator", "electrolyte.");
  el.separator_thickness_m = get_number(je, "separator_thickness_m", "electrolyte.");

  p.ocp_negative_source = get_string(j.at("negative"), "ocp_table", "negative.");
  p.ocp_positive_source = get_string(j.at("positive"), "ocp_table", "positive.");
  const auto dir = std::filesystem::path(path).parent_path();
  p.ocp_negative = OcpCurve::from_csv((dir / p.ocp_negative_source).string(), "negative", ocp_rule);
  p.ocp_positive = OcpCurve::from_csv((dir / p.ocp_positive_source).string(), "positive", ocp_rule);

  validate(p);
  return p;
}

// Writes the same schema load_parameter_set reads (without comments). OCP
// table references are carried through; the tables themselves are not
// rewritten. load -> save -> load is field-for-field idempotent because JSON
// numbers round-trip doubles exactly.
inline void save_parameter_set(const ParameterSet& p, const std::string& path) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["temperature_K"] = p.temperature_K;
  j["nominal_capacity_Ah"] = p.nominal_capacity_Ah;
  j["voltage_min_V"] = p.voltage_min_V;
  j["voltage_max_V"] = p.voltage_max_V;
  j["electrode_area_m2"] = p.negative.area_m2;
  j["contact_resistance_ohm"] = p.lumped_resistance_ohm;
  auto dump_electrode = [](const ElectrodeParams& e, const std::string& ocp_source) {
    nlohmann::ordered_json je;
    je["thickness_m"] = e.thickness_m;
    je["particle_radius_m"] = e.particle_radius_m;
    je["active_volume_fraction"] = e.active_volume_fraction;
    je["max_concentration_mol_m3"] = e.max_concentration_mol_m3;
    je["solid_diffusivity_m2_s"] = e.diffusivity_m2_s;
    je["reaction_rate_constant"] = e.reaction_rate_constant;
    je["stoich_at_0_soc"] = e.stoich_at_0;
    je["stoich_at_100_soc"] = e.stoich_at_100;
    je["ocp_table"] = ocp_source;
    return je;
  };
  j["negative"] = dump_electrode(p.negative, p.ocp_negative_source);
  j["positive"] = dump_electrode(p.positive, p.ocp_positive_source);
  nlohmann::ordered_json je;
  je["initial_concentration_mol_m3"] = p.electrolyte.initial_concentration_mol_m3;
  je["diffusivity_m2_s"] = p.electrolyte.diffusivity_m2_s;
  je["transference_number"] = p.electrolyte.transference_number;
  je["conductivity_S_m"] = p.electrolyte.conductivity_S_m;
  je["porosity_negative"] = p.electrolyte.porosity_negative;
  je["porosity_positive"] = p.electrolyte.porosity_positive;
  je["porosity_separator"] = p.electrolyte.porosity_separator;
  je["separator_thickness_m"] = p.electrolyte.separator_thickness_m;
  j["electrolyte"] = je;
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace sohkit
