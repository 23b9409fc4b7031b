#pragma once

// Experiment orchestration: a plan file names a parameter set, degradation
// scenarios, excitation sources, and estimation modes; running the plan
// simulates measured data for every (scenario, excitation) pair on the
// chosen plant fidelity, runs the estimator for every mode, persists every
// trajectory and result, and assembles the report table. Outputs are fully
// determined by the plan plus its master seed: every random draw uses a seed
// derived as
//   aged measurement  (scenario i, excitation j): derive_seed(master, {1, i, j})
//   nominal reference (scenario i, excitation j): derive_seed(master, {2, i, j})
//   Monte Carlo replicate r:  aged derive_seed(seed, {3, r}), reference {4, r}
// and parallel workers only ever fill per-item slots, so result bytes are
// independent of thread count and scheduling. Individual cell failures are
// recorded in the table and result files; the plan always runs to the end.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sohkit/design.hpp"
#include "sohkit/estimation.hpp"
#include "sohkit/excitation.hpp"
#include "sohkit/fisher.hpp"
#include "sohkit/ocp_model.hpp"
#include "sohkit/parallel.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/report.hpp"
#include "sohkit/sensitivity.hpp"
#include "sohkit/spme.hpp"
#include "sohkit/trajectory.hpp"
#include "sohkit/uncertainty.hpp"

namespace sohkit {

enum class PlantFidelity { shells, reduced, ocp };

inline PlantFidelity plant_fidelity_from_string(const std::string& s) {
  if (s == "shells") return PlantFidelity::shells;
  if (s == "reduced") return PlantFidelity::reduced;
  if (s == "ocp") return PlantFidelity::ocp;
  throw Error("unknown plant fidelity '" + s + "' (expected shells, reduced, or ocp)");
}

inline std::string to_string(PlantFidelity p) {
  switch (p) {
    case PlantFidelity::shells: return "shells";
    case PlantFidelity::reduced: return "reduced";
    case PlantFidelity::ocp: return "ocp";
  }
  return "unknown";
}

struct ExcitationSource {
  std::string label;
  ExcitationProfile profile;
};

struct ExperimentPlan {
  std::string params_path;
  std::vector<DegradationScenario> scenarios;
  std::vector<ExcitationSource> excitations;
  std::vector<EstimationMode> modes;
  PlantFidelity plant = PlantFidelity::shells;
  EstimationModel estimation_model = EstimationModel::spme;
  UncertaintySpec uncertainty;  // its rng_seed field is ignored: the master seed governs
  std::uint64_t master_seed = 0;
  int monte_carlo_replicates = 0;  // advisory defaults for the monte-carlo entry point
  std::uint64_t monte_carlo_seed = 0;
  std::string output_dir = "out";
  unsigned threads = 0;  // 0 = hardware concurrency
  double initial_soc = 0;

  static void validate(const ExperimentPlan& p) {
    if (p.params_path.empty()) throw Error("experiment plan names no parameter file");
    if (p.scenarios.empty()) throw Error("experiment plan has no degradation scenarios");
    if (p.excitations.empty()) throw Error("experiment plan has no excitations");
    if (p.modes.empty()) throw Error("experiment plan has no estimation modes");
    auto check_label = [](const std::string& label, const char* kind) {
      if (label.empty()) throw Error(std::string(kind) + " label is empty");
      for (char c : label) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '-';
        if (!ok)
          throw Error(std::string(kind) + " label '" + label +
                      "' may only contain letters, digits, '_' and '-'");
      }
    };
    for (size_t i = 0; i < p.scenarios.size(); ++i) {
      check_label(p.scenarios[i].label, "scenario");
      for (size_t j = i + 1; j < p.scenarios.size(); ++j)
        if (p.scenarios[i].label == p.scenarios[j].label)
          throw Error("duplicate scenario label '" + p.scenarios[i].label + "'");
    }
    for (size_t i = 0; i < p.excitations.size(); ++i) {
      check_label(p.excitations[i].label, "excitation");
      ExcitationProfile::validate(p.excitations[i].profile);
      for (size_t j = i + 1; j < p.excitations.size(); ++j)
        if (p.excitations[i].label == p.excitations[j].label)
          throw Error("duplicate excitation label '" + p.excitations[i].label + "'");
    }
    for (size_t i = 0; i < p.modes.size(); ++i)
      for (size_t j = i + 1; j < p.modes.size(); ++j)
        if (p.modes[i] == p.modes[j]) throw Error("duplicate estimation mode in plan");
    if (!(p.initial_soc >= 0 && p.initial_soc <= 1))
      throw Error("plan initial SOC out of [0,1]");
    UncertaintySpec::validate(p.uncertainty);
  }
};

namespace detail {

inline std::string resolve_relative(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

}  // namespace detail

// Plan files are JSON (comments allowed); relative paths are resolved
// against the plan file's directory. Scenario entries are either a bundled
// level name ("5pct", "10pct", "20pct") or an object {label, ratios[4]}.
// Excitation entries name either a profile CSV ({label, profile[, sample_period_s]})
// or the built-in constant-charge baseline ({label, builtin: "cc_1c"}).
inline ExperimentPlan load_experiment_plan(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path), nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw Error("cannot parse experiment plan " + path + ": " + e.what());
  }
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  ExperimentPlan plan;
  try {
    plan.params_path = detail::resolve_relative(base, j.at("params").get<std::string>());
    const ParameterSet params = load_parameter_set(plan.params_path);

    for (const auto& s : j.at("scenarios")) {
      if (s.is_string()) {
        const std::string label = s.get<std::string>();
        bool found = false;
        for (const auto& std_sc : standard_degradation_levels())
          if (std_sc.label == label) {
            plan.scenarios.push_back(std_sc);
            found = true;
          }
        if (!found)
          throw Error("unknown bundled scenario '" + label +
                      "' (expected 5pct, 10pct, or 20pct; use {label, ratios} for custom ones)");
      } else {
        DegradationScenario sc;
        sc.label = s.at("label").get<std::string>();
        const auto r = s.at("ratios");
        if (!r.is_array() || r.size() != 4)
          throw Error("scenario '" + sc.label + "' ratios must be an array of 4 values");
        for (size_t i = 0; i < 4; ++i) sc.ratios[i] = r[i].get<double>();
        plan.scenarios.push_back(sc);
      }
    }

    for (const auto& e : j.at("excitations")) {
      ExcitationSource src;
      src.label = e.at("label").get<std::string>();
      const bool has_profile = e.contains("profile"), has_builtin = e.contains("builtin");
      if (has_profile == has_builtin)
        throw Error("excitation '" + src.label +
                    "' must name exactly one of \"profile\" or \"builtin\"");
      if (has_profile) {
        const double dt = e.value("sample_period_s", 1.0);
        src.profile =
            load_profile_csv(detail::resolve_relative(base, e.at("profile").get<std::string>()), dt);
      } else {
        const std::string b = e.at("builtin").get<std::string>();
        if (b != "cc_1c")
          throw Error("unknown builtin excitation '" + b + "' (expected cc_1c)");
        src.profile = cc_baseline(DesignSpec{}, params);
      }
      plan.excitations.push_back(std::move(src));
    }

    for (const auto& m : j.at("modes"))
      plan.modes.push_back(estimation_mode_from_string(m.get<std::string>()));

    plan.plant = plant_fidelity_from_string(j.value("plant", std::string("shells")));
    plan.estimation_model =
        estimation_model_from_string(j.value("estimation_model", std::string("spme")));
    if (j.contains("uncertainty")) plan.uncertainty = uncertainty_from_json(j.at("uncertainty"));
    plan.master_seed = j.value("master_seed", std::uint64_t{0});
    if (j.contains("monte_carlo")) {
      plan.monte_carlo_replicates = j.at("monte_carlo").value("replicates", 0);
      plan.monte_carlo_seed = j.at("monte_carlo").value("seed", std::uint64_t{0});
    }
    plan.output_dir = detail::resolve_relative(base, j.value("output_dir", std::string("out")));
    plan.threads = j.value("threads", 0u);
    plan.initial_soc = j.value("initial_soc", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error("experiment plan " + path + ": " + e.what());
  }
  ExperimentPlan::validate(plan);
  return plan;
}

// one measured trajectory at the requested plant fidelity
inline VoltageTrajectory simulate_measurement(const ParameterSet& params,
                                              const ExcitationProfile& profile,
                                              double initial_soc, PlantFidelity plant,
                                              const UncertaintySpec& unc) {
  switch (plant) {
    case PlantFidelity::shells:
      return simulate_plant(params, profile, CellState::equilibrium(initial_soc), unc);
    case PlantFidelity::reduced:
      return apply_uncertainty(
          simulate_spme(params, profile, CellState::equilibrium(initial_soc)), unc);
    case PlantFidelity::ocp:
      return apply_uncertainty(simulate_ocp_model(params, profile, initial_soc), unc);
  }
  throw Error("unreachable plant fidelity");
}

struct PlanRunResult {
  ReportTable table;
  std::vector<std::string> files_written;
};

namespace detail {

struct PairData {
  bool failed = false;
  std::string failure;
  VoltageTrajectory aged, reference;
  HealthVector truth;
};

struct CellData {
  bool failed = false;
  std::string failure;
  EstimationResult result;
  HealthVector truth;
};

inline nlohmann::ordered_json health_json(const HealthVector& h) {
  nlohmann::ordered_json j;
  const auto v = h.as_array();
  const auto names = HealthVector::names();
  for (size_t i = 0; i < 4; ++i) j[names[i]] = v[i];
  return j;
}

}  // namespace detail

// Runs the full scenario x excitation x mode cross-product, persists every
// measurement pair and estimation result under the plan's output directory
// (override with out_dir), and returns the assembled table plus the list of
// files written. Cell failures are recorded, never fatal.
inline PlanRunResult run_plan(const ExperimentPlan& plan, const std::string& out_dir_override = "") {
  ExperimentPlan::validate(plan);
  const ParameterSet params = load_parameter_set(plan.params_path);
  const std::string out_dir = out_dir_override.empty() ? plan.output_dir : out_dir_override;

  const size_t ns = plan.scenarios.size(), ne = plan.excitations.size(), nm = plan.modes.size();

  // phase 1: measured data for every (scenario, excitation) pair
  std::vector<detail::PairData> pairs(ns * ne);
  parallel_for_index(pairs.size(), plan.threads, [&](size_t idx) {
    const size_t si = idx / ne, ei = idx % ne;
    detail::PairData& pd = pairs[idx];
    try {
      const ParameterSet aged_params = apply_degradation(params, plan.scenarios[si]);
      pd.truth = extract_health(aged_params);
      UncertaintySpec u1 = plan.uncertainty;
      u1.rng_seed = derive_seed(plan.master_seed, {1, si, ei});
      UncertaintySpec u0 = plan.uncertainty;
      u0.rng_seed = derive_seed(plan.master_seed, {2, si, ei});
      pd.aged = simulate_measurement(aged_params, plan.excitations[ei].profile, plan.initial_soc,
                                     plan.plant, u1);
      pd.reference = simulate_measurement(params, plan.excitations[ei].profile, plan.initial_soc,
                                          plan.plant, u0);
    } catch (const std::exception& e) {
      pd.failed = true;
      pd.failure = e.what();
    }
  });

  // phase 2: estimation for every cell
  std::vector<detail::CellData> cells(ns * ne * nm);
  parallel_for_index(cells.size(), plan.threads, [&](size_t idx) {
    const size_t si = idx / (ne * nm), ei = (idx / nm) % ne, mi = idx % nm;
    detail::CellData& cd = cells[idx];
    const detail::PairData& pd = pairs[si * ne + ei];
    cd.truth = pd.truth;
    if (pd.failed) {
      cd.failed = true;
      cd.failure = "measurement failed: " + pd.failure;
      return;
    }
    try {
      EstimationProblem prob =
          make_estimation_problem(params, plan.excitations[ei].profile, plan.modes[mi]);
      prob.model = plan.estimation_model;
      prob.initial_soc = plan.initial_soc;
      prob.aged = pd.aged;
      if (plan.modes[mi] == EstimationMode::reference) prob.reference = pd.reference;
      cd.result = estimate(prob);
      attach_truth(cd.result, pd.truth);
    } catch (const std::exception& e) {
      cd.failed = true;
      cd.failure = e.what();
    }
  });

  // phase 3 (serial): persistence and table assembly, in cross-product order
  namespace fs = std::filesystem;
  PlanRunResult out;
  fs::create_directories(fs::path(out_dir) / "trajectories");
  fs::create_directories(fs::path(out_dir) / "results");
  for (size_t si = 0; si < ns; ++si) {
    for (size_t ei = 0; ei < ne; ++ei) {
      const detail::PairData& pd = pairs[si * ne + ei];
      if (pd.failed) continue;  // nothing measurable to persist
      const std::string stem = plan.scenarios[si].label + "_" + plan.excitations[ei].label;
      const std::string aged_path =
          (fs::path(out_dir) / "trajectories" / ("aged_" + stem + ".csv")).string();
      save_trajectory_csv(pd.aged, aged_path);
      out.files_written.push_back(aged_path);
      const std::string ref_path =
          (fs::path(out_dir) / "trajectories" / ("reference_" + stem + ".csv")).string();
      save_trajectory_csv(pd.reference, ref_path);
      out.files_written.push_back(ref_path);
    }
  }
  for (size_t si = 0; si < ns; ++si) {
    for (size_t ei = 0; ei < ne; ++ei) {
      for (size_t mi = 0; mi < nm; ++mi) {
        const detail::CellData& cd = cells[(si * ne + ei) * nm + mi];
        ReportRow row;
        row.scenario = plan.scenarios[si].label;
        row.excitation = plan.excitations[ei].label;
        row.mode = to_string(plan.modes[mi]);
        nlohmann::ordered_json rj;
        rj["scenario"] = row.scenario;
        rj["excitation"] = row.excitation;
        rj["mode"] = row.mode;
        rj["failed"] = cd.failed;
        if (cd.failed) {
          row.failed = true;
          row.note = cd.failure;
          rj["failure"] = cd.failure;
        } else {
          row.error_pct = *cd.result.error_pct;
          rj["truth"] = detail::health_json(cd.truth);
          rj["theta_hat"] = detail::health_json(cd.result.theta_hat);
          {
            nlohmann::ordered_json ej;
            const auto names = HealthVector::names();
            for (size_t i = 0; i < 4; ++i) ej[names[i]] = row.error_pct[i];
            rj["error_pct"] = ej;
          }
          rj["residual_ssq"] = cd.result.residual_ssq;
          rj["iterations"] = cd.result.iterations;
          rj["converged"] = cd.result.converged;
        }
        const std::string res_path =
            (fs::path(out_dir) / "results" /
             (row.scenario + "_" + row.excitation + "_" + row.mode + ".json"))
                .string();
        write_text_file(res_path, rj.dump(2) + "\n");
        out.files_written.push_back(res_path);
        out.table.rows.push_back(std::move(row));
      }
    }
  }
  std::vector<std::pair<std::string, ExcitationProfile>> sources;
  for (const auto& e : plan.excitations) sources.emplace_back(e.label, e.profile);
  for (auto& f : emit_report(out.table, sources, out_dir)) out.files_written.push_back(std::move(f));
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo study of one plan cell
// ---------------------------------------------------------------------------

struct MonteCarloConfig {
  int replicates = 200;  // >= 50
  std::uint64_t seed = 0;
  unsigned threads = 0;
  UncertaintySpec aged_uncertainty;       // rng_seed fields are ignored:
  UncertaintySpec reference_uncertainty;  // replicate seeds are derived from `seed`
};

struct MonteCarloResult {
  int requested = 0;
  int completed = 0;
  int excluded = 0;  // non-converged replicates, left out of the statistics
  Eigen::Vector4d mean_error = Eigen::Vector4d::Zero();     // truth - estimate
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();     // sample covariance of the same
  ErrorPrediction predicted;  // closed-form mean/covariance for side-by-side comparison
};

// Repeats the (simulate measurements, estimate) cycle with fresh derived
// noise seeds and reports the sample mean and covariance of the estimation
// error next to the closed-form prediction. The prediction's covariance term
// carries the reference method's doubled noise variance, and its mean uses
// the net constant bias seen by the chosen mode. Replicates whose fit does
// not converge are excluded; more than 10% exclusions fails the whole run.
inline MonteCarloResult run_monte_carlo(const ParameterSet& params,
                                        const DegradationScenario& scenario,
                                        const ExcitationProfile& profile, EstimationMode mode,
                                        PlantFidelity plant, EstimationModel model,
                                        double initial_soc, const MonteCarloConfig& cfg) {
  if (cfg.replicates < 50) throw Error("Monte Carlo needs at least 50 replicates");
  UncertaintySpec::validate(cfg.aged_uncertainty);
  UncertaintySpec::validate(cfg.reference_uncertainty);

  const ParameterSet aged_params = apply_degradation(params, scenario);
  const HealthVector truth = extract_health(aged_params);
  const auto truth_v = truth.as_array();

  struct Replicate {
    bool ok = false;
    std::array<double, 4> error{};  // truth - estimate
  };
  std::vector<Replicate> reps(static_cast<size_t>(cfg.replicates));
  parallel_for_index(reps.size(), cfg.threads, [&](size_t r) {
    try {
      UncertaintySpec u1 = cfg.aged_uncertainty;
      u1.rng_seed = derive_seed(cfg.seed, {3, r});
      UncertaintySpec u0 = cfg.reference_uncertainty;
      u0.rng_seed = derive_seed(cfg.seed, {4, r});
      EstimationProblem prob = make_estimation_problem(params, profile, mode);
      prob.model = model;
      prob.initial_soc = initial_soc;
      prob.aged = simulate_measurement(aged_params, profile, initial_soc, plant, u1);
      if (mode == EstimationMode::reference)
        prob.reference = simulate_measurement(params, profile, initial_soc, plant, u0);
      const EstimationResult est = estimate(prob);
      if (!est.converged) return;
      const auto hat = est.theta_hat.as_array();
      for (size_t i = 0; i < 4; ++i) reps[r].error[i] = truth_v[i] - hat[i];
      reps[r].ok = true;
    } catch (const std::exception&) {
      // recorded as an exclusion
    }
  });

  MonteCarloResult out;
  out.requested = cfg.replicates;
  for (const auto& rep : reps) rep.ok ? ++out.completed : ++out.excluded;
  if (out.excluded * 10 > cfg.replicates)
    throw Error("Monte Carlo failed: " + std::to_string(out.excluded) + " of " +
                std::to_string(cfg.replicates) + " replicates did not converge (> 10%)");
  if (out.completed < 2) throw Error("Monte Carlo needs at least 2 converged replicates");

  for (const auto& rep : reps) {
    if (!rep.ok) continue;
    for (int i = 0; i < 4; ++i) out.mean_error[i] += rep.error[static_cast<size_t>(i)];
  }
  out.mean_error /= static_cast<double>(out.completed);
  for (const auto& rep : reps) {
    if (!rep.ok) continue;
    Eigen::Vector4d d;
    for (int i = 0; i < 4; ++i) d[i] = rep.error[static_cast<size_t>(i)] - out.mean_error[i];
    out.covariance += d * d.transpose();
  }
  out.covariance /= static_cast<double>(out.completed - 1);

  const double bias_aged = cfg.aged_uncertainty.model_bias_V + cfg.aged_uncertainty.meas_bias_V;
  const double bias_ref =
      cfg.reference_uncertainty.model_bias_V + cfg.reference_uncertainty.meas_bias_V;
  const double delta_bar =
      mode == EstimationMode::reference ? bias_aged - bias_ref : bias_aged;
  const SensitivityTrajectory sens = sensitivities_ocp(aged_params, profile, initial_soc);
  out.predicted = predict_error(fisher(sens), sens, delta_bar,
                                cfg.aged_uncertainty.meas_noise_sigma_V);
  return out;
}

inline nlohmann::ordered_json monte_carlo_to_json(const MonteCarloResult& mc) {
  nlohmann::ordered_json j;
  j["requested"] = mc.requested;
  j["completed"] = mc.completed;
  j["excluded"] = mc.excluded;
  const auto names = HealthVector::names();
  for (size_t i = 0; i < 4; ++i) {
    nlohmann::ordered_json pj;
    pj["sample_mean_error"] = mc.mean_error[static_cast<Eigen::Index>(i)];
    pj["predicted_mean_error"] = mc.predicted.mean[static_cast<Eigen::Index>(i)];
    pj["sample_variance"] =
        mc.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    pj["predicted_variance"] =
        mc.predicted.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    j[names[i]] = pj;
  }
  return j;
}

}  // namespace sohkit
