// Command-line front end. Subcommands cover the whole workflow: simulate a
// voltage trajectory (plant or model fidelity, optional injected
// uncertainty), design an information-optimal excitation, estimate health
// parameters from measured trajectories, run a full experiment plan,
// Monte Carlo one plan cell against the closed-form error statistics, and
// re-emit reports from a stored table. All seeds are explicit, so every
// output is reproducible byte for byte. SOHKIT_OUTPUT_DIR, when set,
// provides the default output directory for run-plan.

#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sohkit/sohkit.hpp"

namespace {

using namespace sohkit;

HealthVector parse_health_values(const ParameterSet& params, const std::string& text) {
  if (text.find(',') != std::string::npos) {
    const auto fields = split_fields(text);
    if (fields.size() != 4)
      throw Error("expected 4 comma-separated health values, got " +
                  std::to_string(fields.size()));
    std::array<double, 4> v{};
    for (size_t i = 0; i < 4; ++i) v[i] = parse_double(fields[i], "health values");
    return HealthVector::from_array(v);
  }
  for (const auto& sc : standard_degradation_levels())
    if (sc.label == text) return extract_health(apply_degradation(params, sc));
  throw Error("unknown degradation level '" + text +
              "' (expected 5pct, 10pct, 20pct, or 4 comma-separated values)");
}

DegradationScenario parse_scenario(const std::string& label, const std::string& ratios) {
  if (ratios.empty()) {
    for (const auto& sc : standard_degradation_levels())
      if (sc.label == label) return sc;
    throw Error("unknown degradation level '" + label +
                "' (expected 5pct, 10pct, or 20pct; or pass --ratios)");
  }
  DegradationScenario sc;
  sc.label = label;
  const auto fields = split_fields(ratios);
  if (fields.size() != 4) throw Error("--ratios needs 4 comma-separated values");
  for (size_t i = 0; i < 4; ++i) sc.ratios[i] = parse_double(fields[i], "--ratios");
  return sc;
}

// accepts either a path to an uncertainty JSON file or the JSON text itself
UncertaintySpec parse_uncertainty_arg(const std::string& arg) {
  const auto first = arg.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && arg[first] == '{') {
    try {
      return uncertainty_from_json(
          nlohmann::json::parse(arg, nullptr, true, /*ignore_comments=*/true));
    } catch (const nlohmann::json::exception& e) {
      throw Error(std::string("cannot parse inline uncertainty JSON: ") + e.what());
    }
  }
  return load_uncertainty(arg);
}

nlohmann::ordered_json health_to_json(const HealthVector& h) {
  nlohmann::ordered_json j;
  const auto v = h.as_array();
  const auto names = HealthVector::names();
  for (size_t i = 0; i < 4; ++i) j[names[i]] = v[i];
  return j;
}

void add_simulate(CLI::App& app) {
  auto* cmd = app.add_subcommand("simulate",
                                 "Simulate a voltage trajectory for an excitation profile");
  auto params_path = std::make_shared<std::string>();
  auto profile_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto unc_path = std::make_shared<std::string>();
  auto soc0 = std::make_shared<double>(0.0);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto seed_set = std::make_shared<bool>(false);
  auto use_plant = std::make_shared<bool>(false);
  auto use_model = std::make_shared<bool>(false);
  auto use_ocp = std::make_shared<bool>(false);
  cmd->add_option("--params", *params_path, "parameter set JSON")->required();
  cmd->add_option("--profile", *profile_path, "excitation profile CSV")->required();
  cmd->add_option("--soc0", *soc0, "initial SOC in [0,1] (default 0)");
  cmd->add_flag("--plant", *use_plant, "plant fidelity (shell-resolved solid diffusion)");
  cmd->add_flag("--model", *use_model, "estimation-model fidelity (reduced solid diffusion)");
  cmd->add_flag("--ocp", *use_ocp, "open-circuit fidelity (no transport dynamics)");
  cmd->add_option("--uncertainty", *unc_path,
                  "uncertainty spec: a JSON file path or inline JSON text");
  cmd->add_option("--seed", *seed, "noise seed (overrides the spec's rng_seed)")
      ->each([seed_set](const std::string&) { *seed_set = true; });
  cmd->add_option("--out", *out_path, "output trajectory CSV")->required();
  cmd->callback([=]() {
    if (static_cast<int>(*use_plant) + static_cast<int>(*use_model) +
            static_cast<int>(*use_ocp) !=
        1)
      throw Error("pass exactly one of --plant, --model, --ocp");
    const ParameterSet params = load_parameter_set(*params_path);
    const ExcitationProfile profile = load_profile_csv(*profile_path);
    UncertaintySpec unc;
    if (!unc_path->empty()) unc = parse_uncertainty_arg(*unc_path);
    if (*seed_set) unc.rng_seed = *seed;
    VoltageTrajectory tr;
    if (*use_model && unc_path->empty() && !*seed_set) {
      // clean model prediction, with the voltage composition attached
      tr = simulate_spme(params, profile, CellState::equilibrium(*soc0));
    } else {
      const PlantFidelity f = *use_plant  ? PlantFidelity::shells
                              : *use_ocp ? PlantFidelity::ocp
                                         : PlantFidelity::reduced;
      tr = simulate_measurement(params, profile, *soc0, f, unc);
    }
    save_trajectory_csv(tr, *out_path);
    std::cout << "wrote " << *out_path << " (" << tr.size() << " samples, voltage "
              << format_sig(tr.voltage_V.front()) << " .. "
              << format_sig(tr.voltage_V.back()) << " V)\n";
  });
}

void add_design(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "design-excitation", "Search for an information-optimal excitation profile");
  auto params_path = std::make_shared<std::string>();
  auto criterion = std::make_shared<std::string>("d");
  auto out_path = std::make_shared<std::string>();
  auto history_path = std::make_shared<std::string>();
  auto seed = std::make_shared<std::uint64_t>(0);
  auto swarm = std::make_shared<int>(0);
  auto iterations = std::make_shared<int>(0);
  auto horizon = std::make_shared<double>(600.0);
  auto intervals = std::make_shared<int>(10);
  auto c_rate = std::make_shared<double>(1.0);
  auto soc0 = std::make_shared<double>(0.0);
  cmd->add_option("--params", *params_path, "parameter set JSON")->required();
  cmd->add_option("--criterion", *criterion, "optimality criterion: d, e, or a");
  cmd->add_option("--seed", *seed, "swarm RNG seed");
  cmd->add_option("--swarm", *swarm, "swarm size (default 50)");
  cmd->add_option("--iterations", *iterations, "iteration budget (default 100)");
  cmd->add_option("--horizon", *horizon, "profile horizon in seconds (default 600)");
  cmd->add_option("--intervals", *intervals, "number of constant segments (default 10)");
  cmd->add_option("--c-rate", *c_rate, "current bound in C (default 1)");
  cmd->add_option("--soc0", *soc0, "initial SOC (default 0)");
  cmd->add_option("--out", *out_path, "output profile CSV")->required();
  cmd->add_option("--history", *history_path, "optional best-objective history CSV");
  cmd->callback([=]() {
    const ParameterSet params = load_parameter_set(*params_path);
    DesignSpec spec;
    spec.criterion = criterion_from_string(*criterion);
    spec.horizon_s = *horizon;
    spec.intervals = static_cast<size_t>(*intervals);
    spec.c_rate_bound = *c_rate;
    spec.initial_soc = *soc0;
    PsoConfig pso;
    pso.rng_seed = *seed;
    if (*swarm > 0) pso.swarm_size = *swarm;
    if (*iterations > 0) pso.max_iterations = *iterations;
    const DesignResult result = design_excitation(spec, pso, params);
    save_profile_csv(result.profile, *out_path);
    std::cout << "criterion " << to_string(spec.criterion) << ", objective "
              << format_sig(result.objective) << " (raw metric "
              << format_sig(result.raw_metric) << ") after " << result.iterations
              << " iterations / " << result.evaluations << " evaluations\n";
    const DesignEvaluation cc =
        evaluate_design(ExcitationProfile{cc_baseline(spec, params)}.segment_currents_A, spec,
                        params);
    if (cc.feasible && cc.raw_metric != 0.0)
      std::cout << "baseline constant-charge metric " << format_sig(cc.raw_metric)
                << " (improvement x" << format_sig(result.raw_metric / cc.raw_metric) << ")\n";
    std::cout << (result.plant_verified ? "plant re-verification: ok"
                                        : "plant re-verification FAILED: " + result.plant_note)
              << "\n";
    std::cout << "wrote " << *out_path << "\n";
    if (!history_path->empty()) {
      CsvTable t;
      t.columns = {"iteration", "best_objective"};
      for (size_t i = 0; i < result.history.size(); ++i)
        t.rows.push_back({static_cast<double>(i), result.history[i]});
      save_csv(*history_path, t);
      std::cout << "wrote " << *history_path << "\n";
    }
  });
}

void add_estimate(CLI::App& app) {
  auto* cmd = app.add_subcommand("estimate",
                                 "Estimate health parameters from measured trajectories");
  auto mode = std::make_shared<std::string>("conventional");
  auto model = std::make_shared<std::string>("spme");
  auto params_path = std::make_shared<std::string>();
  auto profile_path = std::make_shared<std::string>();
  auto aged_path = std::make_shared<std::string>();
  auto ref_path = std::make_shared<std::string>();
  auto truth_text = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  auto soc0 = std::make_shared<double>(0.0);
  cmd->add_option("--mode", *mode, "conventional or reference");
  cmd->add_option("--model", *model, "estimation model: spme or ocp");
  cmd->add_option("--params", *params_path, "parameter set JSON (nominal values)")->required();
  cmd->add_option("--profile", *profile_path, "excitation profile CSV")->required();
  cmd->add_option("--aged", *aged_path, "measured trajectory of the cell under estimation")
      ->required();
  cmd->add_option("--reference", *ref_path, "stored nominal-cell trajectory (reference mode)");
  cmd->add_option("--truth", *truth_text,
                  "known truth for error reporting: a bundled level name or 4 comma values");
  cmd->add_option("--soc0", *soc0, "initial SOC (default 0)");
  cmd->add_option("--out", *out_path, "result JSON")->required();
  cmd->callback([=]() {
    const ParameterSet params = load_parameter_set(*params_path);
    const ExcitationProfile profile = load_profile_csv(*profile_path);
    EstimationProblem prob =
        make_estimation_problem(params, profile, estimation_mode_from_string(*mode));
    prob.model = estimation_model_from_string(*model);
    prob.initial_soc = *soc0;
    prob.aged = load_trajectory_csv(*aged_path);
    if (prob.mode == EstimationMode::reference) {
      if (ref_path->empty()) throw Error("reference mode needs --reference");
      prob.reference = load_trajectory_csv(*ref_path);
    }
    EstimationResult result = estimate(prob);
    nlohmann::ordered_json j;
    j["mode"] = to_string(prob.mode);
    j["model"] = to_string(prob.model);
    j["theta_hat"] = health_to_json(result.theta_hat);
    if (!truth_text->empty()) {
      const HealthVector truth = parse_health_values(params, *truth_text);
      attach_truth(result, truth);
      j["truth"] = health_to_json(truth);
      nlohmann::ordered_json ej;
      const auto names = HealthVector::names();
      for (size_t i = 0; i < 4; ++i) ej[names[i]] = (*result.error_pct)[i];
      j["error_pct"] = ej;
    }
    j["residual_ssq"] = result.residual_ssq;
    j["iterations"] = result.iterations;
    j["converged"] = result.converged;
    j["initial_cost"] = result.cost_history.front();
    j["final_cost"] = result.cost_history.back();
    if (!result.note.empty()) j["note"] = result.note;
    write_text_file(*out_path, j.dump(2) + "\n");
    std::cout << "wrote " << *out_path << " (residual ssq "
              << format_sig(result.residual_ssq) << ", "
              << (result.converged ? "converged" : "NOT converged") << ")\n";
  });
}

void add_run_plan(CLI::App& app) {
  auto* cmd = app.add_subcommand("run-plan", "Run a full experiment plan");
  auto plan_path = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  auto threads = std::make_shared<int>(-1);
  cmd->add_option("--plan", *plan_path, "experiment plan JSON")->required();
  cmd->add_option("--out", *out_dir,
                  "output directory (default: SOHKIT_OUTPUT_DIR, then the plan's output_dir)");
  cmd->add_option("--threads", *threads, "worker threads (default: plan, then hardware)");
  cmd->callback([=]() {
    ExperimentPlan plan = load_experiment_plan(*plan_path);
    if (*threads >= 0) plan.threads = static_cast<unsigned>(*threads);
    std::string out = *out_dir;
    if (out.empty()) {
      if (const char* env = std::getenv("SOHKIT_OUTPUT_DIR")) out = env;
    }
    const PlanRunResult run = run_plan(plan, out);
    std::cout << render_report_text(run.table);
    std::cout << run.files_written.size() << " files written under "
              << (out.empty() ? plan.output_dir : out) << "\n";
  });
}

void add_monte_carlo(CLI::App& app) {
  auto* cmd = app.add_subcommand(
      "monte-carlo", "Replicate one estimation cell against the closed-form error statistics");
  auto params_path = std::make_shared<std::string>();
  auto profile_path = std::make_shared<std::string>();
  auto scenario_label = std::make_shared<std::string>();
  auto ratios = std::make_shared<std::string>();
  auto mode = std::make_shared<std::string>("reference");
  auto plant = std::make_shared<std::string>("ocp");
  auto model = std::make_shared<std::string>("ocp");
  auto replicates = std::make_shared<int>(200);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto threads = std::make_shared<int>(0);
  auto soc0 = std::make_shared<double>(0.0);
  auto sigma = std::make_shared<double>(0.0);
  auto bias_aged = std::make_shared<double>(0.0);
  auto bias_ref = std::make_shared<double>(0.0);
  auto out_path = std::make_shared<std::string>();
  cmd->add_option("--params", *params_path, "parameter set JSON")->required();
  cmd->add_option("--profile", *profile_path, "excitation profile CSV")->required();
  cmd->add_option("--scenario", *scenario_label, "degradation level label")->required();
  cmd->add_option("--ratios", *ratios, "custom scenario ratios (4 comma values)");
  cmd->add_option("--mode", *mode, "conventional or reference");
  cmd->add_option("--plant", *plant, "plant fidelity: shells, reduced, or ocp");
  cmd->add_option("--model", *model, "estimation model: spme or ocp");
  cmd->add_option("--replicates", *replicates, "replicate count (>= 50, default 200)");
  cmd->add_option("--seed", *seed, "master noise seed");
  cmd->add_option("--threads", *threads, "worker threads (0 = hardware)");
  cmd->add_option("--soc0", *soc0, "initial SOC (default 0)");
  cmd->add_option("--sigma", *sigma, "measurement noise sigma in V (both measurements)");
  cmd->add_option("--bias-aged", *bias_aged, "constant model bias on the aged measurement, V");
  cmd->add_option("--bias-ref", *bias_ref, "constant model bias on the reference measurement, V");
  cmd->add_option("--out", *out_path, "result JSON")->required();
  cmd->callback([=]() {
    const ParameterSet params = load_parameter_set(*params_path);
    const ExcitationProfile profile = load_profile_csv(*profile_path);
    MonteCarloConfig cfg;
    cfg.replicates = *replicates;
    cfg.seed = *seed;
    cfg.threads = static_cast<unsigned>(*threads);
    cfg.aged_uncertainty.model_bias_V = *bias_aged;
    cfg.aged_uncertainty.meas_noise_sigma_V = *sigma;
    cfg.reference_uncertainty.model_bias_V = *bias_ref;
    cfg.reference_uncertainty.meas_noise_sigma_V = *sigma;
    const MonteCarloResult mc = run_monte_carlo(
        params, parse_scenario(*scenario_label, *ratios), profile,
        estimation_mode_from_string(*mode), plant_fidelity_from_string(*plant),
        estimation_model_from_string(*model), *soc0, cfg);
    nlohmann::ordered_json j = monte_carlo_to_json(mc);
    write_text_file(*out_path, j.dump(2) + "\n");
    std::cout << "completed " << mc.completed << "/" << mc.requested << " replicates ("
              << mc.excluded << " excluded)\n";
    const auto names = HealthVector::names();
    for (size_t i = 0; i < 4; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      std::cout << "  " << names[i] << ": mean error " << format_sig(mc.mean_error[k])
                << " (predicted " << format_sig(mc.predicted.mean[k]) << "), variance "
                << format_sig(mc.covariance(k, k)) << " (predicted "
                << format_sig(mc.predicted.covariance(k, k)) << ")\n";
    }
    std::cout << "wrote " << *out_path << "\n";
  });
}

void add_report(CLI::App& app) {
  auto* cmd =
      app.add_subcommand("report", "Re-emit the text table and plots from a stored report CSV");
  auto table_path = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  auto profiles = std::make_shared<std::vector<std::string>>();
  cmd->add_option("--table", *table_path, "report CSV")->required();
  cmd->add_option("--out", *out_dir, "output directory")->required();
  cmd->add_option("--profile", *profiles,
                  "excitation profile to plot, as label=path.csv (repeatable)");
  cmd->callback([=]() {
    const ReportTable table = load_report_csv(*table_path);
    std::vector<std::pair<std::string, ExcitationProfile>> sources;
    for (const auto& spec : *profiles) {
      const size_t eq = spec.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
        throw Error("--profile expects label=path.csv, got '" + spec + "'");
      sources.emplace_back(spec.substr(0, eq), load_profile_csv(spec.substr(eq + 1)));
    }
    const auto files = emit_report(table, sources, *out_dir);
    std::cout << render_report_text(table);
    std::cout << files.size() << " files written under " << *out_dir << "\n";
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "State-of-health estimation toolkit: two-fidelity cell simulation, "
      "information-optimal excitation design, reference-compensated health estimation, "
      "and reproducible experiment plans"};
  app.require_subcommand(1);
  add_simulate(app);
  add_design(app);
  add_estimate(app);
  add_run_plan(app);
  add_monte_carlo(app);
  add_report(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
