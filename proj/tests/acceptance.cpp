// Acceptance gate: eight end-to-end behavioral criteria for the toolkit, each
// printed as one PASS/FAIL line with its measured margin and runtime. The
// process exit code is the number of failed criteria, so this binary doubles
// as a ctest entry and a command-line health check.
//
//   1. exact recovery        zero-uncertainty estimation reproduces the truth
//   2. bias cancellation     reference mode beats conventional under bias+noise
//   3. error statistics      Monte Carlo matches the closed-form mean/covariance
//   4. sensitivity oracle    analytic sensitivities vs central finite differences
//   5. information metrics   Fisher accumulation + exact D/E/A reference values
//   6. design improvement    seeded search beats the constant-charge baseline
//   7. determinism           a seeded plan reproduces byte-identical files
//   8. core properties       conservation/additivity/PSD/monotonicity, randomized

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "sohkit/sohkit.hpp"

using namespace sohkit;
namespace fs = std::filesystem;

namespace {

std::string data_path(const std::string& rel) {
  return (fs::path(SOHKIT_DATA_DIR) / rel).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string fmt(double v, const char* spec = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return std::string(buf);
}

// seeded random piecewise-constant profile within +/- 1C
ExcitationProfile random_profile(std::uint64_t seed, size_t segments = 10,
                                 double horizon_s = 600.0, double amp_A = 5.0) {
  NormalSampler rng(seed);
  ExcitationProfile p;
  p.segment_duration_s = horizon_s / static_cast<double>(segments);
  p.sample_period_s = 1.0;
  for (size_t i = 0; i < segments; ++i)
    p.segment_currents_A.push_back(rng.uniform(-amp_A, amp_A));
  return p;
}

struct Gate {
  int failures = 0;

  void run(int number, const std::string& name, const std::function<std::string()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;
    try {
      detail = body();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] criterion %d: %-20s %s [%.1f s]\n", ok ? "PASS" : "FAIL", number,
                name.c_str(), detail.c_str(), secs);
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

struct ScopedDir {
  fs::path path;
  explicit ScopedDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("sohkit_acceptance_" + std::to_string(::getpid()) + "_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScopedDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace

int main() {
  Gate gate;
  const ParameterSet params = load_parameter_set(data_path("params/lgm50.json"));
  const ExcitationProfile dopt = load_profile_csv(data_path("profiles/dopt.csv"));

  // ---------------------------------------------------------------- 1
  gate.run(1, "exact recovery", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0;
    for (const auto& scenario : standard_degradation_levels()) {
      const ParameterSet aged_params = apply_degradation(params, scenario);
      const HealthVector truth = extract_health(aged_params);
      // plant identical to the estimation model, no bias, no noise
      const VoltageTrajectory aged =
          simulate_spme(aged_params, dopt, CellState::equilibrium(0.0));
      const VoltageTrajectory reference =
          simulate_spme(params, dopt, CellState::equilibrium(0.0));
      for (auto mode : {EstimationMode::reference, EstimationMode::conventional}) {
        EstimationProblem prob = make_estimation_problem(params, dopt, mode);
        prob.aged = aged;
        if (mode == EstimationMode::reference) prob.reference = reference;
        const EstimationResult est = estimate(prob);
        require(est.converged, scenario.label + "/" + to_string(mode) + " did not converge");
        const auto err = evaluate_against_truth(est.theta_hat, truth);
        for (double e : err) worst = std::max(worst, std::abs(e));
      }
    }
    require(worst < 0.1, "worst recovery error " + fmt(worst) + "% >= 0.1%");
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 60.0, "runtime " + fmt(secs) + " s >= 60 s");
    return "worst |error| " + fmt(worst) + "% < 0.1% over 3 scenarios x 2 modes";
  });

  // ---------------------------------------------------------------- 2
  gate.run(2, "bias cancellation", [&] {
    UncertaintySpec unc;
    unc.model_bias_V = 0.010;  // shared by both cells: the reference method's target
    unc.meas_noise_sigma_V = 0.001;
    const std::uint64_t master = 1;
    int min_wins = 4;
    double worst_ref = 0;
    for (const auto& scenario : standard_degradation_levels()) {
      const ParameterSet aged_params = apply_degradation(params, scenario);
      const HealthVector truth = extract_health(aged_params);
      UncertaintySpec u1 = unc;
      u1.rng_seed = derive_seed(master, {1});
      UncertaintySpec u0 = unc;
      u0.rng_seed = derive_seed(master, {2});
      const VoltageTrajectory aged =
          simulate_plant(aged_params, dopt, CellState::equilibrium(0.0), u1);
      const VoltageTrajectory reference =
          simulate_plant(params, dopt, CellState::equilibrium(0.0), u0);

      EstimationProblem conv = make_estimation_problem(params, dopt, EstimationMode::conventional);
      conv.aged = aged;
      const auto err_conv = evaluate_against_truth(estimate(conv).theta_hat, truth);
      EstimationProblem ref = make_estimation_problem(params, dopt, EstimationMode::reference);
      ref.aged = aged;
      ref.reference = reference;
      const auto err_ref = evaluate_against_truth(estimate(ref).theta_hat, truth);

      int wins = 0;
      for (size_t i = 0; i < 4; ++i) {
        if (std::abs(err_ref[i]) < std::abs(err_conv[i])) ++wins;
        worst_ref = std::max(worst_ref, std::abs(err_ref[i]));
      }
      min_wins = std::min(min_wins, wins);
      require(wins >= 3, scenario.label + ": reference beats conventional on only " +
                             std::to_string(wins) + "/4 parameters");
    }
    require(worst_ref < 3.0, "worst reference |error| " + fmt(worst_ref) + "% >= 3%");
    return "reference wins >= " + std::to_string(min_wins) + "/4 per level, worst |error| " +
           fmt(worst_ref) + "% < 3%";
  });

  // ---------------------------------------------------------------- 3
  gate.run(3, "error statistics", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    DegradationScenario scenario;
    for (const auto& s : standard_degradation_levels())
      if (s.label == "10pct") scenario = s;

    // (a) noise-only covariance against the doubled-variance closed form
    MonteCarloConfig var_cfg;
    var_cfg.replicates = 200;
    var_cfg.seed = 11;
    var_cfg.aged_uncertainty.meas_noise_sigma_V = 0.001;
    var_cfg.reference_uncertainty.meas_noise_sigma_V = 0.001;
    const MonteCarloResult var_mc =
        run_monte_carlo(params, scenario, dopt, EstimationMode::reference, PlantFidelity::ocp,
                        EstimationModel::ocp, 0.0, var_cfg);
    require(var_mc.completed == 200, "variance study lost replicates");
    double worst_ratio_dev = 0;
    for (int i = 0; i < 4; ++i) {
      const double ratio = var_mc.covariance(i, i) / var_mc.predicted.covariance(i, i);
      worst_ratio_dev = std::max(worst_ratio_dev, std::abs(ratio - 1.0));
      require(std::abs(ratio - 1.0) <= 0.30, "variance entry " + std::to_string(i) + " ratio " +
                                                 fmt(ratio) + " outside [0.7, 1.3]");
    }

    // (b) bias-only mean against the linear propagation formula
    MonteCarloConfig mean_cfg;
    mean_cfg.replicates = 200;
    mean_cfg.seed = 12;
    mean_cfg.aged_uncertainty.model_bias_V = 0.005;
    const MonteCarloResult mean_mc =
        run_monte_carlo(params, scenario, dopt, EstimationMode::reference, PlantFidelity::ocp,
                        EstimationModel::ocp, 0.0, mean_cfg);
    require(mean_mc.completed == 200, "mean study lost replicates");
    require(mean_mc.predicted.mean.norm() > 0, "predicted mean unexpectedly zero");
    const double mean_rel =
        (mean_mc.mean_error - mean_mc.predicted.mean).norm() / mean_mc.predicted.mean.norm();
    require(mean_rel <= 0.10, "mean error vs prediction " + fmt(mean_rel) + " > 10%");

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 300.0, "runtime " + fmt(secs) + " s >= 5 min");
    return "variance within " + fmt(100 * worst_ratio_dev) + "% (<= 30%/entry), mean within " +
           fmt(100 * mean_rel) + "% (<= 10%)";
  });

  // ---------------------------------------------------------------- 4
  gate.run(4, "sensitivity oracle", [&] {
    const ExcitationProfile prof = random_profile(20260819);
    const double soc0 = 0.5;
    const auto sens = sensitivities_ocp(params, prof, soc0);
    const auto base = extract_health(params).as_array();
    const double rel_step = 1e-5;
    double worst = 0;
    for (int j = 0; j < 4; ++j) {
      auto hi = base, lo = base;
      hi[static_cast<size_t>(j)] *= 1.0 + rel_step;
      lo[static_cast<size_t>(j)] *= 1.0 - rel_step;
      const auto vp = run_ocp_model(with_health(params, HealthVector::from_array(hi)), prof, soc0)
                          .trajectory.voltage_V;
      const auto vm = run_ocp_model(with_health(params, HealthVector::from_array(lo)), prof, soc0)
                          .trajectory.voltage_V;
      const double dtheta = base[static_cast<size_t>(j)] * rel_step;
      double num = 0, den = 0;
      for (size_t k = 0; k < vp.size(); ++k) {
        const double fd = (vp[k] - vm[k]) / (2.0 * dtheta);
        const double an = sens.rows(static_cast<Eigen::Index>(k), j);
        num += (fd - an) * (fd - an);
        den += an * an;
      }
      require(den > 0, "sensitivity column " + std::to_string(j) + " vanished");
      worst = std::max(worst, std::sqrt(num / den));
    }
    require(worst < 1e-3, "worst column rel RMS " + fmt(worst) + " >= 1e-3");
    return "worst column rel RMS " + fmt(worst) + " < 1e-3 on a randomized 600 s profile";
  });

  // ---------------------------------------------------------------- 5
  gate.run(5, "information metrics", [&] {
    // brute-force outer products on randomized cases
    double worst_abs = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      NormalSampler rng(seed * 31);
      const int n = 3 + static_cast<int>(seed) * 4;
      SensitivityTrajectory sens;
      sens.rows.resize(n, 4);
      for (int k = 0; k < n; ++k) {
        sens.time_s.push_back(k + 1.0);
        for (int c = 0; c < 4; ++c) sens.rows(k, c) = rng.uniform(-1.0, 1.0);
      }
      Eigen::Matrix4d brute = Eigen::Matrix4d::Zero();
      for (int k = 0; k < n; ++k) {
        const Eigen::Vector4d row = sens.rows.row(k).transpose();
        brute += row * row.transpose();
      }
      const Eigen::Matrix4d diff = fisher(sens).matrix - brute;
      worst_abs = std::max(worst_abs, diff.cwiseAbs().maxCoeff());
    }
    require(worst_abs <= 1e-12,
            "accumulation vs brute force max |diff| " + fmt(worst_abs) + " > 1e-12");

    // exact reference values on the diagonal case
    FisherMatrix f;
    f.matrix = Eigen::Vector4d(4, 3, 2, 1).asDiagonal();
    f.sample_count = 4;
    const double d = optimality_metric(f, OptimalityCriterion::D);
    const double e = optimality_metric(f, OptimalityCriterion::E);
    const double a = optimality_metric(f, OptimalityCriterion::A);
    require(d == 24.0, "D metric " + fmt(d, "%.17g") + " != 24");
    require(e == 1.0, "E metric " + fmt(e, "%.17g") + " != 1");
    require(a == 25.0 / 12.0, "A metric " + fmt(a, "%.17g") + " != 25/12");
    return "outer-product max |diff| " + fmt(worst_abs) + " <= 1e-12; D/E/A exactly 24, 1, 25/12";
  });

  // ---------------------------------------------------------------- 6
  gate.run(6, "design improvement", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    DesignSpec spec;  // D criterion, 600 s, 10 intervals, |I| <= 1C
    PsoConfig pso;    // default budget
    pso.rng_seed = 0;
    const DesignResult design = design_excitation(spec, pso, params);
    require(design.report.feasible(), "designed profile violates constraints: " +
                                          design.report.describe());
    require(design.plant_verified,
            "plant re-verification failed: " + design.plant_note);
    require(design.profile.max_abs_current_A() <= params.one_c_current_A() * (1 + 1e-12),
            "designed current exceeds the 1C bound");

    const ExcitationProfile cc = cc_baseline(spec, params);
    const DesignEvaluation cc_eval = evaluate_design(cc.segment_currents_A, spec, params);
    require(cc_eval.feasible, "constant-charge baseline infeasible");
    const double ratio = design.raw_metric / cc_eval.raw_metric;
    require(ratio >= 1.1, "designed det(F) only x" + fmt(ratio) + " of baseline (< 1.1)");

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    require(secs < 600.0, "runtime " + fmt(secs) + " s >= 10 min");
    return "designed det(F) x" + fmt(ratio) + " of constant-charge (>= 1.1), all constraints pass";
  });

  // ---------------------------------------------------------------- 7
  gate.run(7, "determinism", [&] {
    ExperimentPlan plan = load_experiment_plan(data_path("plans/default_plan.json"));
    ScopedDir a("plan_a"), b("plan_b");
    plan.threads = 1;
    const PlanRunResult ra = run_plan(plan, a.path.string());
    plan.threads = 4;
    const PlanRunResult rb = run_plan(plan, b.path.string());
    require(ra.files_written.size() == rb.files_written.size(), "file counts differ");
    for (size_t i = 0; i < ra.files_written.size(); ++i) {
      const std::string rel = fs::relative(ra.files_written[i], a.path).string();
      require(rel == fs::relative(rb.files_written[i], b.path).string(),
              "file order differs at " + rel);
      require(slurp(ra.files_written[i]) == slurp(rb.files_written[i]),
              "bytes differ in " + rel);
    }
    return "2 runs (1 vs 4 threads), " + std::to_string(ra.files_written.size()) +
           " files byte-identical";
  });

  // ---------------------------------------------------------------- 8
  gate.run(8, "core properties", [&] {
    // charge conservation + component additivity on randomized profiles
    double worst_soc = 0, worst_sum = 0;
    for (std::uint64_t seed = 100; seed < 105; ++seed) {
      const ExcitationProfile prof = random_profile(seed);
      const auto ocp = run_ocp_model(params, prof, 0.5);
      for (auto fidelity : {SolidFidelity::reduced, SolidFidelity::shells}) {
        SpmeOptions opt;
        opt.fidelity = fidelity;
        const auto sim = run_spme(params, prof, CellState::equilibrium(0.5), opt);
        for (size_t k = 0; k < sim.soc.size(); ++k) {
          worst_soc = std::max(worst_soc, std::abs(sim.soc[k] - ocp.soc[k]));
          const double sum = sim.trajectory.ocp_V[k] + sim.trajectory.eta_V[k] +
                             sim.trajectory.phie_V[k] + sim.trajectory.ir_V[k];
          worst_sum = std::max(worst_sum, std::abs(sim.trajectory.voltage_V[k] - sum));
        }
      }
    }
    require(worst_soc <= 1e-9, "charge conservation drift " + fmt(worst_soc) + " > 1e-9");
    require(worst_sum <= 1e-12, "component additivity gap " + fmt(worst_sum) + " V > 1e-12 V");

    // positive semidefinite Fisher matrices on random sensitivities
    for (std::uint64_t seed = 200; seed < 210; ++seed) {
      NormalSampler rng(seed);
      const int n = 5 + static_cast<int>(seed % 40);
      SensitivityTrajectory sens;
      sens.rows.resize(n, 4);
      for (int k = 0; k < n; ++k) {
        sens.time_s.push_back(k + 1.0);
        for (int c = 0; c < 4; ++c) sens.rows(k, c) = rng.uniform(-2.0, 2.0);
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(fisher(sens).matrix);
      const double lo = eig.eigenvalues().minCoeff();
      const double hi = eig.eigenvalues().maxCoeff();
      require(lo >= -1e-12 * std::max(1.0, hi),
              "Fisher matrix not PSD (lambda_min " + fmt(lo) + ")");
    }

    // monotone best-objective history of the swarm search
    for (std::uint64_t seed = 300; seed < 303; ++seed) {
      NormalSampler rng(seed);
      std::vector<double> center(5), lower(5, -4.0), upper(5, 4.0);
      for (auto& c : center) c = rng.uniform(-3.0, 3.0);
      PsoConfig cfg;
      cfg.swarm_size = 12;
      cfg.max_iterations = 25;
      cfg.rng_seed = seed;
      const PsoResult sol = pso_maximize(
          [&](const std::vector<double>& x) {
            double s = 0;
            for (size_t i = 0; i < x.size(); ++i) s -= (x[i] - center[i]) * (x[i] - center[i]);
            return s;
          },
          lower, upper, cfg);
      for (size_t i = 1; i < sol.history.size(); ++i)
        require(sol.history[i] >= sol.history[i - 1], "swarm best-objective history decreased");
      require(sol.best_objective == sol.history.back(), "history end != best objective");
    }

    // non-increasing cost history of the damped least-squares solver
    for (std::uint64_t seed = 400; seed < 405; ++seed) {
      NormalSampler rng(seed);
      Eigen::MatrixXd design_mat(20, 4);
      Eigen::VectorXd target(20), x0(4), lo(4), hi(4);
      for (int r = 0; r < 20; ++r) {
        target[r] = rng.uniform(-1.0, 1.0);
        for (int c = 0; c < 4; ++c) design_mat(r, c) = rng.uniform(-1.0, 1.0);
      }
      for (int c = 0; c < 4; ++c) {
        x0[c] = rng.uniform(-5.0, 5.0);
        lo[c] = -6.0;
        hi[c] = 6.0;
      }
      const LevmarResult fit = levmar_minimize(
          [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return design_mat * x - target; },
          x0, lo, hi);
      require(!fit.cost_history.empty(), "solver recorded no cost history");
      for (size_t i = 1; i < fit.cost_history.size(); ++i)
        require(fit.cost_history[i] <= fit.cost_history[i - 1],
                "solver cost history increased");
    }
    return "conservation " + fmt(worst_soc) + " <= 1e-9, additivity " + fmt(worst_sum) +
           " V <= 1e-12 V, PSD/monotonicity green on randomized inputs";
  });

  std::printf("%d of 8 criteria failed\n", gate.failures);
  return gate.failures;
}
