// Parameter core: CSV/seed utilities, OCP curve interpolation, parameter
// loading/validation, health vector round trips, degradation scenarios.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <functional>

#include <nlohmann/json.hpp>

#include "sohkit/csv.hpp"
#include "sohkit/ocp_curve.hpp"
#include "sohkit/parameters.hpp"
#include "sohkit/random.hpp"
#include "test_support.hpp"

using namespace sohkit;

TEST_CASE("CSV save/load/save is byte-identical") {
  testsup::TempDir tmp;
  CsvTable t;
  t.comments = {"# demo table"};
  t.columns = {"a", "b"};
  t.rows = {{1.0, 2.5}, {1.0 / 3.0, 6.02214076e23}, {-1.25e-9, 0.0}};
  const std::string p1 = tmp.file("t1.csv");
  const std::string p2 = tmp.file("t2.csv");
  save_csv(p1, t);
  const CsvTable back = load_csv(p1);
  REQUIRE(back.columns == t.columns);
  REQUIRE(back.rows.size() == t.rows.size());
  save_csv(p2, back);
  CHECK(read_text_file(p1) == read_text_file(p2));
}

TEST_CASE("CSV parse errors are reported with location") {
  testsup::TempDir tmp;
  const std::string p = tmp.file("bad.csv");
  write_text_file(p, "a,b\n1.0,zzz\n");
  CHECK_THROWS_WITH(load_csv(p), Catch::Matchers::ContainsSubstring("zzz"));
  write_text_file(p, "a,b\n1.0\n");
  CHECK_THROWS_WITH(load_csv(p), Catch::Matchers::ContainsSubstring("expected 2 fields"));
}

TEST_CASE("seed derivation is deterministic and path-sensitive") {
  CHECK(derive_seed(42, {1, 2}) == derive_seed(42, {1, 2}));
  CHECK(derive_seed(42, {1, 2}) != derive_seed(42, {2, 1}));
  CHECK(derive_seed(42, {1, 2}) != derive_seed(43, {1, 2}));
  CHECK(derive_seed(42, {1}) != derive_seed(42, {1, 0}));
}

TEST_CASE("normal sampler reproduces sequences and has sane moments") {
  NormalSampler a(123), b(123);
  for (int i = 0; i < 100; ++i) REQUIRE(a.normal() == b.normal());

  NormalSampler s(2024);
  const int n = 200000;
  double sum = 0, sum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sum2 / n - 1.0) < 0.02);
}

TEST_CASE("OCP curve interpolates knots exactly and refuses extrapolation") {
  const std::vector<double> x = {0.0, 0.2, 0.5, 1.0};
  const std::vector<double> u = {3.0, 2.5, 2.2, 2.0};
  for (auto rule : {OcpInterpolation::monotone_cubic, OcpInterpolation::linear}) {
    const OcpCurve c("demo", x, u, rule);
    for (size_t i = 0; i < x.size(); ++i)
      CHECK(c.eval(x[i]).value == Catch::Approx(u[i]).margin(1e-14));
    CHECK_THROWS_WITH(c.eval(-0.01), Catch::Matchers::ContainsSubstring("outside knot range"));
    CHECK_THROWS_WITH(c.eval(1.01), Catch::Matchers::ContainsSubstring("outside knot range"));
    CHECK(c.eval_clamped(-5.0).value == Catch::Approx(u.front()).margin(1e-14));
    CHECK(c.eval_clamped(5.0).value == Catch::Approx(u.back()).margin(1e-14));
  }
}

TEST_CASE("linear OCP midpoint is the mean of the knot potentials") {
  const OcpCurve c("demo", {0.0, 1.0}, {3.0, 2.0}, OcpInterpolation::linear);
  const auto e = c.eval(0.5);
  CHECK(e.value == Catch::Approx(2.5).margin(1e-15));
  CHECK(e.slope == Catch::Approx(-1.0).margin(1e-15));
}

TEST_CASE("OCP curve rejects malformed knot tables") {
  CHECK_THROWS_WITH(OcpCurve("bad", {0.0, 0.0, 1.0}, {3, 2, 1}),
                    Catch::Matchers::ContainsSubstring("strictly increasing"));
  CHECK_THROWS_WITH(OcpCurve("bad", {0.0}, {3}),
                    Catch::Matchers::ContainsSubstring("at least 2 knots"));
}

TEST_CASE("monotone cubic slope matches finite differences of its own value") {
  // the bundled electrode tables are the real consumers of the interpolant
  for (const char* name : {"ocp_neg_graphite.csv", "ocp_pos_nmc811.csv"}) {
    const OcpCurve c = OcpCurve::from_csv(
        (testsup::data_dir() / "params" / name).string(), "electrode");
    NormalSampler rng(777);
    const auto& kx = c.knots_x();
    int checked = 0;
    while (checked < 100) {
      const size_t i = static_cast<size_t>(rng.uniform(0.0, double(kx.size() - 1)));
      // keep the (2e-6)-wide central stencil strictly inside one interval so
      // the difference sees a single cubic
      const double x = kx[i] + (kx[i + 1] - kx[i]) * rng.uniform(0.1, 0.9);
      const auto e = c.eval(x);
      if (std::abs(e.slope) < 5e-3) continue;  // flat plateaus: FD noise dominates
      const double h = 1e-6;
      const double fd = (c.eval(x + h).value - c.eval(x - h).value) / (2 * h);
      CHECK(std::abs(fd - e.slope) / std::abs(e.slope) < 1e-6);
      ++checked;
    }
  }
}

TEST_CASE("monotone cubic preserves the monotone decrease of the bundled tables") {
  const OcpCurve c = OcpCurve::from_csv(
      (testsup::data_dir() / "params" / "ocp_neg_graphite.csv").string(), "negative");
  double prev = c.eval(c.x_min()).value;
  for (int i = 1; i <= 2000; ++i) {
    const double x = c.x_min() + (c.x_max() - c.x_min()) * i / 2000.0;
    const double v = c.eval(x).value;
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}

TEST_CASE("bundled parameter set loads with the documented defaults") {
  const ParameterSet& p = testsup::default_params();
  CHECK(p.positive.active_volume_fraction == 0.665);
  CHECK(p.negative.stoich_at_0 < p.negative.stoich_at_100);   // lithiates on charge
  CHECK(p.positive.stoich_at_0 > p.positive.stoich_at_100);   // delithiates on charge
  CHECK(p.one_c_current_A() == Catch::Approx(5.0));
  CHECK(p.voltage_min_V < p.voltage_max_V);
  // electrode capacities are finite, positive, and in the expected class
  const double qn = p.negative.window_capacity_As(ParameterSet::faraday) / 3600.0;
  const double qp = p.positive.window_capacity_As(ParameterSet::faraday) / 3600.0;
  CHECK(qn > 4.0);
  CHECK(qn < 7.0);
  CHECK(qp > 4.0);
  CHECK(qp < 7.0);
}

namespace {

// Rewrites the bundled parameter file with one mutation applied and absolute
// OCP table paths, returning the new file path.
std::string mutated_params_file(const testsup::TempDir& tmp, const std::string& name,
                                const std::function<void(nlohmann::json&)>& mutate) {
  nlohmann::json j = nlohmann::json::parse(read_text_file(testsup::params_path()), nullptr, true,
                                           /*ignore_comments=*/true);
  const auto dir = testsup::data_dir() / "params";
  j["negative"]["ocp_table"] = (dir / j["negative"]["ocp_table"].get<std::string>()).string();
  j["positive"]["ocp_table"] = (dir / j["positive"]["ocp_table"].get<std::string>()).string();
  mutate(j);
  const std::string path = tmp.file(name);
  write_text_file(path, j.dump(2));
  return path;
}

}  // namespace

TEST_CASE("parameter validation rejects non-physical files by field name") {
  testsup::TempDir tmp;
  CHECK_THROWS_WITH(
      load_parameter_set(mutated_params_file(
          tmp, "eps.json", [](nlohmann::json& j) { j["positive"]["active_volume_fraction"] = 1.5; })),
      Catch::Matchers::ContainsSubstring("active_volume_fraction out of (0,1)"));
  CHECK_THROWS_WITH(
      load_parameter_set(mutated_params_file(
          tmp, "beta.json",
          [](nlohmann::json& j) {
            j["negative"]["stoich_at_0_soc"] = j["negative"]["stoich_at_100_soc"];
          })),
      Catch::Matchers::ContainsSubstring("degenerate stoichiometry window"));
  CHECK_THROWS_WITH(
      load_parameter_set(mutated_params_file(
          tmp, "missing.json", [](nlohmann::json& j) { j["negative"].erase("thickness_m"); })),
      Catch::Matchers::ContainsSubstring("missing field: negative.thickness_m"));
}

TEST_CASE("health vector extraction and injection round-trips losslessly") {
  const ParameterSet& p = testsup::default_params();
  const HealthVector h = extract_health(p);
  const ParameterSet q = with_health(p, h);
  CHECK(q.positive.active_volume_fraction == p.positive.active_volume_fraction);
  CHECK(q.negative.active_volume_fraction == p.negative.active_volume_fraction);
  CHECK(q.positive.stoich_at_0 == p.positive.stoich_at_0);
  CHECK(q.negative.stoich_at_0 == p.negative.stoich_at_0);
  const HealthVector h2 = extract_health(q);
  CHECK(h2.as_array() == h.as_array());
}

TEST_CASE("degradation scenarios scale exactly the four health fields") {
  const ParameterSet& bol = testsup::default_params();
  const auto levels = standard_degradation_levels();
  const auto& severe = find_scenario(levels, "20pct");
  CHECK(severe.ratios == std::array<double, 4>{0.80, 0.80, 0.95, 0.95});
  CHECK(find_scenario(levels, "5pct").ratios == std::array<double, 4>{0.95, 0.95, 0.975, 0.975});
  CHECK(find_scenario(levels, "10pct").ratios == std::array<double, 4>{0.90, 0.90, 0.95, 0.95});

  const ParameterSet aged = apply_degradation(bol, severe);
  CHECK(aged.positive.active_volume_fraction ==
        bol.positive.active_volume_fraction * severe.ratios[0]);
  CHECK(aged.negative.active_volume_fraction ==
        bol.negative.active_volume_fraction * severe.ratios[1]);
  CHECK(aged.positive.stoich_at_0 == bol.positive.stoich_at_0 * severe.ratios[2]);
  CHECK(aged.negative.stoich_at_0 == bol.negative.stoich_at_0 * severe.ratios[3]);
  // all other fields untouched
  CHECK(aged.positive.thickness_m == bol.positive.thickness_m);
  CHECK(aged.negative.diffusivity_m2_s == bol.negative.diffusivity_m2_s);
  CHECK(aged.positive.stoich_at_100 == bol.positive.stoich_at_100);
  CHECK(aged.lumped_resistance_ohm == bol.lumped_resistance_ohm);

  // identity scenario returns the input exactly
  const ParameterSet same = apply_degradation(bol, {"identity", {1, 1, 1, 1}});
  CHECK(extract_health(same).as_array() == extract_health(bol).as_array());

  // dividing back recovers the BOL health vector within 1e-12 relative
  const auto ha = extract_health(aged).as_array();
  const auto hb = extract_health(bol).as_array();
  for (size_t i = 0; i < 4; ++i)
    CHECK(std::abs(ha[i] / severe.ratios[i] - hb[i]) <= 1e-12 * std::abs(hb[i]));
}

TEST_CASE("degradation scenarios reject out-of-range ratios") {
  const ParameterSet& bol = testsup::default_params();
  CHECK_THROWS_WITH(apply_degradation(bol, {"bad", {0.0, 1, 1, 1}}),
                    Catch::Matchers::ContainsSubstring("out of (0,1]"));
  CHECK_THROWS_WITH(apply_degradation(bol, {"bad", {1, 1.1, 1, 1}}),
                    Catch::Matchers::ContainsSubstring("out of (0,1]"));
}

TEST_CASE("parameter set load/save/load is idempotent") {
  testsup::TempDir tmp;
  // absolute OCP table references so the copy in the temp dir resolves them
  const std::string p1 = mutated_params_file(tmp, "copy.json", [](nlohmann::json&) {});
  const ParameterSet a = load_parameter_set(p1);
  const std::string p2 = tmp.file("resaved.json");
  save_parameter_set(a, p2);
  const ParameterSet b = load_parameter_set(p2);
  CHECK(b.positive.active_volume_fraction == a.positive.active_volume_fraction);
  CHECK(b.negative.stoich_at_0 == a.negative.stoich_at_0);
  CHECK(b.negative.diffusivity_m2_s == a.negative.diffusivity_m2_s);
  CHECK(b.electrolyte.transference_number == a.electrolyte.transference_number);
  CHECK(b.temperature_K == a.temperature_K);
  CHECK(b.nominal_capacity_Ah == a.nominal_capacity_Ah);
  const std::string p3 = tmp.file("resaved2.json");
  save_parameter_set(b, p3);
  CHECK(read_text_file(p2) == read_text_file(p3));
}
