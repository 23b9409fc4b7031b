#pragma once

// Time-stamped voltage samples with provenance, optionally carrying the
// four-part composition (OCP, kinetic overpotential, electrolyte potential,
// ohmic drop). Components are attached to model-predicted trajectories only:
// applying measurement/model uncertainty or differencing produces plain
// voltage samples. CSV persistence round-trips byte-identically (12
// significant digits).

#include <cmath>
#include <string>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"

namespace sohkit {

enum class Provenance { plant_measured, model_predicted, differenced };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::plant_measured: return "plant_measured";
    case Provenance::model_predicted: return "model_predicted";
    case Provenance::differenced: return "differenced";
  }
  return "unknown";
}

struct VoltageTrajectory {
  double sample_period_s = 1.0;
  std::vector<double> time_s;     // t_k = k * sample_period, k = 1..N
  std::vector<double> current_A;  // current over the interval ending at t_k
  std::vector<double> voltage_V;
  Provenance provenance = Provenance::model_predicted;
  bool has_components = false;
  std::vector<double> ocp_V, eta_V, phie_V, ir_V;

  size_t size() const { return time_s.size(); }

  void require_consistent() const {
    if (current_A.size() != time_s.size() || voltage_V.size() != time_s.size())
      throw Error("voltage trajectory column lengths disagree");
    if (has_components &&
        (ocp_V.size() != time_s.size() || eta_V.size() != time_s.size() ||
         phie_V.size() != time_s.size() || ir_V.size() != time_s.size()))
      throw Error("voltage trajectory component column lengths disagree");
    for (size_t k = 1; k < time_s.size(); ++k)
      if (!(time_s[k] > time_s[k - 1]))
        throw Error("voltage trajectory timestamps must be strictly increasing");
  }
};

inline VoltageTrajectory diff_trajectories(const VoltageTrajectory& a,
                                           const VoltageTrajectory& b) {
  if (a.size() != b.size()) throw Error("cannot difference trajectories of different lengths");
  for (size_t k = 0; k < a.size(); ++k)
    if (std::abs(a.time_s[k] - b.time_s[k]) > 1e-9)
      throw Error("cannot difference trajectories: timestamps differ at sample " +
                  std::to_string(k));
  VoltageTrajectory d;
  d.sample_period_s = a.sample_period_s;
  d.time_s = a.time_s;
  d.current_A = a.current_A;
  d.voltage_V.resize(a.size());
  for (size_t k = 0; k < a.size(); ++k) d.voltage_V[k] = a.voltage_V[k] - b.voltage_V[k];
  d.provenance = Provenance::differenced;
  return d;
}

inline void save_trajectory_csv(const VoltageTrajectory& tr, const std::string& path) {
  tr.require_consistent();
  CsvTable t;
  t.comments = {"# provenance: " + to_string(tr.provenance),
                "# sample_period_s: " + format_sig(tr.sample_period_s)};
  t.columns = {"t_s", "current_A", "voltage_V"};
  if (tr.has_components) {
    t.columns.insert(t.columns.end(), {"ocp_V", "eta_V", "phie_V", "ir_V"});
  }
  for (size_t k = 0; k < tr.size(); ++k) {
    std::vector<double> row = {tr.time_s[k], tr.current_A[k], tr.voltage_V[k]};
    if (tr.has_components) {
      row.push_back(tr.ocp_V[k]);
      row.push_back(tr.eta_V[k]);
      row.push_back(tr.phie_V[k]);
      row.push_back(tr.ir_V[k]);
    }
    t.rows.push_back(std::move(row));
  }
  save_csv(path, t);
}

inline VoltageTrajectory load_trajectory_csv(const std::string& path) {
  const CsvTable t = load_csv(path);
  VoltageTrajectory tr;
  tr.provenance = Provenance::plant_measured;
  for (const auto& c : t.comments) {
    const std::string key_p = "# provenance: ";
    const std::string key_s = "# sample_period_s: ";
    if (c.rfind(key_p, 0) == 0) {
      const std::string v = c.substr(key_p.size());
      if (v == "plant_measured") tr.provenance = Provenance::plant_measured;
      else if (v == "model_predicted") tr.provenance = Provenance::model_predicted;
      else if (v == "differenced") tr.provenance = Provenance::differenced;
      else throw Error(path + ": unknown provenance tag '" + v + "'");
    } else if (c.rfind(key_s, 0) == 0) {
      tr.sample_period_s = parse_double(c.substr(key_s.size()), path + " sample_period comment");
    }
  }
  const size_t ct = t.column_index("t_s");
  const size_t ci = t.column_index("current_A");
  const size_t cv = t.column_index("voltage_V");
  tr.has_components = false;
  size_t co = 0, ce = 0, cp = 0, cr = 0;
  for (size_t i = 0; i < t.columns.size(); ++i)
    if (t.columns[i] == "ocp_V") tr.has_components = true;
  if (tr.has_components) {
    co = t.column_index("ocp_V");
    ce = t.column_index("eta_V");
    cp = t.column_index("phie_V");
    cr = t.column_index("ir_V");
  }
  for (const auto& row : t.rows) {
    tr.time_s.push_back(row[ct]);
    tr.current_A.push_back(row[ci]);
    tr.voltage_V.push_back(row[cv]);
    if (tr.has_components) {
      tr.ocp_V.push_back(row[co]);
      tr.eta_V.push_back(row[ce]);
      tr.phie_V.push_back(row[cp]);
      tr.ir_V.push_back(row[cr]);
    }
  }
  tr.require_consistent();
  return tr;
}

}  // namespace sohkit
