#pragma once

// Piecewise-constant current excitation over a test horizon. Current sign
// convention: positive = discharge. Samples are taken at t_k = k * sample
// period for k = 1..N (the initial instant t = 0 is the known rest state and
// is not part of the trajectory); the current attributed to sample k is the
// one applied over the interval ending at t_k. The sample period must divide
// the segment duration so an integration interval never straddles a segment
// switch.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"

namespace sohkit {

struct ExcitationProfile {
  double segment_duration_s = 0;
  std::vector<double> segment_currents_A;  // positive = discharge
  double sample_period_s = 1.0;

  double horizon_s() const {
    return segment_duration_s * static_cast<double>(segment_currents_A.size());
  }

  size_t sample_count() const {
    return static_cast<size_t>(std::llround(horizon_s() / sample_period_s));
  }

  size_t samples_per_segment() const {
    return static_cast<size_t>(std::llround(segment_duration_s / sample_period_s));
  }

  // Current over the interval ending at sample k (1-based).
  double current_for_sample(size_t k) const {
    const size_t seg = (k - 1) / samples_per_segment();
    return segment_currents_A[seg < segment_currents_A.size() ? seg
                                                              : segment_currents_A.size() - 1];
  }

  double max_abs_current_A() const {
    double m = 0;
    for (double c : segment_currents_A) m = std::max(m, std::abs(c));
    return m;
  }

  static ExcitationProfile constant(double current_A, double horizon_s, size_t segments,
                                    double sample_period_s = 1.0) {
    ExcitationProfile p;
    p.segment_duration_s = horizon_s / static_cast<double>(segments);
    p.segment_currents_A.assign(segments, current_A);
    p.sample_period_s = sample_period_s;
    validate(p);
    return p;
  }

  static void validate(const ExcitationProfile& p) {
    if (p.segment_currents_A.empty()) throw Error("excitation profile has no segments");
    if (!(p.segment_duration_s > 0)) throw Error("excitation segment_duration_s must be > 0");
    if (!(p.sample_period_s > 0)) throw Error("excitation sample_period_s must be > 0");
    const double ratio = p.segment_duration_s / p.sample_period_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1)
      throw Error("sample_period_s must divide segment_duration_s");
    for (double c : p.segment_currents_A)
      if (!std::isfinite(c)) throw Error("excitation profile contains a non-finite current");
  }
};

// Checks the C-rate bound |I| <= bound * 1C for every segment.
inline void check_current_bound(const ExcitationProfile& p, double c_rate_bound,
                                double one_c_current_A) {
  const double limit = c_rate_bound * one_c_current_A;
  for (size_t i = 0; i < p.segment_currents_A.size(); ++i)
    if (std::abs(p.segment_currents_A[i]) > limit * (1 + 1e-12))
      throw Error("segment " + std::to_string(i) + " current " +
                  format_sig(p.segment_currents_A[i]) + " A exceeds the " +
                  format_sig(c_rate_bound) + "C bound (" + format_sig(limit) + " A)");
}

inline void save_profile_csv(const ExcitationProfile& p, const std::string& path) {
  CsvTable t;
  t.columns = {"segment_index", "t_start_s", "t_end_s", "current_A"};
  for (size_t i = 0; i < p.segment_currents_A.size(); ++i)
    t.rows.push_back({static_cast<double>(i), p.segment_duration_s * static_cast<double>(i),
                      p.segment_duration_s * static_cast<double>(i + 1),
                      p.segment_currents_A[i]});
  save_csv(path, t);
}

inline ExcitationProfile load_profile_csv(const std::string& path, double sample_period_s = 1.0) {
  const CsvTable t = load_csv(path);
  const size_t ci = t.column_index("segment_index");
  const size_t cs = t.column_index("t_start_s");
  const size_t ce = t.column_index("t_end_s");
  const size_t cc = t.column_index("current_A");
  if (t.rows.empty()) throw Error("excitation profile file has no segments: " + path);
  ExcitationProfile p;
  p.sample_period_s = sample_period_s;
  p.segment_duration_s = t.rows[0][ce] - t.rows[0][cs];
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (std::llround(row[ci]) != static_cast<long long>(i))
      throw Error(path + ": segment_index values must be 0,1,2,...");
    const double dur = row[ce] - row[cs];
    if (std::abs(dur - p.segment_duration_s) > 1e-9)
      throw Error(path + ": all segments must have equal duration");
    if (std::abs(row[cs] - p.segment_duration_s * static_cast<double>(i)) > 1e-9)
      throw Error(path + ": segments must tile the horizon contiguously");
    p.segment_currents_A.push_back(row[cc]);
  }
  ExcitationProfile::validate(p);
  return p;
}

}  // namespace sohkit
