#pragma once

// Injected model/measurement uncertainty turning a clean plant simulation
// into "measured" data:
//   V_m(t_k) = V(t_k) + model_bias + lag_gain * L(t_k) + meas_bias + sigma * z_k
// where L is a first-order lag of the applied current (an input-correlated
// model error component) and z_k are i.i.d. standard normal draws from the
// seeded sampler. Identical spec + seed reproduces the noise sequence
// bit-for-bit.

#include <cmath>
#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "sohkit/common.hpp"
#include "sohkit/csv.hpp"
#include "sohkit/random.hpp"
#include "sohkit/trajectory.hpp"

namespace sohkit {

struct UncertaintySpec {
  double model_bias_V = 0;
  double model_lag_gain_V_per_A = 0;
  double model_lag_tau_s = 1.0;
  double meas_bias_V = 0;
  double meas_noise_sigma_V = 0;
  std::uint64_t rng_seed = 0;

  bool any() const {
    return model_bias_V != 0 || model_lag_gain_V_per_A != 0 || meas_bias_V != 0 ||
           meas_noise_sigma_V != 0;
  }

  static void validate(const UncertaintySpec& u) {
    if (u.meas_noise_sigma_V < 0) throw Error("meas_noise_sigma_V must be >= 0");
    if (u.model_lag_gain_V_per_A != 0 && !(u.model_lag_tau_s > 0))
      throw Error("model_lag_tau_s must be > 0 when model_lag_gain_V_per_A is nonzero");
  }
};

inline UncertaintySpec uncertainty_from_json(const nlohmann::json& j) {
  UncertaintySpec u;
  u.model_bias_V = j.value("model_bias_V", 0.0);
  u.model_lag_gain_V_per_A = j.value("model_lag_gain_V_per_A", 0.0);
  u.model_lag_tau_s = j.value("model_lag_tau_s", 1.0);
  u.meas_bias_V = j.value("meas_bias_V", 0.0);
  u.meas_noise_sigma_V = j.value("meas_noise_sigma_V", 0.0);
  u.rng_seed = j.value("rng_seed", std::uint64_t{0});
  UncertaintySpec::validate(u);
  return u;
}

inline UncertaintySpec load_uncertainty(const std::string& path) {
  try {
    return uncertainty_from_json(nlohmann::json::parse(read_text_file(path), nullptr, true,
                                                       /*ignore_comments=*/true));
  } catch (const nlohmann::json::exception& e) {
    throw Error("cannot parse uncertainty file " + path + ": " + e.what());
  }
}

// Produces a plant-measured trajectory; the composition breakdown (if any)
// does not survive measurement.
inline VoltageTrajectory apply_uncertainty(const VoltageTrajectory& clean,
                                           const UncertaintySpec& unc) {
  UncertaintySpec::validate(unc);
  VoltageTrajectory out;
  out.sample_period_s = clean.sample_period_s;
  out.time_s = clean.time_s;
  out.current_A = clean.current_A;
  out.provenance = Provenance::plant_measured;
  out.voltage_V.resize(clean.size());
  NormalSampler noise(unc.rng_seed);
  double lag = 0.0;  // L(0) = 0: the lag state starts relaxed at rest
  const double decay =
      unc.model_lag_tau_s > 0 ? std::exp(-clean.sample_period_s / unc.model_lag_tau_s) : 0.0;
  for (size_t k = 0; k < clean.size(); ++k) {
    const double i_k = clean.current_A[k];
    lag = i_k + (lag - i_k) * decay;  // exact step response of dL/dt = (I - L)/tau
    double v = clean.voltage_V[k] + unc.model_bias_V + unc.model_lag_gain_V_per_A * lag +
               unc.meas_bias_V;
    if (unc.meas_noise_sigma_V > 0) v += unc.meas_noise_sigma_V * noise.normal();
    out.voltage_V[k] = v;
  }
  return out;
}

}  // namespace sohkit
