#pragma once

// Global-best particle swarm maximizer over a box. Velocity update:
//
//   v <- w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x)
//
// with r1, r2 fresh uniform draws per particle and dimension, velocities
// clamped to a fraction of the box width, and positions reflected back into
// the box at the walls.
// All random draws happen in the sequential update phase, so results are
// deterministic for a fixed seed no matter how objective evaluations are
// scheduled. The best-so-far objective history is monotone non-decreasing by
// construction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sohkit/common.hpp"
#include "sohkit/random.hpp"

namespace sohkit {

struct PsoConfig {
  int swarm_size = 50;
  int max_iterations = 100;
  double inertia = 0.729;
  double cognitive = 1.494;
  double social = 1.494;
  double velocity_clamp_fraction = 0.5;  // of the box width, per dimension
  double penalty_weight = 1e6;           // used by penalty-based objectives
  std::uint64_t rng_seed = 0;
  // early stop when the best objective improves by less than stall_tolerance
  // for stall_patience consecutive iterations; 0 patience disables stalling
  int stall_patience = 0;
  double stall_tolerance = 0.0;
  // candidate positions injected as the first particles (zero velocity);
  // remaining particles are seeded uniformly inside the box
  std::vector<std::vector<double>> initial_guesses;

  static void validate(const PsoConfig& c, std::size_t dims) {
    if (c.swarm_size < 2) throw Error("pso swarm_size must be >= 2");
    if (c.max_iterations < 0) throw Error("pso max_iterations must be >= 0");
    if (!(c.inertia > 0 && c.inertia < 1)) throw Error("pso inertia must be in (0,1)");
    if (!(c.cognitive > 0) || !(c.social > 0))
      throw Error("pso cognitive/social weights must be > 0");
    if (!(c.velocity_clamp_fraction > 0))
      throw Error("pso velocity_clamp_fraction must be > 0");
    if (c.stall_patience < 0) throw Error("pso stall_patience must be >= 0");
    if (static_cast<std::size_t>(c.swarm_size) < c.initial_guesses.size())
      throw Error("pso swarm_size smaller than the number of initial guesses");
    for (const auto& g : c.initial_guesses)
      if (g.size() != dims)
        throw Error("pso initial guess dimension " + std::to_string(g.size()) +
                    " does not match the search space dimension " + std::to_string(dims));
  }
};

struct PsoResult {
  std::vector<double> best_position;
  double best_objective = 0;
  // best-so-far objective after initialization (entry 0) and after each
  // iteration; non-decreasing
  std::vector<double> history;
  int iterations = 0;
  std::size_t evaluations = 0;
};

template <typename Objective>
PsoResult pso_maximize(Objective&& objective, const std::vector<double>& lower,
                       const std::vector<double>& upper, const PsoConfig& cfg) {
  const std::size_t dims = lower.size();
  if (dims == 0 || upper.size() != dims)
    throw Error("pso bounds must be non-empty and of equal dimension");
  for (std::size_t d = 0; d < dims; ++d)
    if (!(lower[d] < upper[d])) throw Error("pso bounds must satisfy lower < upper");
  PsoConfig::validate(cfg, dims);

  const std::size_t n = static_cast<std::size_t>(cfg.swarm_size);
  NormalSampler rng(cfg.rng_seed);
  auto clamp_box = [&](std::vector<double>& x) {
    for (std::size_t d = 0; d < dims; ++d) x[d] = std::clamp(x[d], lower[d], upper[d]);
  };

  std::vector<std::vector<double>> pos(n, std::vector<double>(dims, 0.0));
  std::vector<std::vector<double>> vel(n, std::vector<double>(dims, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    if (p < cfg.initial_guesses.size()) {
      // injected candidates start at rest so a zero-iteration run returns them
      pos[p] = cfg.initial_guesses[p];
      clamp_box(pos[p]);
    } else {
      for (std::size_t d = 0; d < dims; ++d) {
        const double vmax = cfg.velocity_clamp_fraction * (upper[d] - lower[d]);
        pos[p][d] = rng.uniform(lower[d], upper[d]);
        vel[p][d] = rng.uniform(-vmax, vmax);
      }
    }
  }

  PsoResult res;
  std::vector<std::vector<double>> pbest_pos = pos;
  std::vector<double> pbest_obj(n);
  std::size_t gbest = 0;
  for (std::size_t p = 0; p < n; ++p) {
    pbest_obj[p] = objective(pos[p]);
    ++res.evaluations;
    if (pbest_obj[p] > pbest_obj[gbest]) gbest = p;
  }
  res.history.push_back(pbest_obj[gbest]);

  int stalled = 0;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    const double prev_best = pbest_obj[gbest];
    // sequential phase: all random draws and state updates
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double r1 = rng.uniform01();
        const double r2 = rng.uniform01();
        double v = cfg.inertia * vel[p][d] +
                   cfg.cognitive * r1 * (pbest_pos[p][d] - pos[p][d]) +
                   cfg.social * r2 * (pbest_pos[gbest][d] - pos[p][d]);
        const double vmax = cfg.velocity_clamp_fraction * (upper[d] - lower[d]);
        v = std::clamp(v, -vmax, vmax);
        // reflect at the box walls instead of clamping: swarms keep their
        // tangential motion and can slide along active constraint faces
        // instead of freezing at an attractive corner
        double moved = pos[p][d] + v;
        if (moved < lower[d]) {
          moved = std::min(upper[d], 2 * lower[d] - moved);
          v = -v;
        } else if (moved > upper[d]) {
          moved = std::max(lower[d], 2 * upper[d] - moved);
          v = -v;
        }
        vel[p][d] = v;
        pos[p][d] = moved;
      }
    }
    // evaluation phase: objective calls are independent of one another
    for (std::size_t p = 0; p < n; ++p) {
      const double obj = objective(pos[p]);
      ++res.evaluations;
      if (obj > pbest_obj[p]) {
        pbest_obj[p] = obj;
        pbest_pos[p] = pos[p];
      }
    }
    for (std::size_t p = 0; p < n; ++p)
      if (pbest_obj[p] > pbest_obj[gbest]) gbest = p;
    res.history.push_back(pbest_obj[gbest]);
    res.iterations = it + 1;

    if (cfg.stall_patience > 0) {
      if (pbest_obj[gbest] - prev_best < cfg.stall_tolerance) {
        if (++stalled >= cfg.stall_patience) break;
      } else {
        stalled = 0;
      }
    }
  }

  res.best_position = pbest_pos[gbest];
  res.best_objective = pbest_obj[gbest];
  return res;
}

}  // namespace sohkit
