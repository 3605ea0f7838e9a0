#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamland/controller.hpp"
#include "dreamland/dream_env.hpp"
#include "dreamland/environments.hpp"
#include "dreamland/world_model.hpp"

namespace dreamland {

struct CmaConfig {
  std::size_t population = 16;   // N_pop
  std::size_t trials = 4;        // N_trials
  std::size_t generations = 200;
  std::size_t eval_cadence = 25;
  double initial_sigma = 0.5;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0 uses the hardware concurrency

  void validate() const;
  nlohmann::json to_json() const;
};

struct LeaderEntry {
  std::size_t generation = 0;  // 1-based
  ControllerParams controller;
  double dream_mean = 0.0;
  double dream_std = 0.0;
};

struct LeaderBoard {
  std::vector<LeaderEntry> entries;

  // Entry with the highest dream mean (earliest on ties). Throws if empty.
  const LeaderEntry& best() const;
  // generation,dream_mean,dream_std
  void write_csv(std::ostream& out) const;
};

struct GenerationStats {
  std::size_t generation = 0;  // 1-based
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double sigma = 0.0;
  std::uint64_t masks_sampled = 0;  // population evaluation only
  std::uint64_t episodes = 0;
  std::uint64_t dream_steps = 0;
  std::size_t flagged = 0;  // members with non-finite fitness
};

struct OptimizeResult {
  LeaderBoard board;
  ControllerParams best;
  std::vector<GenerationStats> history;
};

// Builds a fresh dream environment; called once per worker thread.
using DreamEnvFactory = std::function<std::unique_ptr<DreamEnv>()>;

struct EpisodeOutcome {
  double total_reward = 0.0;
  std::size_t steps = 0;
};

EpisodeOutcome run_dream_episode(DreamEnv& env, const ControllerParams& ctrl, Rng& rng);

/// CMA-ES over the flattened controller starting from mean 0. Member m of
/// generation g is scored by the mean return of N_trials dream episodes seeded
/// Rng::derive(seed, {0, g, m, t}). Every eval_cadence generations the best
/// member is re-scored over N_pop * N_trials episodes and logged; the
/// returned controller is the leader-board maximum (the final generation's
/// best member is logged too when the cadence does not divide the count).
OptimizeResult cma_optimize(const DreamEnvFactory& make_env, const ControllerParams& shape,
                            const CmaConfig& cfg);

struct RealEvaluation {
  double mean = 0.0;
  double std = 0.0;
  std::vector<double> returns;
};

/// Rolls out ctrl on episodes seeded Rng::derive(seed, {e}). z is the raw
/// state; a mask-free pass of the world model supplies h and c. Throws
/// DimensionError if the controller, model and environment disagree.
RealEvaluation evaluate_real(const ControllerParams& ctrl, const WorldModelParams& model,
                             const Environment& env, std::size_t n_episodes, std::uint64_t seed);

}  // namespace dreamland
