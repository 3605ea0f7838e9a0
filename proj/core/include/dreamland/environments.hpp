#pragma once

#include <cstddef>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "dreamland/numerics.hpp"
#include "dreamland/rng.hpp"

namespace dreamland {

struct EnvStep {
  Vector state;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;  // done because the step limit was reached
};

// Ground-truth target environment. The observation is the raw state vector.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_size() const = 0;
  virtual std::size_t action_size() const = 0;
  virtual std::size_t max_episode_steps() const = 0;
  virtual nlohmann::json describe() const = 0;

  virtual Vector reset(Rng& rng) = 0;
  // Actions outside [-1, 1] are clamped. Throws std::logic_error once done.
  virtual EnvStep step(VectorCRef action, Rng& rng) = 0;
  // Scripted proportional controller acting on the current state.
  virtual Vector expert_action() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  bool done() const { return done_; }
  std::size_t steps() const { return steps_; }

 protected:
  bool done_ = true;
  std::size_t steps_ = 0;
};

// Stand-in for a hazard-dodging task: the agent moves on [-1, 1] while
// hazards fall toward its line. +1 per surviving step; an impact within the
// collision radius ends the episode.
//
// Observation: [agent, hazard_1 position, hazard_1 height, ...].
struct DodgeWorldParams {
  std::size_t hazards = 2;
  double collision_radius = 0.25;
  double agent_speed = 0.12;
  double fall_speed_min = 0.025;
  double fall_speed_max = 0.05;
  double process_noise = 0.01;
  std::size_t max_episode_steps = 2100;
};

class DodgeWorld final : public Environment {
 public:
  explicit DodgeWorld(DodgeWorldParams params = {});

  std::string name() const override { return "dodge"; }
  std::size_t state_size() const override { return 1 + 2 * params_.hazards; }
  std::size_t action_size() const override { return 1; }
  std::size_t max_episode_steps() const override { return params_.max_episode_steps; }
  nlohmann::json describe() const override;

  Vector reset(Rng& rng) override;
  EnvStep step(VectorCRef action, Rng& rng) override;
  Vector expert_action() const override;
  std::unique_ptr<Environment> clone() const override;

  const DodgeWorldParams& params() const { return params_; }

 private:
  void respawn(std::size_t j, Rng& rng, double height);
  Vector observe() const;

  DodgeWorldParams params_;
  double agent_ = 0.0;
  Vector position_;
  Vector height_;
  Vector fall_speed_;
};

// Stand-in for a tile-crossing racing task: a car follows a curved track of
// unit progress. Reward per step is 100/N_tiles - 0.1 for each newly crossed
// tile and -0.1 otherwise; the episode ends once every tile is crossed.
//
// Observation: [progress, speed, lateral offset, heading error].
// Action: [steer, throttle]; throttle a maps to gas (a + 1) / 2 in [0, 1].
struct TrackWorldParams {
  std::size_t tiles = 20;
  double track_length = 60.0;
  double accel = 0.02;
  double drag = 0.05;
  double grass_drag = 0.25;  // extra drag while |offset| > 1
  double steer_gain = 0.12;
  double curvature = 0.08;
  double curvature_cycles = 3.0;
  double process_noise = 0.01;
  std::size_t max_episode_steps = 1000;
};

class TrackWorld final : public Environment {
 public:
  explicit TrackWorld(TrackWorldParams params = {});

  std::string name() const override { return "track"; }
  std::size_t state_size() const override { return 4; }
  std::size_t action_size() const override { return 2; }
  std::size_t max_episode_steps() const override { return params_.max_episode_steps; }
  nlohmann::json describe() const override;

  Vector reset(Rng& rng) override;
  EnvStep step(VectorCRef action, Rng& rng) override;
  Vector expert_action() const override;
  std::unique_ptr<Environment> clone() const override;

  double curvature_at(double progress) const;
  std::size_t tiles_crossed() const { return tiles_crossed_; }
  const TrackWorldParams& params() const { return params_; }

  // Places the car directly; used by tests.
  void set_state(double progress, double speed, double offset, double heading);

 private:
  Vector observe() const;

  TrackWorldParams params_;
  double progress_ = 0.0;
  double speed_ = 0.0;
  double offset_ = 0.0;
  double heading_ = 0.0;
  std::size_t tiles_crossed_ = 0;
};

// Builds "dodge" or "track" from a JSON parameter object (missing keys keep
// their defaults). Throws std::invalid_argument on unknown names or keys.
std::unique_ptr<Environment> make_environment(const std::string& name,
                                              const nlohmann::json& params = nlohmann::json::object());

}  // namespace dreamland
