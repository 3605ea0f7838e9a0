#include "dreamland/environments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace dreamland {
namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

void check_action(VectorCRef action, std::size_t expected) {
  require_size(static_cast<std::size_t>(action.size()), expected, "environment action");
  if (!action.allFinite()) {
    throw NumericError("environment action contains non-finite entries");
  }
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) {
    field = j.at(key).get<T>();
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known,
                    const std::string& env) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw std::invalid_argument("unknown " + env + " parameter '" + key + "'");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- DodgeWorld

DodgeWorld::DodgeWorld(DodgeWorldParams params) : params_(params) {
  if (params_.max_episode_steps == 0 || !(params_.collision_radius > 0.0) ||
      !(params_.fall_speed_min > 0.0) || params_.fall_speed_max < params_.fall_speed_min) {
    throw std::invalid_argument("DodgeWorld: invalid parameters");
  }
  const auto h = static_cast<Eigen::Index>(params_.hazards);
  position_ = Vector::Zero(h);
  height_ = Vector::Ones(h);
  fall_speed_ = Vector::Constant(h, params_.fall_speed_min);
}

nlohmann::json DodgeWorld::describe() const {
  return {{"hazards", params_.hazards},
          {"collision_radius", params_.collision_radius},
          {"agent_speed", params_.agent_speed},
          {"fall_speed_min", params_.fall_speed_min},
          {"fall_speed_max", params_.fall_speed_max},
          {"process_noise", params_.process_noise},
          {"max_episode_steps", params_.max_episode_steps}};
}

void DodgeWorld::respawn(std::size_t j, Rng& rng, double height) {
  const auto i = static_cast<Eigen::Index>(j);
  position_[i] = rng.uniform(-1.0, 1.0);
  height_[i] = height;
  fall_speed_[i] = rng.uniform(params_.fall_speed_min, params_.fall_speed_max);
}

Vector DodgeWorld::observe() const {
  Vector z(static_cast<Eigen::Index>(state_size()));
  z[0] = agent_;
  for (Eigen::Index j = 0; j < position_.size(); ++j) {
    z[1 + 2 * j] = position_[j];
    z[2 + 2 * j] = height_[j];
  }
  return z;
}

Vector DodgeWorld::reset(Rng& rng) {
  agent_ = 0.0;
  for (std::size_t j = 0; j < params_.hazards; ++j) {
    // Stagger the first impacts so hazards do not arrive together.
    respawn(j, rng, rng.uniform(0.4, 1.0));
  }
  done_ = false;
  steps_ = 0;
  return observe();
}

EnvStep DodgeWorld::step(VectorCRef action, Rng& rng) {
  if (done_) {
    throw std::logic_error("DodgeWorld::step on a finished episode");
  }
  check_action(action, action_size());
  const double a = clamp_unit(action[0]);
  agent_ = std::clamp(agent_ + params_.agent_speed * a + rng.normal(0.0, params_.process_noise),
                      -1.0, 1.0);
  bool hit = false;
  for (std::size_t j = 0; j < params_.hazards; ++j) {
    const auto i = static_cast<Eigen::Index>(j);
    height_[i] -= fall_speed_[i];
    if (height_[i] <= 0.0) {
      if (std::abs(agent_ - position_[i]) < params_.collision_radius) {
        hit = true;
      }
      respawn(j, rng, 1.0);
    }
  }
  ++steps_;
  EnvStep out;
  out.reward = hit ? 0.0 : 1.0;
  out.truncated = !hit && steps_ >= params_.max_episode_steps;
  out.done = hit || out.truncated;
  done_ = out.done;
  out.state = observe();
  return out;
}

Vector DodgeWorld::expert_action() const {
  // Greedy one-step lookahead on an urgency-weighted overlap penalty.
  constexpr std::array<double, 5> kCandidates = {-1.0, -0.5, 0.0, 0.5, 1.0};
  const double margin = params_.collision_radius + 0.15;
  double best_cost = std::numeric_limits<double>::infinity();
  double best = 0.0;
  for (double a : kCandidates) {
    const double x = std::clamp(agent_ + params_.agent_speed * a, -1.0, 1.0);
    double cost = 0.01 * std::abs(x);
    for (Eigen::Index j = 0; j < position_.size(); ++j) {
      const double steps_to_impact = std::max(1.0, height_[j] / fall_speed_[j]);
      const double overlap = std::max(0.0, margin - std::abs(x - position_[j]));
      cost += overlap / steps_to_impact;
    }
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      best = a;
    }
  }
  Vector out(1);
  out[0] = best;
  return out;
}

std::unique_ptr<Environment> DodgeWorld::clone() const { return std::make_unique<DodgeWorld>(*this); }

// ---------------------------------------------------------------- TrackWorld

TrackWorld::TrackWorld(TrackWorldParams params) : params_(params) {
  if (params_.tiles == 0 || params_.max_episode_steps == 0 || !(params_.track_length > 0.0)) {
    throw std::invalid_argument("TrackWorld: invalid parameters");
  }
}

nlohmann::json TrackWorld::describe() const {
  return {{"tiles", params_.tiles},
          {"track_length", params_.track_length},
          {"accel", params_.accel},
          {"drag", params_.drag},
          {"grass_drag", params_.grass_drag},
          {"steer_gain", params_.steer_gain},
          {"curvature", params_.curvature},
          {"curvature_cycles", params_.curvature_cycles},
          {"process_noise", params_.process_noise},
          {"max_episode_steps", params_.max_episode_steps}};
}

double TrackWorld::curvature_at(double progress) const {
  return params_.curvature * std::sin(2.0 * std::numbers::pi * params_.curvature_cycles * progress);
}

Vector TrackWorld::observe() const {
  Vector z(4);
  z << progress_, speed_, offset_, heading_;
  return z;
}

void TrackWorld::set_state(double progress, double speed, double offset, double heading) {
  progress_ = progress;
  speed_ = speed;
  offset_ = offset;
  heading_ = heading;
  tiles_crossed_ = static_cast<std::size_t>(
      std::clamp(std::floor(progress_ * static_cast<double>(params_.tiles)), 0.0,
                 static_cast<double>(params_.tiles)));
  done_ = false;
}

Vector TrackWorld::reset(Rng& rng) {
  progress_ = 0.0;
  speed_ = 0.0;
  offset_ = rng.normal(0.0, 0.05);
  heading_ = rng.normal(0.0, 0.05);
  tiles_crossed_ = 0;
  done_ = false;
  steps_ = 0;
  return observe();
}

EnvStep TrackWorld::step(VectorCRef action, Rng& rng) {
  if (done_) {
    throw std::logic_error("TrackWorld::step on a finished episode");
  }
  check_action(action, action_size());
  const double steer = clamp_unit(action[0]);
  const double gas = 0.5 * (clamp_unit(action[1]) + 1.0);

  double drag = params_.drag;
  if (std::abs(offset_) > 1.0) {
    drag += params_.grass_drag;
  }
  speed_ = std::max(0.0, speed_ + params_.accel * gas - drag * speed_);
  heading_ += params_.steer_gain * steer - curvature_at(progress_) * speed_ +
              rng.normal(0.0, params_.process_noise);
  offset_ += speed_ * std::sin(heading_) + rng.normal(0.0, params_.process_noise);
  progress_ += speed_ * std::cos(heading_) / params_.track_length;

  const auto n_tiles = static_cast<double>(params_.tiles);
  const auto reached = static_cast<std::size_t>(
      std::clamp(std::floor(progress_ * n_tiles), 0.0, n_tiles));
  const std::size_t fresh = reached > tiles_crossed_ ? reached - tiles_crossed_ : 0;
  tiles_crossed_ += fresh;
  ++steps_;

  EnvStep out;
  out.reward = static_cast<double>(fresh) * (100.0 / n_tiles) - 0.1;
  const bool finished = tiles_crossed_ >= params_.tiles;
  out.truncated = !finished && steps_ >= params_.max_episode_steps;
  out.done = finished || out.truncated;
  done_ = out.done;
  out.state = observe();
  return out;
}

Vector TrackWorld::expert_action() const {
  const double feedforward = curvature_at(progress_) * speed_;
  const double correction = -0.3 * offset_ - heading_;
  Vector a(2);
  a[0] = clamp_unit((feedforward + 0.8 * correction) / params_.steer_gain);
  a[1] = std::abs(offset_) < 0.8 ? 1.0 : -0.4;
  return a;
}

std::unique_ptr<Environment> TrackWorld::clone() const { return std::make_unique<TrackWorld>(*this); }

std::unique_ptr<Environment> make_environment(const std::string& name, const nlohmann::json& params) {
  if (name == "dodge") {
    DodgeWorldParams p;
    reject_unknown(params,
                   {"hazards", "collision_radius", "agent_speed", "fall_speed_min", "fall_speed_max",
                    "process_noise", "max_episode_steps"},
                   name);
    read_key(params, "hazards", p.hazards);
    read_key(params, "collision_radius", p.collision_radius);
    read_key(params, "agent_speed", p.agent_speed);
    read_key(params, "fall_speed_min", p.fall_speed_min);
    read_key(params, "fall_speed_max", p.fall_speed_max);
    read_key(params, "process_noise", p.process_noise);
    read_key(params, "max_episode_steps", p.max_episode_steps);
    return std::make_unique<DodgeWorld>(p);
  }
  if (name == "track") {
    TrackWorldParams p;
    reject_unknown(params,
                   {"tiles", "track_length", "accel", "drag", "grass_drag", "steer_gain",
                    "curvature", "curvature_cycles", "process_noise", "max_episode_steps"},
                   name);
    read_key(params, "tiles", p.tiles);
    read_key(params, "track_length", p.track_length);
    read_key(params, "accel", p.accel);
    read_key(params, "drag", p.drag);
    read_key(params, "grass_drag", p.grass_drag);
    read_key(params, "steer_gain", p.steer_gain);
    read_key(params, "curvature", p.curvature);
    read_key(params, "curvature_cycles", p.curvature_cycles);
    read_key(params, "process_noise", p.process_noise);
    read_key(params, "max_episode_steps", p.max_episode_steps);
    return std::make_unique<TrackWorld>(p);
  }
  throw std::invalid_argument("unknown environment '" + name + "' (expected dodge or track)");
}

}  // namespace dreamland
