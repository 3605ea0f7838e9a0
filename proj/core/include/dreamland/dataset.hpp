#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamland/environments.hpp"
#include "dreamland/numerics.hpp"
#include "dreamland/world_model.hpp"

namespace dreamland {

// (z_t, a_t, r_t, d_t) tuples, where z_t is observed before a_t is taken and
// d_t is true only on the final tuple.
struct Trajectory {
  Matrix states;   // T x n
  Matrix actions;  // T x action size
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  std::string policy;
  std::uint64_t seed = 0;

  std::size_t size() const { return rewards.size(); }
  double total_reward() const;
  bool operator==(const Trajectory& o) const;
};

struct Dataset {
  static constexpr std::uint32_t kVersion = 1;

  std::string env;
  nlohmann::json env_params = nlohmann::json::object();
  std::size_t state_size = 0;
  std::size_t action_size = 0;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<Trajectory> trajectories;
  std::vector<std::size_t> train;  // indices into trajectories
  std::vector<std::size_t> test;

  // Throws std::invalid_argument if a split index is out of range, the two
  // splits overlap, or a trajectory violates the shape/termination invariants.
  void validate() const;
  // New dataset holding only the listed trajectories, all in the train split.
  Dataset subset(const std::vector<std::size_t>& indices) const;
  bool operator==(const Dataset&) const = default;
};

/// Runs `count` episodes; at each step the environment's expert action is
/// taken with probability mix_expert_prob, otherwise a uniform action in
/// [-1, 1]. Episode i uses the stream Rng::derive(seed, {i}). Every trajectory
/// lands in the train split.
Dataset collect_trajectories(const Environment& env, std::size_t count, double mix_expert_prob,
                             std::uint64_t seed);

// Moves the last `test_count` trajectories to the test split.
void split_train_test(Dataset& ds, std::size_t test_count);

// Line 1: JSON header (format, version, env, dimensions, splits, metadata).
// Then per trajectory: a JSON line {"len","policy","seed","checksum"} followed
// by len * (n + a + 2) little-endian float64 values and a newline.
std::string encode_dataset(const Dataset& ds);
Dataset decode_dataset(std::string_view bytes);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

// Splits a trajectory into windows of `length` steps for dynamics training.
// Windows start at 0, length, 2*length, ...; a final window aligned to the
// end of the trajectory is added when the length does not divide T, so the
// terminal transition is always seen. Trajectories shorter than `length` yield
// nothing.
std::vector<Sequence> make_training_windows(const Trajectory& traj, std::size_t length);
// Whole trajectory as one sequence.
Sequence make_sequence(const Trajectory& traj);

}  // namespace dreamland
