#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamland/controller.hpp"
#include "dreamland/controller_opt.hpp"
#include "dreamland/dream_env.hpp"
#include "dreamland/model_trainer.hpp"

namespace dreamland {

// Raised for unknown keys, malformed values and unreadable config files.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir;  // empty: resolved by the caller

  std::string env = "track";
  nlohmann::json env_params = nlohmann::json::object();

  std::size_t train_trajectories = 200;
  std::size_t test_trajectories = 50;
  double mix_expert_prob = 0.9;

  TrainConfig train;
  std::size_t ensemble_size = 1;

  DreamConfig dream;
  CmaConfig cma;
  FeatureSpec features = FeatureSpec::kZH;

  std::size_t real_episodes = 100;
  std::size_t loss_mask_samples = 4;

  // Flat "section.key" -> canonical scalar text, sorted by key.
  std::map<std::string, std::string> to_flat() const;
  static ExperimentConfig from_flat(const std::map<std::string, std::string>& flat);

  std::string to_yaml() const;
  // FNV-1a over the canonical flat form, excluding seed, out_dir and
  // cma.threads (none of which change what a run computes apart from the seed,
  // which every report row carries separately). 16 hex digits.
  std::string hash() const;
  void validate() const;
};

/// Defaults, then the YAML file (if any), then each "section.key=value"
/// override in order. Unknown keys are rejected, except under env.params.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::vector<std::string>& overrides = {});
void apply_override(std::map<std::string, std::string>& flat, const std::string& assignment);

}  // namespace dreamland
