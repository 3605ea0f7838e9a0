#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dreamland/dataset.hpp"
#include "dreamland/dropout_lstm.hpp"
#include "dreamland/model_trainer.hpp"
#include "dreamland/world_model.hpp"

namespace dreamland {

// Off: all-ones mask throughout. Episode: one MaskSet (and ensemble member)
// per episode. Step: a fresh MaskSet (and ensemble member) every step.
enum class RandomizationPolicy { kOff, kEpisode, kStep };
enum class LatentInit { kStandardNormal, kDatasetStarts };

std::string to_string(RandomizationPolicy p);
RandomizationPolicy parse_policy(const std::string& s);
std::string to_string(LatentInit z);
LatentInit parse_latent_init(const std::string& s);
std::string to_string(InferenceScaling s);
InferenceScaling parse_scaling(const std::string& s);

struct DreamConfig {
  double p_infer = 0.1;
  RandomizationPolicy policy = RandomizationPolicy::kStep;
  std::size_t mc_samples = 0;  // 0 disables MC-dropout averaging
  LatentInit z_init = LatentInit::kDatasetStarts;
  std::size_t max_episode_steps = 1000;
  double noise_sigma = 0.0;  // 0 disables the noisy variant
  InferenceScaling scaling = InferenceScaling::kActiveRate;
  double p_train = 0.0;  // only read under InferenceScaling::kTrainRate

  // MC-dropout, additive noise and ensembles (size > 1) are mutually exclusive.
  void validate(std::size_t ensemble_size) const;
};

struct DreamObservation {
  Vector z;
  Vector h;
  Vector c;
};

struct DreamStep {
  Vector z;
  double reward = 0.0;     // r-hat, consumed as predicted
  double done_prob = 0.0;  // d-hat that parameterised the termination draw
  bool done = false;
  bool truncated = false;  // done forced by max_episode_steps
  Vector h;
  Vector c;
  std::uint64_t mask_id = 0;
};

// Episodic simulator whose transition function is the learned world model.
// The environment only reads the models it was given; many environments may
// share the same read-only parameters.
class DreamEnv {
 public:
  // `models` holds one model or an ensemble of identically shaped members.
  // `starts` supplies initial latents for LatentInit::kDatasetStarts.
  DreamEnv(std::vector<const WorldModelParams*> models, DreamConfig cfg,
           const std::vector<Vector>* starts = nullptr);

  /// h = c = 0; z drawn per cfg.z_init; per-episode streams derived from rng.
  DreamObservation reset(Rng& rng);
  /// Advances one step; dispatches to the MC-dropout pass when mc_samples > 0.
  /// Throws std::logic_error if the episode is done or reset was never called.
  DreamStep step(VectorCRef action);

  const LstmState& state() const { return state_; }
  const Vector& latent() const { return z_; }
  bool done() const { return done_; }
  std::size_t steps() const { return steps_; }
  std::size_t active_model() const { return active_model_; }
  const MaskSet& active_mask() const { return mask_; }
  // Number of MaskSets drawn since construction (MC passes count individually).
  std::uint64_t masks_sampled() const { return masks_sampled_; }
  const DreamConfig& config() const { return cfg_; }
  const WorldModelParams& model(std::size_t i = 0) const { return *models_.at(i); }

  // One JSON line per step: t, z_hat, action, r_hat, d_hat, mask id.
  void set_trace(std::ostream* out) { trace_ = out; }

 private:
  void draw_mask();
  void draw_model();
  double scale_rate() const;
  DreamStep single_pass(VectorCRef x);
  DreamStep mc_pass(VectorCRef x);

  std::vector<const WorldModelParams*> models_;
  DreamConfig cfg_;
  const std::vector<Vector>* starts_;
  std::vector<std::size_t> action_dims_;
  MaskSet ones_;
  MaskMultipliers ones_mult_;

  LstmState state_;
  Vector z_;
  MaskSet mask_;
  MaskMultipliers mult_;
  std::size_t active_model_ = 0;
  std::size_t steps_ = 0;
  bool done_ = true;
  std::uint64_t masks_sampled_ = 0;
  Rng mask_rng_{0};
  Rng sample_rng_{0};
  Rng noise_rng_{0};
  Rng member_rng_{0};
  std::ostream* trace_ = nullptr;
};

// First latent of every training trajectory.
std::vector<Vector> dataset_starts(const Dataset& ds);

}  // namespace dreamland
