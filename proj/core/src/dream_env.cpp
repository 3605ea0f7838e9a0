#include "dreamland/dream_env.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dreamland {
namespace {

enum Stream : std::uint64_t { kMaskStream = 1, kSampleStream = 2, kNoiseStream = 3, kMemberStream = 4 };

std::vector<double> to_std(VectorCRef v) { return {v.data(), v.data() + v.size()}; }

void accumulate(Matrix& mean, const Matrix& x, double k) {
  if (k == 1.0) {
    mean = x;
  } else {
    mean += (x - mean) / k;
  }
}

void accumulate(Vector& mean, const Vector& x, double k) {
  if (k == 1.0) {
    mean = x;
  } else {
    mean += (x - mean) / k;
  }
}

void accumulate(double& mean, double x, double k) {
  if (k == 1.0) {
    mean = x;
  } else {
    mean += (x - mean) / k;
  }
}

}  // namespace

std::string to_string(RandomizationPolicy p) {
  switch (p) {
    case RandomizationPolicy::kOff:
      return "off";
    case RandomizationPolicy::kEpisode:
      return "episode";
    case RandomizationPolicy::kStep:
      return "step";
  }
  return "unknown";
}

RandomizationPolicy parse_policy(const std::string& s) {
  if (s == "off") return RandomizationPolicy::kOff;
  if (s == "episode") return RandomizationPolicy::kEpisode;
  if (s == "step") return RandomizationPolicy::kStep;
  throw std::invalid_argument("unknown randomization policy '" + s + "' (off|episode|step)");
}

std::string to_string(LatentInit z) {
  return z == LatentInit::kStandardNormal ? "standard_normal" : "dataset_starts";
}

LatentInit parse_latent_init(const std::string& s) {
  if (s == "standard_normal") return LatentInit::kStandardNormal;
  if (s == "dataset_starts") return LatentInit::kDatasetStarts;
  throw std::invalid_argument("unknown z_init '" + s + "' (standard_normal|dataset_starts)");
}

std::string to_string(InferenceScaling s) {
  switch (s) {
    case InferenceScaling::kActiveRate:
      return "active_rate";
    case InferenceScaling::kTrainRate:
      return "train_rate";
    case InferenceScaling::kNone:
      return "none";
  }
  return "unknown";
}

InferenceScaling parse_scaling(const std::string& s) {
  if (s == "active_rate") return InferenceScaling::kActiveRate;
  if (s == "train_rate") return InferenceScaling::kTrainRate;
  if (s == "none") return InferenceScaling::kNone;
  throw std::invalid_argument("unknown inference scaling '" + s + "' (active_rate|train_rate|none)");
}

void DreamConfig::validate(std::size_t ensemble_size) const {
  if (!(p_infer >= 0.0 && p_infer < 1.0)) {
    throw std::invalid_argument("DreamConfig: p_infer must lie in [0, 1)");
  }
  if (!(p_train >= 0.0 && p_train < 1.0)) {
    throw std::invalid_argument("DreamConfig: p_train must lie in [0, 1)");
  }
  if (max_episode_steps == 0) {
    throw std::invalid_argument("DreamConfig: max_episode_steps must be positive");
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("DreamConfig: noise_sigma must be non-negative");
  }
  if (ensemble_size == 0) {
    throw std::invalid_argument("DreamConfig: at least one world model is required");
  }
  const int variants = (mc_samples > 0) + (noise_sigma > 0.0) + (ensemble_size > 1);
  if (variants > 1) {
    throw std::invalid_argument(
        "DreamConfig: MC-dropout, additive noise and ensembles are mutually exclusive");
  }
}

DreamEnv::DreamEnv(std::vector<const WorldModelParams*> models, DreamConfig cfg,
                   const std::vector<Vector>* starts)
    : models_(std::move(models)), cfg_(cfg), starts_(starts) {
  cfg_.validate(models_.size());
  for (const WorldModelParams* m : models_) {
    if (m == nullptr) {
      throw std::invalid_argument("DreamEnv: null world model");
    }
    const WorldModelShape& a = m->shape;
    const WorldModelShape& b = models_.front()->shape;
    if (a.latent_size != b.latent_size || a.mixtures != b.mixtures ||
        a.hidden_size != b.hidden_size || a.action_size != b.action_size) {
      throw DimensionError("DreamEnv: ensemble members differ in shape");
    }
  }
  if (cfg_.z_init == LatentInit::kDatasetStarts) {
    if (starts_ == nullptr || starts_->empty()) {
      throw std::invalid_argument("DreamEnv: dataset_starts requires a non-empty start pool");
    }
    for (const Vector& z : *starts_) {
      require_size(static_cast<std::size_t>(z.size()), models_.front()->shape.latent_size,
                   "DreamEnv start latent");
    }
  }
  const WorldModelShape& shape = models_.front()->shape;
  action_dims_ = models_.front()->action_dims();
  ones_ = MaskSet::all_ones(shape.input_size(), shape.hidden_size, action_dims_);
  ones_mult_ = mask_multipliers(ones_, 0.0);
  mask_ = ones_;
  mult_ = ones_mult_;
  state_ = LstmState::zeros(shape.hidden_size);
  z_ = Vector::Zero(static_cast<Eigen::Index>(shape.latent_size));
}

double DreamEnv::scale_rate() const {
  switch (cfg_.scaling) {
    case InferenceScaling::kActiveRate:
      return cfg_.p_infer;
    case InferenceScaling::kTrainRate:
      return cfg_.p_train;
    case InferenceScaling::kNone:
      return 0.0;
  }
  return 0.0;
}

void DreamEnv::draw_mask() {
  const WorldModelShape& shape = models_.front()->shape;
  mask_ = sample_mask_set(cfg_.p_infer, shape.input_size(), shape.hidden_size, action_dims_,
                          mask_rng_);
  mult_ = mask_multipliers(mask_, scale_rate());
  ++masks_sampled_;
}

void DreamEnv::draw_model() {
  if (models_.size() > 1) {
    active_model_ = static_cast<std::size_t>(member_rng_.index(models_.size()));
  }
}

DreamObservation DreamEnv::reset(Rng& rng) {
  const std::uint64_t episode_seed = rng.next_u64();
  mask_rng_ = Rng::derive(episode_seed, {kMaskStream});
  sample_rng_ = Rng::derive(episode_seed, {kSampleStream});
  noise_rng_ = Rng::derive(episode_seed, {kNoiseStream});
  member_rng_ = Rng::derive(episode_seed, {kMemberStream});

  const WorldModelShape& shape = models_.front()->shape;
  state_ = LstmState::zeros(shape.hidden_size);
  if (cfg_.z_init == LatentInit::kDatasetStarts) {
    z_ = (*starts_)[static_cast<std::size_t>(rng.index(starts_->size()))];
  } else {
    z_.resize(static_cast<Eigen::Index>(shape.latent_size));
    for (Eigen::Index i = 0; i < z_.size(); ++i) {
      z_[i] = rng.normal();
    }
  }
  steps_ = 0;
  done_ = false;
  active_model_ = 0;
  mask_ = ones_;
  mult_ = ones_mult_;
  if (cfg_.policy == RandomizationPolicy::kEpisode) {
    draw_model();
    if (cfg_.mc_samples == 0 && cfg_.noise_sigma == 0.0) {
      draw_mask();
    }
  }
  return {z_, state_.h, state_.c};
}

DreamStep DreamEnv::single_pass(VectorCRef x) {
  if (cfg_.policy == RandomizationPolicy::kStep) {
    draw_model();
    if (cfg_.noise_sigma == 0.0) {
      draw_mask();
    }
  }
  const WorldModelParams& model = *models_[active_model_];
  state_ = lstm_step(model.lstm, state_, x, mult_);
  const Prediction pred = heads_forward(model, state_.h);
  SampledTransition tr = sample_transition(pred, sample_rng_);
  if (cfg_.noise_sigma > 0.0) {
    for (Eigen::Index i = 0; i < tr.latent.size(); ++i) {
      tr.latent[i] += cfg_.noise_sigma * noise_rng_.normal();
    }
  }
  DreamStep out;
  out.z = std::move(tr.latent);
  out.reward = tr.reward;
  out.done_prob = pred.done_prob;
  out.done = tr.done;
  out.mask_id = mask_.id();
  return out;
}

DreamStep DreamEnv::mc_pass(VectorCRef x) {
  const WorldModelParams& model = *models_.front();
  const WorldModelShape& shape = model.shape;
  Prediction mean;
  Vector h_mean;
  Vector c_mean;
  for (std::size_t k = 1; k <= cfg_.mc_samples; ++k) {
    draw_mask();
    const LstmState s = lstm_step(model.lstm, state_, x, mult_);
    const Prediction p = heads_forward(model, s.h);
    const double w = static_cast<double>(k);
    accumulate(mean.mdn.pi, p.mdn.pi, w);
    accumulate(mean.mdn.mu, p.mdn.mu, w);
    accumulate(mean.mdn.sigma, p.mdn.sigma, w);
    accumulate(mean.reward, p.reward, w);
    accumulate(mean.done_prob, p.done_prob, w);
    accumulate(h_mean, s.h, w);
    accumulate(c_mean, s.c, w);
  }
  require_size(static_cast<std::size_t>(h_mean.size()), shape.hidden_size, "MC hidden state");
  state_.h = std::move(h_mean);
  state_.c = std::move(c_mean);
  SampledTransition tr = sample_transition(mean, sample_rng_);
  DreamStep out;
  out.z = std::move(tr.latent);
  out.reward = tr.reward;
  out.done_prob = mean.done_prob;
  out.done = tr.done;
  out.mask_id = mask_.id();
  return out;
}

DreamStep DreamEnv::step(VectorCRef action) {
  if (done_) {
    throw std::logic_error("DreamEnv::step called on a finished episode; call reset first");
  }
  const WorldModelShape& shape = models_.front()->shape;
  require_size(static_cast<std::size_t>(action.size()), shape.action_size, "DreamEnv action");
  if (!action.allFinite()) {
    throw NumericError("DreamEnv::step: non-finite action");
  }
  Vector x(static_cast<Eigen::Index>(shape.input_size()));
  x << z_, action;

  DreamStep out = cfg_.mc_samples > 0 ? mc_pass(x) : single_pass(x);
  ++steps_;
  if (!out.done && steps_ >= cfg_.max_episode_steps) {
    out.done = true;
    out.truncated = true;
  }
  done_ = out.done;
  z_ = out.z;
  out.h = state_.h;
  out.c = state_.c;

  if (trace_ != nullptr) {
    nlohmann::json line = {{"t", steps_ - 1},
                           {"z_hat", to_std(out.z)},
                           {"action", to_std(action)},
                           {"r_hat", out.reward},
                           {"d_hat", out.done_prob},
                           {"mask_id", out.mask_id},
                           {"model", active_model_},
                           {"done", out.done},
                           {"truncated", out.truncated}};
    *trace_ << line.dump() << '\n';
  }
  return out;
}

std::vector<Vector> dataset_starts(const Dataset& ds) {
  std::vector<Vector> out;
  out.reserve(ds.train.size());
  for (std::size_t idx : ds.train) {
    const Trajectory& t = ds.trajectories.at(idx);
    if (t.size() > 0) {
      out.emplace_back(t.states.row(0).transpose());
    }
  }
  return out;
}

}  // namespace dreamland
