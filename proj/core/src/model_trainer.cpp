#include "dreamland/model_trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace dreamland {
namespace {

enum Stream : std::uint64_t { kInitStream = 1, kShuffleStream = 2, kMaskStream = 3 };

std::vector<Sequence> training_windows(const Dataset& ds, std::size_t length) {
  std::vector<Sequence> out;
  for (std::size_t idx : ds.train) {
    for (Sequence& s : make_training_windows(ds.trajectories.at(idx), length)) {
      out.push_back(std::move(s));
    }
  }
  return out;
}

double mask_free_loss(const WorldModelParams& params, const Dataset& ds,
                      const std::vector<std::size_t>& split, const LossWeights& weights) {
  if (split.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const MaskSet ones =
      MaskSet::all_ones(params.shape.input_size(), params.shape.hidden_size, params.action_dims());
  double total = 0.0;
  std::size_t steps = 0;
  for (std::size_t idx : split) {
    const Sequence seq = make_sequence(ds.trajectories.at(idx));
    total += sequence_loss(params, seq, std::span<const MaskSet>(&ones, 1), 0.0, weights).total;
    steps += seq.size();
  }
  return total / static_cast<double>(steps);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(p_train >= 0.0 && p_train < 1.0)) {
    throw std::invalid_argument("TrainConfig: p_train must lie in [0, 1)");
  }
  if (sequence_length == 0 || batch_size == 0 || epochs == 0 || hidden_size == 0 || mixtures == 0) {
    throw std::invalid_argument("TrainConfig: lengths and sizes must be positive");
  }
  if (!(learning_rate > 0.0) || !(clip_norm > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rate and clip norm must be positive");
  }
  if (weights.alpha_r < 0.0 || weights.alpha_d < 0.0) {
    throw std::invalid_argument("TrainConfig: loss weights must be non-negative");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"p_train", p_train},
          {"alpha_r", weights.alpha_r},
          {"alpha_d", weights.alpha_d},
          {"sequence_length", sequence_length},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"hidden_size", hidden_size},
          {"mixtures", mixtures},
          {"learning_rate", learning_rate},
          {"clip_norm", clip_norm},
          {"seed", seed}};
}

void LossReport::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "epoch,train_loss,test_loss,loss_z,loss_r,loss_d\n";
  for (const EpochLoss& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.test_loss << ',' << e.train_terms.latent << ','
        << e.train_terms.reward << ',' << e.train_terms.done << '\n';
  }
  out.precision(old_precision);
}

AdamOptimizer::AdamOptimizer(std::size_t size, double learning_rate, double beta1, double beta2,
                             double epsilon, double clip_norm)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      clip_(clip_norm),
      m_(Vector::Zero(static_cast<Eigen::Index>(size))),
      v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

double AdamOptimizer::step(Vector& params, Vector grad) {
  require_size(static_cast<std::size_t>(grad.size()), static_cast<std::size_t>(m_.size()),
               "AdamOptimizer gradient");
  const double norm = grad.norm();
  if (norm > clip_) {
    grad *= clip_ / norm;
  }
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + eps_);
  return norm;
}

TrainResult train_dynamics(const Dataset& dataset, const TrainConfig& cfg,
                           const TrainObserver& observer) {
  cfg.validate();
  if (dataset.train.empty()) {
    throw std::invalid_argument("train_dynamics: dataset has no training trajectories");
  }
  const std::vector<Sequence> windows = training_windows(dataset, cfg.sequence_length);
  if (windows.empty()) {
    throw std::invalid_argument("train_dynamics: no training trajectory reaches sequence_length " +
                                std::to_string(cfg.sequence_length));
  }

  const WorldModelShape shape{dataset.state_size, cfg.mixtures, cfg.hidden_size,
                              dataset.action_size};
  Rng init_rng = Rng::derive(cfg.seed, {kInitStream});
  TrainResult result{WorldModelParams::initialized(shape, init_rng), {}};
  WorldModelParams& params = result.params;
  const std::vector<std::size_t> action_dims = params.action_dims();
  const MaskSet ones = MaskSet::all_ones(shape.input_size(), shape.hidden_size, action_dims);

  Vector flat = params.flatten();
  AdamOptimizer adam(static_cast<std::size_t>(flat.size()), cfg.learning_rate, cfg.beta1,
                     cfg.beta2, cfg.adam_epsilon, cfg.clip_norm);
  std::vector<std::size_t> order(windows.size());
  WorldModelParams grad = WorldModelParams::zeros(shape);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = Rng::derive(cfg.seed, {kShuffleStream, epoch});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.index(i)]);
    }

    LossBreakdown epoch_terms;
    std::size_t epoch_steps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      Vector batch_grad = Vector::Zero(flat.size());
      for (std::size_t pos = begin; pos < end; ++pos) {
        const Sequence& seq = windows[order[pos]];
        MaskSet mask = ones;
        if (cfg.dropout_enabled) {
          Rng mask_rng = Rng::derive(cfg.seed, {kMaskStream, epoch, pos});
          mask = sample_mask_set(cfg.p_train, shape.input_size(), shape.hidden_size, action_dims,
                                 mask_rng);
        }
        MaskObserver seq_observer;
        if (observer.on_mask) {
          seq_observer = [&](std::size_t step, std::uint64_t id) {
            observer.on_mask(epoch, pos, step, id);
          };
        }
        const double scale_rate = cfg.dropout_enabled ? cfg.p_train : 0.0;
        const LossBreakdown loss =
            sequence_loss(params, seq, std::span<const MaskSet>(&mask, 1), scale_rate, cfg.weights,
                          &grad, seq_observer);
        epoch_terms += loss;
        epoch_steps += seq.size();
        batch_grad += grad.flatten();
      }
      batch_grad /= static_cast<double>(end - begin);
      if (!batch_grad.allFinite()) {
        throw NumericError("train_dynamics: non-finite gradient in epoch " + std::to_string(epoch));
      }
      adam.step(flat, std::move(batch_grad));
      params.assign(flat);
    }

    EpochLoss row;
    row.epoch = epoch + 1;
    row.train_terms = epoch_terms;
    row.train_terms /= static_cast<double>(epoch_steps);
    row.train_loss = row.train_terms.total;
    row.test_loss = mask_free_loss(params, dataset, dataset.test, cfg.weights);
    if (!std::isfinite(row.train_loss)) {
      throw NumericError("train_dynamics: non-finite training loss in epoch " +
                         std::to_string(row.epoch));
    }
    result.report.epochs.push_back(row);
  }
  return result;
}

LossEstimate evaluate_loss(const WorldModelParams& params, const Dataset& dataset, double p_infer,
                           std::size_t n_mask_samples, std::uint64_t seed,
                           const LossWeights& weights, InferenceScaling scaling, double p_train) {
  if (!(p_infer >= 0.0 && p_infer < 1.0)) {
    throw std::invalid_argument("evaluate_loss: p_infer must lie in [0, 1)");
  }
  if (n_mask_samples == 0) {
    throw std::invalid_argument("evaluate_loss: n_mask_samples must be positive");
  }
  const std::vector<std::size_t>& split = dataset.test.empty() ? dataset.train : dataset.test;
  if (split.empty()) {
    throw std::invalid_argument("evaluate_loss: dataset is empty");
  }
  double scale_rate = 0.0;
  switch (scaling) {
    case InferenceScaling::kActiveRate:
      scale_rate = p_infer;
      break;
    case InferenceScaling::kTrainRate:
      scale_rate = p_train;
      break;
    case InferenceScaling::kNone:
      scale_rate = 0.0;
      break;
  }
  const std::size_t in = params.shape.input_size();
  const std::size_t hid = params.shape.hidden_size;
  const std::vector<std::size_t> action_dims = params.action_dims();

  std::vector<Sequence> sequences;
  sequences.reserve(split.size());
  for (std::size_t idx : split) {
    sequences.push_back(make_sequence(dataset.trajectories.at(idx)));
  }
  std::vector<double> samples;
  samples.reserve(n_mask_samples * sequences.size());
  std::vector<MaskSet> masks;
  for (std::size_t rep = 0; rep < n_mask_samples; ++rep) {
    for (std::size_t s = 0; s < sequences.size(); ++s) {
      const Sequence& seq = sequences[s];
      Rng rng = Rng::derive(seed, {rep, s});
      masks.clear();
      for (std::size_t t = 0; t < seq.size(); ++t) {
        masks.push_back(sample_mask_set(p_infer, in, hid, action_dims, rng));
      }
      const double total = sequence_loss(params, seq, masks, scale_rate, weights).total;
      samples.push_back(total / static_cast<double>(seq.size()));
    }
  }
  LossEstimate est;
  est.samples = samples.size();
  est.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(est.samples);
  if (est.samples > 1) {
    double ss = 0.0;
    for (double v : samples) {
      ss += (v - est.mean) * (v - est.mean);
    }
    est.standard_error =
        std::sqrt(ss / static_cast<double>(est.samples - 1) / static_cast<double>(est.samples));
  }
  return est;
}

}  // namespace dreamland
