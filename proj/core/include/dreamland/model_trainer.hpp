#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamland/dataset.hpp"
#include "dreamland/world_model.hpp"

namespace dreamland {

struct TrainConfig {
  double p_train = 0.05;
  LossWeights weights;
  std::size_t sequence_length = 20;
  std::size_t batch_size = 4;
  std::size_t epochs = 40;
  std::size_t hidden_size = 32;
  std::size_t mixtures = 3;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
  // When false no masks are sampled at all (reference path for p_train == 0).
  bool dropout_enabled = true;

  void validate() const;
  nlohmann::json to_json() const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per transition, with training masks applied
  double test_loss = 0.0;   // mean per transition, mask-free; NaN without a test split
  LossBreakdown train_terms;
};

struct LossReport {
  std::vector<EpochLoss> epochs;

  // epoch,train_loss,test_loss,loss_z,loss_r,loss_d
  void write_csv(std::ostream& out) const;
};

// Adam with global-norm gradient clipping over a flat parameter vector.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t size, double learning_rate, double beta1, double beta2, double epsilon,
                double clip_norm);
  // Returns the gradient norm before clipping.
  double step(Vector& params, Vector grad);

 private:
  double lr_, beta1_, beta2_, eps_, clip_;
  Vector m_, v_;
  std::size_t t_ = 0;
};

struct TrainObserver {
  // Called for every training step of every sequence with the id of the
  // MaskSet applied at that step.
  std::function<void(std::size_t epoch, std::size_t sequence, std::size_t step,
                     std::uint64_t mask_id)>
      on_mask;
};

struct TrainResult {
  WorldModelParams params;
  LossReport report;
};

/// Mini-batch training with one MaskSet per sequence, sampled at p_train and
/// held fixed across the sequence. Per-sequence losses are summed over time
/// and averaged across the mini-batch. Throws std::invalid_argument on an
/// empty train split (or no trajectory at least sequence_length long) and
/// NumericError on a non-finite loss.
TrainResult train_dynamics(const Dataset& dataset, const TrainConfig& cfg,
                           const TrainObserver& observer = {});

// Scaling used for dropout at inference time.
enum class InferenceScaling { kActiveRate, kTrainRate, kNone };

struct LossEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t samples = 0;
};

/// Mean per-transition loss over the test split (or the train split if there
/// is no test split), drawing a fresh MaskSet at p_infer for every step and
/// repeating n_mask_samples times. Kept units are rescaled per `scaling`.
LossEstimate evaluate_loss(const WorldModelParams& params, const Dataset& dataset, double p_infer,
                           std::size_t n_mask_samples, std::uint64_t seed,
                           const LossWeights& weights,
                           InferenceScaling scaling = InferenceScaling::kActiveRate,
                           double p_train = 0.0);

}  // namespace dreamland
