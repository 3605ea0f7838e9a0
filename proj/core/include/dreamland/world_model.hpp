#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dreamland/dropout_lstm.hpp"
#include "dreamland/numerics.hpp"
#include "dreamland/rng.hpp"

namespace dreamland {

struct WorldModelShape {
  std::size_t latent_size = 0;  // n
  std::size_t mixtures = 0;     // k
  std::size_t hidden_size = 0;  // d
  std::size_t action_size = 0;

  std::size_t input_size() const { return latent_size + action_size; }
  bool operator==(const WorldModelShape&) const = default;
};

// Dynamics model M: a dropout LSTM over x = [z; a] followed by three linear
// heads. The MDN head emits, per latent feature i and component j, a logit at
// i*k + j, a mean at n*k + i*k + j and a log-sigma at 2*n*k + i*k + j.
struct WorldModelParams {
  WorldModelShape shape;
  LstmWeights lstm;
  Matrix mdn_weight;  // 3nk x d
  Vector mdn_bias;    // 3nk
  Vector reward_weight;
  Vector reward_bias;  // length 1
  Vector done_weight;
  Vector done_bias;  // length 1

  static WorldModelParams zeros(const WorldModelShape& shape);
  static WorldModelParams initialized(const WorldModelShape& shape, Rng& rng);

  // Input indices of the action inside x = [z; a]; these are never masked.
  std::vector<std::size_t> action_dims() const;
  std::size_t parameter_count() const;
  Vector flatten() const;
  void assign(const Vector& flat);
  void validate() const;

  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    LstmWeights::visit(self.lstm, fn);
    fn(std::string("mdn.W"), self.mdn_weight.data(), self.mdn_weight.rows(), self.mdn_weight.cols());
    fn(std::string("mdn.b"), self.mdn_bias.data(), self.mdn_bias.size(), Eigen::Index{1});
    fn(std::string("reward.w"), self.reward_weight.data(), self.reward_weight.size(),
       Eigen::Index{1});
    fn(std::string("reward.b"), self.reward_bias.data(), Eigen::Index{1}, Eigen::Index{1});
    fn(std::string("done.w"), self.done_weight.data(), self.done_weight.size(), Eigen::Index{1});
    fn(std::string("done.b"), self.done_bias.data(), Eigen::Index{1}, Eigen::Index{1});
  }
};

// n x k mixture parameters.
struct MdnOutput {
  Matrix pi;
  Matrix mu;
  Matrix sigma;
};

struct Prediction {
  MdnOutput mdn;
  double reward = 0.0;     // r-hat
  double done_prob = 0.5;  // d-hat
};

/// pi by per-feature softmax, sigma = exp(log-sigma), d-hat = logistic(logit).
Prediction heads_forward(const WorldModelParams& params, VectorCRef h);

/// L^z = -sum_i log sum_j pi_ij N(z_i | mu_ij, sigma_ij^2), evaluated with
/// log_sum_exp. Throws std::invalid_argument if any sigma <= 0.
double mdn_loss(const MdnOutput& out, VectorCRef z);

struct LossWeights {
  double alpha_r = 1.0;
  double alpha_d = 1.0;
};

struct LossBreakdown {
  double total = 0.0;
  double latent = 0.0;  // L^z
  double reward = 0.0;  // L^r, unweighted
  double done = 0.0;    // L^d, unweighted

  LossBreakdown& operator+=(const LossBreakdown& o);
  LossBreakdown& operator/=(double s);
};

inline constexpr double kDoneClamp = 1e-7;

/// Single-transition loss L^M = L^z + alpha_r L^r + alpha_d L^d. `next_latent`
/// may be empty, in which case the latent term is skipped (terminal step).
LossBreakdown transition_loss(const Prediction& pred, VectorCRef next_latent, double reward,
                              bool done, const LossWeights& weights);

struct SampledTransition {
  Vector latent;
  double reward = 0.0;
  bool done = false;
};

/// Per feature: component ~ Multinomial(pi_i), z_i ~ N(mu, sigma^2);
/// reward = r-hat; done ~ Bernoulli(d-hat).
SampledTransition sample_transition(const Prediction& pred, Rng& rng);

// One training sequence: inputs x_t = [z_t; a_t] with targets z_{t+1}, r_t,
// d_t. An empty next_latent entry marks a step without a latent target.
struct Sequence {
  std::vector<Vector> inputs;
  std::vector<Vector> next_latent;
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;

  std::size_t size() const { return inputs.size(); }
};

using MaskObserver = std::function<void(std::size_t step, std::uint64_t mask_id)>;

/// Summed loss over the sequence from a zero initial state. When `grad` is
/// non-null it is overwritten with the exact gradient of `total` w.r.t. every
/// parameter. `masks` holds one MaskSet for the whole sequence or one per step.
LossBreakdown sequence_loss(const WorldModelParams& params, const Sequence& seq,
                            std::span<const MaskSet> masks, double scale_rate,
                            const LossWeights& weights, WorldModelParams* grad = nullptr,
                            const MaskObserver& observer = {});

}  // namespace dreamland
