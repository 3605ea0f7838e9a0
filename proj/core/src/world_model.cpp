#include "dreamland/world_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dreamland {
namespace {

struct HeadOutput {
  Vector mdn;  // raw 3nk outputs
  double reward = 0.0;
  double done_logit = 0.0;
};

HeadOutput raw_heads(const WorldModelParams& p, VectorCRef h) {
  HeadOutput out;
  out.mdn = p.mdn_weight * h + p.mdn_bias;
  out.reward = p.reward_weight.dot(h) + p.reward_bias[0];
  out.done_logit = p.done_weight.dot(h) + p.done_bias[0];
  return out;
}

// Latent NLL for one step from raw MDN outputs. When `d_out` is non-null the
// gradient w.r.t. the raw outputs is accumulated into it.
double latent_nll(const WorldModelShape& shape, const Vector& raw, VectorCRef z, Vector* d_out) {
  const auto n = static_cast<Eigen::Index>(shape.latent_size);
  const auto k = static_cast<Eigen::Index>(shape.mixtures);
  const Eigen::Index mu_off = n * k;
  const Eigen::Index ls_off = 2 * n * k;
  Vector logits(k);
  Vector joint(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      logits[j] = raw[i * k + j];
    }
    const double log_norm = log_sum_exp(logits);
    for (Eigen::Index j = 0; j < k; ++j) {
      const double log_sigma = raw[ls_off + i * k + j];
      const double u = (z[i] - raw[mu_off + i * k + j]) * std::exp(-log_sigma);
      joint[j] = logits[j] - log_norm - kHalfLog2Pi - log_sigma - 0.5 * u * u;
    }
    const double lse = log_sum_exp(joint);
    total -= lse;
    if (d_out != nullptr) {
      for (Eigen::Index j = 0; j < k; ++j) {
        const double log_sigma = raw[ls_off + i * k + j];
        const double inv_sigma = std::exp(-log_sigma);
        const double diff = z[i] - raw[mu_off + i * k + j];
        const double u = diff * inv_sigma;
        const double resp = std::exp(joint[j] - lse);
        const double pi = std::exp(logits[j] - log_norm);
        (*d_out)[i * k + j] += pi - resp;
        (*d_out)[mu_off + i * k + j] += -resp * diff * inv_sigma * inv_sigma;
        (*d_out)[ls_off + i * k + j] += resp * (1.0 - u * u);
      }
    }
  }
  return total;
}

double clamped_bce(double prob, bool done) {
  const double p = std::clamp(prob, kDoneClamp, 1.0 - kDoneClamp);
  return done ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace

WorldModelParams WorldModelParams::zeros(const WorldModelShape& shape) {
  if (shape.latent_size == 0 || shape.mixtures == 0 || shape.hidden_size == 0) {
    throw std::invalid_argument("WorldModelShape: latent, mixture and hidden sizes must be positive");
  }
  const auto d = static_cast<Eigen::Index>(shape.hidden_size);
  const auto out = static_cast<Eigen::Index>(3 * shape.latent_size * shape.mixtures);
  WorldModelParams p;
  p.shape = shape;
  p.lstm = LstmWeights::zeros(shape.hidden_size, shape.input_size());
  p.mdn_weight = Matrix::Zero(out, d);
  p.mdn_bias = Vector::Zero(out);
  p.reward_weight = Vector::Zero(d);
  p.reward_bias = Vector::Zero(1);
  p.done_weight = Vector::Zero(d);
  p.done_bias = Vector::Zero(1);
  return p;
}

WorldModelParams WorldModelParams::initialized(const WorldModelShape& shape, Rng& rng) {
  WorldModelParams p = zeros(shape);
  p.lstm = LstmWeights::initialized(shape.hidden_size, shape.input_size(), rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(shape.hidden_size));
  for (Eigen::Index i = 0; i < p.mdn_weight.size(); ++i) {
    p.mdn_weight.data()[i] = rng.uniform(-bound, bound);
  }
  for (Eigen::Index i = 0; i < p.mdn_bias.size(); ++i) {
    p.mdn_bias[i] = rng.uniform(-bound, bound);
  }
  for (Eigen::Index i = 0; i < p.reward_weight.size(); ++i) {
    p.reward_weight[i] = rng.uniform(-bound, bound);
    p.done_weight[i] = rng.uniform(-bound, bound);
  }
  return p;
}

std::vector<std::size_t> WorldModelParams::action_dims() const {
  std::vector<std::size_t> dims(shape.action_size);
  for (std::size_t a = 0; a < shape.action_size; ++a) {
    dims[a] = shape.latent_size + a;
  }
  return dims;
}

std::size_t WorldModelParams::parameter_count() const {
  std::size_t count = 0;
  visit(*this, [&](const std::string&, const double*, Eigen::Index rows, Eigen::Index cols) {
    count += static_cast<std::size_t>(rows * cols);
  });
  return count;
}

Vector WorldModelParams::flatten() const {
  Vector flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  visit(*this, [&](const std::string&, const double* data, Eigen::Index rows, Eigen::Index cols) {
    std::copy(data, data + rows * cols, flat.data() + offset);
    offset += rows * cols;
  });
  return flat;
}

void WorldModelParams::assign(const Vector& flat) {
  require_size(static_cast<std::size_t>(flat.size()), parameter_count(), "WorldModelParams::assign");
  Eigen::Index offset = 0;
  visit(*this, [&](const std::string&, double* data, Eigen::Index rows, Eigen::Index cols) {
    std::copy(flat.data() + offset, flat.data() + offset + rows * cols, data);
    offset += rows * cols;
  });
}

void WorldModelParams::validate() const {
  lstm.validate();
  require_size(lstm.hidden_size(), shape.hidden_size, "LSTM hidden size");
  require_size(lstm.input_size(), shape.input_size(), "LSTM input size");
  const std::size_t out = 3 * shape.latent_size * shape.mixtures;
  require_size(static_cast<std::size_t>(mdn_weight.rows()), out, "MDN head rows");
  require_size(static_cast<std::size_t>(mdn_weight.cols()), shape.hidden_size, "MDN head cols");
  require_size(static_cast<std::size_t>(mdn_bias.size()), out, "MDN head bias");
  require_size(static_cast<std::size_t>(reward_weight.size()), shape.hidden_size, "reward head");
  require_size(static_cast<std::size_t>(done_weight.size()), shape.hidden_size, "done head");
  require_size(static_cast<std::size_t>(reward_bias.size()), 1, "reward bias");
  require_size(static_cast<std::size_t>(done_bias.size()), 1, "done bias");
  if (!mdn_weight.allFinite() || !mdn_bias.allFinite() || !reward_weight.allFinite() ||
      !reward_bias.allFinite() || !done_weight.allFinite() || !done_bias.allFinite()) {
    throw NumericError("world model head parameters contain non-finite entries");
  }
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  total += o.total;
  latent += o.latent;
  reward += o.reward;
  done += o.done;
  return *this;
}

LossBreakdown& LossBreakdown::operator/=(double s) {
  total /= s;
  latent /= s;
  reward /= s;
  done /= s;
  return *this;
}

Prediction heads_forward(const WorldModelParams& params, VectorCRef h) {
  require_size(static_cast<std::size_t>(h.size()), params.shape.hidden_size, "heads_forward h");
  const HeadOutput raw = raw_heads(params, h);
  const auto n = static_cast<Eigen::Index>(params.shape.latent_size);
  const auto k = static_cast<Eigen::Index>(params.shape.mixtures);
  Prediction pred;
  pred.mdn.pi.resize(n, k);
  pred.mdn.mu.resize(n, k);
  pred.mdn.sigma.resize(n, k);
  Vector logits(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      logits[j] = raw.mdn[i * k + j];
    }
    const double norm = log_sum_exp(logits);
    for (Eigen::Index j = 0; j < k; ++j) {
      pred.mdn.pi(i, j) = std::exp(logits[j] - norm);
      pred.mdn.mu(i, j) = raw.mdn[n * k + i * k + j];
      pred.mdn.sigma(i, j) = std::exp(raw.mdn[2 * n * k + i * k + j]);
    }
  }
  pred.reward = raw.reward;
  pred.done_prob = sigmoid(raw.done_logit);
  return pred;
}

double mdn_loss(const MdnOutput& out, VectorCRef z) {
  const Eigen::Index n = out.pi.rows();
  const Eigen::Index k = out.pi.cols();
  require_size(static_cast<std::size_t>(z.size()), static_cast<std::size_t>(n), "mdn_loss z");
  if (out.mu.rows() != n || out.mu.cols() != k || out.sigma.rows() != n || out.sigma.cols() != k) {
    throw DimensionError("mdn_loss: pi, mu and sigma shapes differ");
  }
  if ((out.sigma.array() <= 0.0).any()) {
    throw std::invalid_argument("mdn_loss: sigma must be positive");
  }
  Vector terms(k);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      terms[j] = std::log(out.pi(i, j)) + gaussian_logpdf(z[i], out.mu(i, j), out.sigma(i, j));
    }
    loss -= log_sum_exp(terms);
  }
  return loss;
}

LossBreakdown transition_loss(const Prediction& pred, VectorCRef next_latent, double reward,
                              bool done, const LossWeights& weights) {
  LossBreakdown loss;
  if (next_latent.size() > 0) {
    loss.latent = mdn_loss(pred.mdn, next_latent);
  }
  loss.reward = (reward - pred.reward) * (reward - pred.reward);
  loss.done = clamped_bce(pred.done_prob, done);
  loss.total = loss.latent + weights.alpha_r * loss.reward + weights.alpha_d * loss.done;
  return loss;
}

SampledTransition sample_transition(const Prediction& pred, Rng& rng) {
  const Eigen::Index n = pred.mdn.pi.rows();
  const Eigen::Index k = pred.mdn.pi.cols();
  SampledTransition out;
  out.latent.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = rng.uniform();
    double cumulative = 0.0;
    Eigen::Index chosen = -1;
    for (Eigen::Index j = 0; j < k; ++j) {
      cumulative += pred.mdn.pi(i, j);
      if (u < cumulative) {
        chosen = j;
        break;
      }
    }
    if (chosen < 0) {
      // Round-off left u above the cumulative sum; take the last component
      // that carries mass.
      chosen = k - 1;
      while (chosen > 0 && pred.mdn.pi(i, chosen) == 0.0) {
        --chosen;
      }
    }
    out.latent[i] = rng.normal(pred.mdn.mu(i, chosen), pred.mdn.sigma(i, chosen));
  }
  out.reward = pred.reward;
  out.done = rng.bernoulli(pred.done_prob);
  return out;
}

LossBreakdown sequence_loss(const WorldModelParams& params, const Sequence& seq,
                            std::span<const MaskSet> masks, double scale_rate,
                            const LossWeights& weights, WorldModelParams* grad,
                            const MaskObserver& observer) {
  const std::size_t steps = seq.size();
  require_size(seq.next_latent.size(), steps, "sequence targets");
  require_size(seq.rewards.size(), steps, "sequence rewards");
  require_size(seq.dones.size(), steps, "sequence dones");

  const LstmTape tape = lstm_forward(params.lstm, LstmState::zeros(params.shape.hidden_size),
                                     seq.inputs, masks, scale_rate);
  if (observer) {
    for (std::size_t t = 0; t < steps; ++t) {
      observer(t, masks[masks.size() == 1 ? 0 : t].id());
    }
  }

  LossBreakdown total;
  const auto T = static_cast<Eigen::Index>(steps);
  const auto out_size = params.mdn_bias.size();
  Eigen::MatrixXd h_cols;
  Eigen::MatrixXd d_mdn_cols;
  Vector d_reward_cols;
  Vector d_done_cols;
  if (grad != nullptr) {
    h_cols.resize(static_cast<Eigen::Index>(params.shape.hidden_size), T);
    d_mdn_cols = Eigen::MatrixXd::Zero(out_size, T);
    d_reward_cols.resize(T);
    d_done_cols.resize(T);
  }
  Vector d_mdn;
  for (std::size_t t = 0; t < steps; ++t) {
    const Vector& h = tape.hidden[t];
    const HeadOutput raw = raw_heads(params, h);
    LossBreakdown step;
    if (grad != nullptr) {
      d_mdn = Vector::Zero(out_size);
    }
    if (seq.next_latent[t].size() > 0) {
      step.latent = latent_nll(params.shape, raw.mdn, seq.next_latent[t],
                               grad != nullptr ? &d_mdn : nullptr);
    }
    const double reward_err = seq.rewards[t] - raw.reward;
    step.reward = reward_err * reward_err;
    const double done_prob = sigmoid(raw.done_logit);
    const bool done = seq.dones[t] != 0;
    step.done = clamped_bce(done_prob, done);
    step.total = step.latent + weights.alpha_r * step.reward + weights.alpha_d * step.done;
    if (!std::isfinite(step.total)) {
      throw NumericError("sequence_loss: non-finite loss at step " + std::to_string(t));
    }
    total += step;

    if (grad != nullptr) {
      const auto col = static_cast<Eigen::Index>(t);
      h_cols.col(col) = h;
      d_mdn_cols.col(col) = d_mdn;
      d_reward_cols[col] = -2.0 * weights.alpha_r * reward_err;
      // Gradient of the logit-form cross-entropy; identical to the clamped form
      // wherever the clamp is inactive.
      d_done_cols[col] = weights.alpha_d * (done_prob - (done ? 1.0 : 0.0));
    }
  }
  if (grad != nullptr) {
    *grad = WorldModelParams::zeros(params.shape);
    grad->mdn_weight.noalias() = d_mdn_cols * h_cols.transpose();
    grad->mdn_bias = d_mdn_cols.rowwise().sum();
    grad->reward_weight.noalias() = h_cols * d_reward_cols;
    grad->reward_bias[0] = d_reward_cols.sum();
    grad->done_weight.noalias() = h_cols * d_done_cols;
    grad->done_bias[0] = d_done_cols.sum();
    const Eigen::MatrixXd up = params.mdn_weight.transpose() * d_mdn_cols +
                               params.reward_weight * d_reward_cols.transpose() +
                               params.done_weight * d_done_cols.transpose();
    std::vector<Vector> upstream(steps);
    for (std::size_t t = 0; t < steps; ++t) {
      upstream[t] = up.col(static_cast<Eigen::Index>(t));
    }
    grad->lstm = lstm_backward(params.lstm, tape, upstream).weights;
  }
  return total;
}

}  // namespace dreamland
