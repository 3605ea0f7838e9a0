#include "dreamland/dropout_lstm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dreamland {
namespace {

Vector sigmoid_of(const Vector& v) { return v.unaryExpr([](double x) { return sigmoid(x); }); }

Vector tanh_of(const Vector& v) { return v.array().tanh().matrix(); }

void fill_mask(Vector& mask, double p, Rng& rng) {
  for (Eigen::Index j = 0; j < mask.size(); ++j) {
    mask[j] = rng.uniform() < p ? 0.0 : 1.0;
  }
}

std::uint64_t fnv_bits(std::uint64_t h, const Vector& v) {
  constexpr std::uint64_t kPrime = 0x100000001b3ULL;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    h ^= v[j] != 0.0 ? 0x31u : 0x30u;
    h *= kPrime;
  }
  h ^= 0x7cu;  // separator so (a|bc) != (ab|c)
  h *= kPrime;
  return h;
}

void check_masks_match(const LstmWeights& w, const MaskSet& m) {
  require_size(m.input_size(), w.input_size(), "mask input size");
  require_size(m.hidden_size(), w.hidden_size(), "mask hidden size");
}

}  // namespace

LstmWeights LstmWeights::zeros(std::size_t hidden_size, std::size_t input_size) {
  const auto d = static_cast<Eigen::Index>(hidden_size);
  const auto r = static_cast<Eigen::Index>(input_size);
  LstmWeights w;
  for (std::size_t g = 0; g < kGates; ++g) {
    w.input[g] = Matrix::Zero(d, r);
    w.hidden[g] = Matrix::Zero(d, d);
    w.bias[g] = Vector::Zero(d);
  }
  return w;
}

LstmWeights LstmWeights::initialized(std::size_t hidden_size, std::size_t input_size, Rng& rng) {
  LstmWeights w = zeros(hidden_size, input_size);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size + input_size));
  visit(w, [&](const std::string&, double* data, Eigen::Index rows, Eigen::Index cols) {
    for (Eigen::Index k = 0; k < rows * cols; ++k) {
      data[k] = rng.uniform(-bound, bound);
    }
  });
  w.bias[kForgetGate].setConstant(1.0);
  return w;
}

void LstmWeights::validate() const {
  const std::size_t d = hidden_size();
  const std::size_t r = input_size();
  for (std::size_t g = 0; g < kGates; ++g) {
    require_size(static_cast<std::size_t>(input[g].rows()), d, "W_x rows");
    require_size(static_cast<std::size_t>(input[g].cols()), r, "W_x cols");
    require_size(static_cast<std::size_t>(hidden[g].rows()), d, "W_h rows");
    require_size(static_cast<std::size_t>(hidden[g].cols()), d, "W_h cols");
    require_size(static_cast<std::size_t>(bias[g].size()), d, "bias size");
    if (!input[g].allFinite() || !hidden[g].allFinite() || !bias[g].allFinite()) {
      throw NumericError("LSTM weights contain non-finite entries");
    }
  }
}

LstmState LstmState::zeros(std::size_t hidden_size) {
  const auto d = static_cast<Eigen::Index>(hidden_size);
  return {Vector::Zero(d), Vector::Zero(d)};
}

MaskSet MaskSet::all_ones(std::size_t input_size, std::size_t hidden_size,
                          std::span<const std::size_t> action_dims) {
  MaskSet m;
  for (std::size_t g = 0; g < kGates; ++g) {
    m.input[g] = Vector::Ones(static_cast<Eigen::Index>(input_size));
    m.hidden[g] = Vector::Ones(static_cast<Eigen::Index>(hidden_size));
  }
  m.action_dims.assign(action_dims.begin(), action_dims.end());
  return m;
}

std::uint64_t MaskSet::id() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t g = 0; g < kGates; ++g) {
    h = fnv_bits(h, input[g]);
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    h = fnv_bits(h, hidden[g]);
  }
  return h;
}

bool MaskSet::same_bits(const MaskSet& other) const {
  for (std::size_t g = 0; g < kGates; ++g) {
    if (input[g] != other.input[g] || hidden[g] != other.hidden[g]) {
      return false;
    }
  }
  return true;
}

MaskSet sample_mask_set(double p, std::size_t input_size, std::size_t hidden_size,
                        std::span<const std::size_t> action_dims, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("sample_mask_set: rate must lie in [0, 1)");
  }
  for (std::size_t a : action_dims) {
    if (a >= input_size) {
      throw std::invalid_argument("sample_mask_set: action index out of range");
    }
  }
  MaskSet m = MaskSet::all_ones(input_size, hidden_size, action_dims);
  m.rate = p;
  if (p == 0.0) {
    return m;
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    fill_mask(m.input[g], p, rng);
    for (std::size_t a : action_dims) {
      m.input[g][static_cast<Eigen::Index>(a)] = 1.0;
    }
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    fill_mask(m.hidden[g], p, rng);
  }
  return m;
}

MaskMultipliers mask_multipliers(const MaskSet& mask, double scale_rate) {
  if (!(scale_rate >= 0.0 && scale_rate < 1.0)) {
    throw std::invalid_argument("mask_multipliers: rate must lie in [0, 1)");
  }
  const double keep_scale = 1.0 / (1.0 - scale_rate);
  MaskMultipliers mult;
  for (std::size_t g = 0; g < kGates; ++g) {
    mult.input[g] = mask.input[g] * keep_scale;
    for (std::size_t a : mask.action_dims) {
      mult.input[g][static_cast<Eigen::Index>(a)] = 1.0;
    }
    mult.hidden[g] = mask.hidden[g] * keep_scale;
  }
  return mult;
}

LstmState lstm_step(const LstmWeights& w, const LstmState& s, VectorCRef x, const MaskSet& mask,
                    double scale_rate) {
  check_masks_match(w, mask);
  return lstm_step(w, s, x, mask_multipliers(mask, scale_rate));
}

LstmState lstm_step(const LstmWeights& w, const LstmState& s, VectorCRef x,
                    const MaskMultipliers& mult) {
  require_size(static_cast<std::size_t>(x.size()), w.input_size(), "lstm_step input");
  require_size(static_cast<std::size_t>(s.h.size()), w.hidden_size(), "lstm_step hidden state");
  require_size(static_cast<std::size_t>(s.c.size()), w.hidden_size(), "lstm_step cell state");
  require_size(static_cast<std::size_t>(mult.input[0].size()), w.input_size(), "mask input size");
  require_size(static_cast<std::size_t>(mult.hidden[0].size()), w.hidden_size(),
               "mask hidden size");

  std::array<Vector, kGates> pre;
  for (std::size_t g = 0; g < kGates; ++g) {
    pre[g] = w.input[g] * x.cwiseProduct(mult.input[g]) +
             w.hidden[g] * s.h.cwiseProduct(mult.hidden[g]) + w.bias[g];
  }
  LstmState next;
  next.c = sigmoid_of(pre[kInputGate]).cwiseProduct(tanh_of(pre[kCellGate])) +
           sigmoid_of(pre[kForgetGate]).cwiseProduct(s.c);
  next.h = sigmoid_of(pre[kOutputGate]).cwiseProduct(tanh_of(next.c));
  return next;
}

LstmTape lstm_forward(const LstmWeights& w, const LstmState& initial,
                      std::span<const Vector> inputs, std::span<const MaskSet> masks,
                      double scale_rate) {
  if (masks.empty() || (masks.size() != 1 && masks.size() != inputs.size())) {
    throw DimensionError("lstm_forward: need one mask per sequence or one per step");
  }
  for (const MaskSet& m : masks) {
    check_masks_match(w, m);
  }
  require_size(static_cast<std::size_t>(initial.h.size()), w.hidden_size(), "initial h");
  require_size(static_cast<std::size_t>(initial.c.size()), w.hidden_size(), "initial c");

  LstmTape tape;
  tape.initial = initial;
  tape.multipliers.reserve(masks.size());
  for (const MaskSet& m : masks) {
    tape.multipliers.push_back(mask_multipliers(m, scale_rate));
  }
  tape.steps.resize(inputs.size());
  tape.hidden.reserve(inputs.size());
  tape.cell.reserve(inputs.size());

  const Vector* h_prev = &initial.h;
  const Vector* c_prev = &initial.c;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    require_size(static_cast<std::size_t>(inputs[t].size()), w.input_size(), "lstm_forward input");
    LstmStepCache& step = tape.steps[t];
    step.multiplier_index = masks.size() == 1 ? 0 : t;
    const MaskMultipliers& mult = tape.multipliers[step.multiplier_index];
    std::array<Vector, kGates> pre;
    for (std::size_t g = 0; g < kGates; ++g) {
      step.x_in[g] = inputs[t].cwiseProduct(mult.input[g]);
      step.h_in[g] = h_prev->cwiseProduct(mult.hidden[g]);
      pre[g] = w.input[g] * step.x_in[g] + w.hidden[g] * step.h_in[g] + w.bias[g];
    }
    step.i = sigmoid_of(pre[kInputGate]);
    step.f = sigmoid_of(pre[kForgetGate]);
    step.g = tanh_of(pre[kCellGate]);
    step.o = sigmoid_of(pre[kOutputGate]);
    step.c_prev = *c_prev;
    step.c = step.i.cwiseProduct(step.g) + step.f.cwiseProduct(step.c_prev);
    step.tanh_c = tanh_of(step.c);
    tape.cell.push_back(step.c);
    tape.hidden.push_back(step.o.cwiseProduct(step.tanh_c));
    h_prev = &tape.hidden.back();
    c_prev = &tape.cell.back();
  }
  return tape;
}

LstmGradients lstm_backward(const LstmWeights& w, const LstmTape& tape,
                            std::span<const Vector> upstream_h) {
  const std::size_t steps = tape.steps.size();
  require_size(upstream_h.size(), steps, "lstm_backward upstream length");
  const std::size_t d = w.hidden_size();

  LstmGradients grads;
  grads.weights = LstmWeights::zeros(d, w.input_size());
  grads.inputs.assign(steps, Vector::Zero(static_cast<Eigen::Index>(w.input_size())));

  const auto T = static_cast<Eigen::Index>(steps);
  const auto di = static_cast<Eigen::Index>(d);
  const auto ri = static_cast<Eigen::Index>(w.input_size());
  // Per-gate pre-activation gradients, one column per step; the weight
  // gradients are then accumulated with one product per gate.
  std::array<Matrix, kGates> dpre_cols;
  for (Matrix& m : dpre_cols) {
    m.resize(di, T);
  }
  Vector dh_next = Vector::Zero(di);
  Vector dc_next = Vector::Zero(di);
  std::array<Vector, kGates> dpre;
  for (std::size_t t = steps; t-- > 0;) {
    const LstmStepCache& s = tape.steps[t];
    const MaskMultipliers& mult = tape.multipliers[s.multiplier_index];
    require_size(static_cast<std::size_t>(upstream_h[t].size()), d, "lstm_backward upstream");

    const Vector dh = upstream_h[t] + dh_next;
    const Vector dc = dc_next + dh.cwiseProduct(s.o).cwiseProduct(
                                    (1.0 - s.tanh_c.array().square()).matrix());
    dpre[kOutputGate] =
        dh.cwiseProduct(s.tanh_c).cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
    dpre[kInputGate] =
        dc.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
    dpre[kCellGate] = dc.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());
    dpre[kForgetGate] =
        dc.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));

    dc_next = dc.cwiseProduct(s.f);
    dh_next.setZero();
    const auto col = static_cast<Eigen::Index>(t);
    for (std::size_t g = 0; g < kGates; ++g) {
      dpre_cols[g].col(col) = dpre[g];
      dh_next += (w.hidden[g].transpose() * dpre[g]).cwiseProduct(mult.hidden[g]);
    }
  }

  Eigen::MatrixXd x_cols(ri, T);
  Eigen::MatrixXd h_cols(di, T);
  Eigen::MatrixXd dx_cols = Eigen::MatrixXd::Zero(ri, T);
  for (std::size_t g = 0; g < kGates; ++g) {
    for (std::size_t t = 0; t < steps; ++t) {
      const auto col = static_cast<Eigen::Index>(t);
      x_cols.col(col) = tape.steps[t].x_in[g];
      h_cols.col(col) = tape.steps[t].h_in[g];
    }
    grads.weights.input[g].noalias() = dpre_cols[g] * x_cols.transpose();
    grads.weights.hidden[g].noalias() = dpre_cols[g] * h_cols.transpose();
    grads.weights.bias[g] = dpre_cols[g].rowwise().sum();
    Eigen::MatrixXd dx = w.input[g].transpose() * dpre_cols[g];
    for (std::size_t t = 0; t < steps; ++t) {
      const auto col = static_cast<Eigen::Index>(t);
      const MaskMultipliers& mult = tape.multipliers[tape.steps[t].multiplier_index];
      dx_cols.col(col) += dx.col(col).cwiseProduct(mult.input[g]);
    }
  }
  for (std::size_t t = 0; t < steps; ++t) {
    grads.inputs[t] = dx_cols.col(static_cast<Eigen::Index>(t));
  }
  grads.initial.h = dh_next;
  grads.initial.c = dc_next;
  return grads;
}

LstmGradients lstm_bptt(const LstmWeights& w, std::span<const Vector> inputs,
                        std::span<const MaskSet> masks, std::span<const Vector> upstream_h,
                        double scale_rate) {
  require_size(upstream_h.size(), inputs.size(), "lstm_bptt upstream length");
  const LstmTape tape =
      lstm_forward(w, LstmState::zeros(w.hidden_size()), inputs, masks, scale_rate);
  return lstm_backward(w, tape, upstream_h);
}

}  // namespace dreamland
