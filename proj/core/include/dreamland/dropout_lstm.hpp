#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dreamland/numerics.hpp"
#include "dreamland/rng.hpp"

namespace dreamland {

// Gate order: input (i), forget (f), cell candidate (w), output (o).
inline constexpr std::size_t kGates = 4;
enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kCellGate = 2, kOutputGate = 3 };
inline constexpr std::array<const char*, kGates> kGateNames = {"i", "f", "w", "o"};

// Pre-activations are affine (no nonlinearity); sigma/tanh are applied only
// when forming c_t and h_t.
struct LstmWeights {
  std::array<Matrix, kGates> input;   // W_x*, hidden x input
  std::array<Matrix, kGates> hidden;  // W_h*, hidden x hidden
  std::array<Vector, kGates> bias;    // b_*

  static LstmWeights zeros(std::size_t hidden_size, std::size_t input_size);
  // Uniform in +-1/sqrt(fan_in) with fan_in = input + hidden; forget bias 1.
  static LstmWeights initialized(std::size_t hidden_size, std::size_t input_size, Rng& rng);

  std::size_t hidden_size() const { return static_cast<std::size_t>(bias[0].size()); }
  std::size_t input_size() const { return static_cast<std::size_t>(input[0].cols()); }
  // Throws DimensionError on inconsistent shapes, NumericError on non-finite entries.
  void validate() const;

  // Calls fn(name, data, rows, cols) for every tensor in a fixed order.
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    for (std::size_t g = 0; g < kGates; ++g) {
      fn(std::string("lstm.W_x") + kGateNames[g], self.input[g].data(), self.input[g].rows(),
         self.input[g].cols());
    }
    for (std::size_t g = 0; g < kGates; ++g) {
      fn(std::string("lstm.W_h") + kGateNames[g], self.hidden[g].data(), self.hidden[g].rows(),
         self.hidden[g].cols());
    }
    for (std::size_t g = 0; g < kGates; ++g) {
      fn(std::string("lstm.b_") + kGateNames[g], self.bias[g].data(), self.bias[g].size(),
         Eigen::Index{1});
    }
  }
};

struct LstmState {
  Vector h;
  Vector c;

  static LstmState zeros(std::size_t hidden_size);
};

// The eight Boolean dropout masks, stored as 0/1 entries. Entries listed in
// action_dims are pinned to 1 and are never rescaled.
struct MaskSet {
  std::array<Vector, kGates> input;   // m_x*, length = input size
  std::array<Vector, kGates> hidden;  // m_h*, length = hidden size
  double rate = 0.0;
  std::vector<std::size_t> action_dims;

  static MaskSet all_ones(std::size_t input_size, std::size_t hidden_size,
                          std::span<const std::size_t> action_dims = {});

  std::size_t input_size() const { return static_cast<std::size_t>(input[0].size()); }
  std::size_t hidden_size() const { return static_cast<std::size_t>(hidden[0].size()); }
  // FNV-1a hash over the mask bits; equal masks give equal ids.
  std::uint64_t id() const;
  bool same_bits(const MaskSet& other) const;
};

/// Samples all eight masks independently: every non-action entry is dropped
/// with probability p. Throws std::invalid_argument unless 0 <= p < 1 and
/// every action index is below input_size. p == 0 consumes no randomness.
MaskSet sample_mask_set(double p, std::size_t input_size, std::size_t hidden_size,
                        std::span<const std::size_t> action_dims, Rng& rng);

// Per-gate multipliers applied to x and h_{t-1}: keep / (1 - scale_rate) on
// maskable units, exactly 1 on action units.
struct MaskMultipliers {
  std::array<Vector, kGates> input;
  std::array<Vector, kGates> hidden;
};
MaskMultipliers mask_multipliers(const MaskSet& mask, double scale_rate);

/// One masked LSTM update. `scale_rate` is the rate used for inverted-dropout
/// rescaling of kept units; normally the rate the mask was sampled at.
LstmState lstm_step(const LstmWeights& w, const LstmState& s, VectorCRef x, const MaskSet& mask,
                    double scale_rate);

// Same update with precomputed multipliers; used on hot paths.
LstmState lstm_step(const LstmWeights& w, const LstmState& s, VectorCRef x,
                    const MaskMultipliers& mult);

struct LstmStepCache {
  std::array<Vector, kGates> x_in;  // x ⊙ multiplier per gate
  std::array<Vector, kGates> h_in;  // h_{t-1} ⊙ multiplier per gate
  std::size_t multiplier_index = 0;  // into LstmTape::multipliers
  Vector i, f, g, o;  // activated gates
  Vector c_prev, c, tanh_c;
};

struct LstmTape {
  LstmState initial;
  std::vector<MaskMultipliers> multipliers;
  std::vector<LstmStepCache> steps;
  std::vector<Vector> hidden;  // h_t after each step
  std::vector<Vector> cell;    // c_t after each step
};

struct LstmGradients {
  LstmWeights weights;
  std::vector<Vector> inputs;
  LstmState initial;
};

/// Unrolls the cell over `inputs`. `masks` holds either one MaskSet, held
/// fixed for the whole sequence, or one MaskSet per step.
LstmTape lstm_forward(const LstmWeights& w, const LstmState& initial,
                      std::span<const Vector> inputs, std::span<const MaskSet> masks,
                      double scale_rate);

/// Reverse-mode pass over a recorded tape. `upstream_h[t]` is dLoss/dh_t.
LstmGradients lstm_backward(const LstmWeights& w, const LstmTape& tape,
                            std::span<const Vector> upstream_h);

/// Forward from the zero state followed by lstm_backward.
LstmGradients lstm_bptt(const LstmWeights& w, std::span<const Vector> inputs,
                        std::span<const MaskSet> masks, std::span<const Vector> upstream_h,
                        double scale_rate);

}  // namespace dreamland
