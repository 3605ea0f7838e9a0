#pragma once

#include <cstddef>
#include <string>

#include <nlohmann/json.hpp>

#include "dreamland/checkpoint.hpp"
#include "dreamland/numerics.hpp"

namespace dreamland {

// Controller input: [z; h] or [z; h; c].
enum class FeatureSpec { kZH, kZHC };

std::string to_string(FeatureSpec f);
FeatureSpec parse_feature_spec(const std::string& s);

struct ControllerParams {
  Matrix weight;  // action_size x feature_size
  Vector bias;    // action_size
  FeatureSpec features = FeatureSpec::kZH;
  std::size_t latent_size = 0;
  std::size_t hidden_size = 0;

  static std::size_t feature_size(std::size_t latent_size, std::size_t hidden_size,
                                  FeatureSpec spec);
  static ControllerParams zeros(std::size_t action_size, std::size_t latent_size,
                                std::size_t hidden_size, FeatureSpec spec);

  std::size_t action_size() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t feature_size() const { return feature_size(latent_size, hidden_size, features); }
  std::size_t parameter_count() const;
  // Row-major weight followed by bias.
  Vector flatten() const;
  void assign(VectorCRef flat);
  // Throws DimensionError on inconsistent shapes, NumericError on NaN/Inf.
  void validate() const;
};

Vector controller_features(FeatureSpec spec, VectorCRef z, VectorCRef h, VectorCRef c);

/// tanh(W * features + b), component-wise. Throws DimensionError on mismatch.
Vector act(const ControllerParams& ctrl, VectorCRef z, VectorCRef h, VectorCRef c);

Checkpoint controller_checkpoint(const ControllerParams& ctrl,
                                 const nlohmann::json& training = nlohmann::json::object());
ControllerParams controller_from_checkpoint(const Checkpoint& ckpt);

}  // namespace dreamland
