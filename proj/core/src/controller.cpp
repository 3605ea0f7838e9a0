#include "dreamland/controller.hpp"

#include <stdexcept>

namespace dreamland {

std::string to_string(FeatureSpec f) { return f == FeatureSpec::kZH ? "zh" : "zhc"; }

FeatureSpec parse_feature_spec(const std::string& s) {
  if (s == "zh") return FeatureSpec::kZH;
  if (s == "zhc") return FeatureSpec::kZHC;
  throw std::invalid_argument("unknown feature spec '" + s + "' (zh|zhc)");
}

std::size_t ControllerParams::feature_size(std::size_t latent_size, std::size_t hidden_size,
                                           FeatureSpec spec) {
  return latent_size + (spec == FeatureSpec::kZHC ? 2 : 1) * hidden_size;
}

ControllerParams ControllerParams::zeros(std::size_t action_size, std::size_t latent_size,
                                         std::size_t hidden_size, FeatureSpec spec) {
  if (action_size == 0 || latent_size == 0) {
    throw DimensionError("ControllerParams: action and latent sizes must be positive");
  }
  ControllerParams p;
  p.features = spec;
  p.latent_size = latent_size;
  p.hidden_size = hidden_size;
  const auto f = static_cast<Eigen::Index>(feature_size(latent_size, hidden_size, spec));
  p.weight = Matrix::Zero(static_cast<Eigen::Index>(action_size), f);
  p.bias = Vector::Zero(static_cast<Eigen::Index>(action_size));
  return p;
}

std::size_t ControllerParams::parameter_count() const {
  return static_cast<std::size_t>(weight.size() + bias.size());
}

Vector ControllerParams::flatten() const {
  Vector out(static_cast<Eigen::Index>(parameter_count()));
  out.head(weight.size()) = Eigen::Map<const Vector>(weight.data(), weight.size());
  out.tail(bias.size()) = bias;
  return out;
}

void ControllerParams::assign(VectorCRef flat) {
  require_size(static_cast<std::size_t>(flat.size()), parameter_count(), "ControllerParams::assign");
  Eigen::Map<Vector>(weight.data(), weight.size()) = flat.head(weight.size());
  bias = flat.tail(bias.size());
}

void ControllerParams::validate() const {
  require_size(static_cast<std::size_t>(weight.cols()), feature_size(), "controller weight columns");
  require_size(static_cast<std::size_t>(bias.size()), action_size(), "controller bias");
  if (action_size() == 0) {
    throw DimensionError("ControllerParams: empty action");
  }
  if (!weight.allFinite() || !bias.allFinite()) {
    throw NumericError("ControllerParams: non-finite entries");
  }
}

Vector controller_features(FeatureSpec spec, VectorCRef z, VectorCRef h, VectorCRef c) {
  Vector f(z.size() + h.size() + (spec == FeatureSpec::kZHC ? c.size() : 0));
  if (spec == FeatureSpec::kZHC) {
    f << z, h, c;
  } else {
    f << z, h;
  }
  return f;
}

Vector act(const ControllerParams& ctrl, VectorCRef z, VectorCRef h, VectorCRef c) {
  require_size(static_cast<std::size_t>(z.size()), ctrl.latent_size, "controller latent input");
  require_size(static_cast<std::size_t>(h.size()), ctrl.hidden_size, "controller hidden input");
  if (ctrl.features == FeatureSpec::kZHC) {
    require_size(static_cast<std::size_t>(c.size()), ctrl.hidden_size, "controller cell input");
  }
  const Vector f = controller_features(ctrl.features, z, h, c);
  require_size(static_cast<std::size_t>(f.size()), static_cast<std::size_t>(ctrl.weight.cols()),
               "controller features");
  return (ctrl.weight * f + ctrl.bias).array().tanh().matrix();
}

Checkpoint controller_checkpoint(const ControllerParams& ctrl, const nlohmann::json& training) {
  ctrl.validate();
  Checkpoint ck;
  ck.kind = "controller";
  ck.metadata = training.is_object() ? training : nlohmann::json::object();
  ck.metadata["features"] = to_string(ctrl.features);
  ck.metadata["n"] = ctrl.latent_size;
  ck.metadata["d"] = ctrl.hidden_size;
  ck.metadata["action_size"] = ctrl.action_size();
  ck.arrays.push_back({"controller.W", static_cast<std::uint64_t>(ctrl.weight.rows()),
                       static_cast<std::uint64_t>(ctrl.weight.cols()),
                       std::vector<double>(ctrl.weight.data(),
                                           ctrl.weight.data() + ctrl.weight.size())});
  ck.arrays.push_back({"controller.b", static_cast<std::uint64_t>(ctrl.bias.size()), 1,
                       std::vector<double>(ctrl.bias.data(), ctrl.bias.data() + ctrl.bias.size())});
  return ck;
}

ControllerParams controller_from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.kind != "controller") {
    throw FormatError("checkpoint kind is '" + ckpt.kind + "', expected 'controller'");
  }
  try {
    ControllerParams p = ControllerParams::zeros(
        ckpt.metadata.at("action_size").get<std::size_t>(), ckpt.metadata.at("n").get<std::size_t>(),
        ckpt.metadata.at("d").get<std::size_t>(),
        parse_feature_spec(ckpt.metadata.at("features").get<std::string>()));
    const NamedArray& w = ckpt.array("controller.W");
    const NamedArray& b = ckpt.array("controller.b");
    if (w.rows != static_cast<std::uint64_t>(p.weight.rows()) ||
        w.cols != static_cast<std::uint64_t>(p.weight.cols()) ||
        b.data.size() != static_cast<std::size_t>(p.bias.size())) {
      throw FormatError("controller checkpoint: array shapes disagree with metadata");
    }
    p.weight = Eigen::Map<const Matrix>(w.data.data(), p.weight.rows(), p.weight.cols());
    p.bias = Eigen::Map<const Vector>(b.data.data(), p.bias.size());
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("controller checkpoint metadata: ") + e.what());
  }
}

}  // namespace dreamland
