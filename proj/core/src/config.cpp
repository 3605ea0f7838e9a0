#include "dreamland/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dreamland/checkpoint.hpp"

namespace dreamland {
namespace {

const char* const kEnvParamsPrefix = "env.params.";

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt_size(std::uint64_t v) { return std::to_string(v); }

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text +
                      "'");
  }
  return v;
}

bool is_env_param(const std::string& key) { return key.rfind(kEnvParamsPrefix, 0) == 0; }

// Numbers stay numbers; everything else is a string.
nlohmann::json env_param_value(const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec == std::errc() && res.ptr == text.data() + text.size()) {
    std::uint64_t u = 0;
    const auto ures = std::from_chars(text.data(), text.data() + text.size(), u);
    if (ures.ec == std::errc() && ures.ptr == text.data() + text.size()) {
      return u;
    }
    return v;
  }
  return text;
}

std::string env_param_text(const nlohmann::json& v) {
  if (v.is_string()) {
    return v.get<std::string>();
  }
  if (v.is_number_float()) {
    return fmt_double(v.get<double>());
  }
  return v.dump();
}

void flatten_yaml(const YAML::Node& node, const std::string& prefix,
                  std::map<std::string, std::string>& out) {
  if (node.IsMap()) {
    for (const auto& kv : node) {
      const std::string key = kv.first.as<std::string>();
      flatten_yaml(kv.second, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.IsScalar()) {
    out[prefix] = node.Scalar();
  } else if (node.IsNull()) {
    if (prefix != "env.params") {
      throw ConfigError("config key '" + prefix + "' has no value");
    }
  } else {
    throw ConfigError("config key '" + prefix + "': sequences are not supported");
  }
}

struct KeyTree {
  std::map<std::string, KeyTree> children;
  std::string value;
  bool leaf = false;
};

KeyTree build_tree(const std::map<std::string, std::string>& flat) {
  KeyTree root;
  for (const auto& [key, value] : flat) {
    KeyTree* node = &root;
    std::size_t start = 0;
    while (true) {
      const std::size_t dot = key.find('.', start);
      node = &node->children[key.substr(start, dot - start)];
      if (dot == std::string::npos) {
        break;
      }
      start = dot + 1;
    }
    node->leaf = true;
    node->value = value;
  }
  root.children["env"].children.try_emplace("params");
  return root;
}

void emit_tree(YAML::Emitter& out, const KeyTree& tree) {
  out << YAML::BeginMap;
  for (const auto& [key, child] : tree.children) {
    out << YAML::Key << key << YAML::Value;
    if (child.leaf) {
      out << child.value;
    } else if (child.children.empty()) {
      out << YAML::Flow << YAML::BeginMap << YAML::EndMap;
    } else {
      emit_tree(out, child);
    }
  }
  out << YAML::EndMap;
}

ExperimentConfig from_yaml_and_overrides(const YAML::Node& root,
                                         const std::vector<std::string>& overrides) {
  std::map<std::string, std::string> flat = ExperimentConfig{}.to_flat();
  std::map<std::string, std::string> file;
  if (root && !root.IsNull()) {
    if (!root.IsMap()) {
      throw ConfigError("config file must be a mapping of sections");
    }
    flatten_yaml(root, "", file);
  }
  for (const auto& [k, v] : file) {
    flat[k] = v;
  }
  for (const std::string& o : overrides) {
    apply_override(flat, o);
  }
  ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
  cfg.validate();
  return cfg;
}

}  // namespace

std::map<std::string, std::string> ExperimentConfig::to_flat() const {
  std::map<std::string, std::string> f;
  f["seed"] = fmt_size(seed);
  f["out_dir"] = out_dir;
  f["env.name"] = env;
  for (const auto& [k, v] : env_params.items()) {
    f[kEnvParamsPrefix + k] = env_param_text(v);
  }
  f["data.train_trajectories"] = fmt_size(train_trajectories);
  f["data.test_trajectories"] = fmt_size(test_trajectories);
  f["data.mix_expert_prob"] = fmt_double(mix_expert_prob);

  f["train.p_train"] = fmt_double(train.p_train);
  f["train.alpha_r"] = fmt_double(train.weights.alpha_r);
  f["train.alpha_d"] = fmt_double(train.weights.alpha_d);
  f["train.sequence_length"] = fmt_size(train.sequence_length);
  f["train.batch_size"] = fmt_size(train.batch_size);
  f["train.epochs"] = fmt_size(train.epochs);
  f["train.hidden_size"] = fmt_size(train.hidden_size);
  f["train.mixtures"] = fmt_size(train.mixtures);
  f["train.learning_rate"] = fmt_double(train.learning_rate);
  f["train.clip_norm"] = fmt_double(train.clip_norm);
  f["train.ensemble_size"] = fmt_size(ensemble_size);

  f["dream.p_infer"] = fmt_double(dream.p_infer);
  f["dream.policy"] = to_string(dream.policy);
  f["dream.mc_samples"] = fmt_size(dream.mc_samples);
  f["dream.z_init"] = to_string(dream.z_init);
  f["dream.max_episode_steps"] = fmt_size(dream.max_episode_steps);
  f["dream.noise_sigma"] = fmt_double(dream.noise_sigma);
  f["dream.scaling"] = to_string(dream.scaling);

  f["cma.population"] = fmt_size(cma.population);
  f["cma.trials"] = fmt_size(cma.trials);
  f["cma.generations"] = fmt_size(cma.generations);
  f["cma.eval_cadence"] = fmt_size(cma.eval_cadence);
  f["cma.initial_sigma"] = fmt_double(cma.initial_sigma);
  f["cma.features"] = to_string(features);
  f["cma.threads"] = fmt_size(cma.threads);

  f["eval.real_episodes"] = fmt_size(real_episodes);
  f["eval.loss_mask_samples"] = fmt_size(loss_mask_samples);
  return f;
}

ExperimentConfig ExperimentConfig::from_flat(const std::map<std::string, std::string>& flat) {
  ExperimentConfig c;
  std::map<std::string, std::string> known = c.to_flat();
  for (const auto& [key, text] : flat) {
    if (!known.contains(key) && !is_env_param(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = flat.find(key);
    return it != flat.end() ? it->second : known.at(key);
  };
  auto d = [&](const std::string& key) { return parse_double(key, get(key)); };
  auto u = [&](const std::string& key) { return parse_u64(key, get(key)); };
  auto wrap = [&](const std::string& key, auto&& fn) {
    try {
      return fn(get(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  };

  c.seed = u("seed");
  c.out_dir = get("out_dir");
  c.env = get("env.name");
  c.env_params = nlohmann::json::object();
  for (const auto& [key, text] : flat) {
    if (is_env_param(key)) {
      c.env_params[key.substr(std::string(kEnvParamsPrefix).size())] = env_param_value(text);
    }
  }
  c.train_trajectories = u("data.train_trajectories");
  c.test_trajectories = u("data.test_trajectories");
  c.mix_expert_prob = d("data.mix_expert_prob");

  c.train.p_train = d("train.p_train");
  c.train.weights.alpha_r = d("train.alpha_r");
  c.train.weights.alpha_d = d("train.alpha_d");
  c.train.sequence_length = u("train.sequence_length");
  c.train.batch_size = u("train.batch_size");
  c.train.epochs = u("train.epochs");
  c.train.hidden_size = u("train.hidden_size");
  c.train.mixtures = u("train.mixtures");
  c.train.learning_rate = d("train.learning_rate");
  c.train.clip_norm = d("train.clip_norm");
  c.ensemble_size = u("train.ensemble_size");

  c.dream.p_infer = d("dream.p_infer");
  c.dream.policy = wrap("dream.policy", parse_policy);
  c.dream.mc_samples = u("dream.mc_samples");
  c.dream.z_init = wrap("dream.z_init", parse_latent_init);
  c.dream.max_episode_steps = u("dream.max_episode_steps");
  c.dream.noise_sigma = d("dream.noise_sigma");
  c.dream.scaling = wrap("dream.scaling", parse_scaling);
  c.dream.p_train = c.train.p_train;

  c.cma.population = u("cma.population");
  c.cma.trials = u("cma.trials");
  c.cma.generations = u("cma.generations");
  c.cma.eval_cadence = u("cma.eval_cadence");
  c.cma.initial_sigma = d("cma.initial_sigma");
  c.features = wrap("cma.features", parse_feature_spec);
  c.cma.threads = u("cma.threads");

  c.real_episodes = u("eval.real_episodes");
  c.loss_mask_samples = u("eval.loss_mask_samples");
  return c;
}

std::string ExperimentConfig::to_yaml() const {
  YAML::Emitter out;
  emit_tree(out, build_tree(to_flat()));
  return std::string(out.c_str()) + "\n";
}

std::string ExperimentConfig::hash() const {
  std::string canonical;
  for (const auto& [key, value] : to_flat()) {
    if (key == "seed" || key == "out_dir" || key == "cma.threads") {
      continue;
    }
    canonical += key + "=" + value + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

void ExperimentConfig::validate() const {
  if (train_trajectories == 0) {
    throw ConfigError("data.train_trajectories must be positive");
  }
  if (!(mix_expert_prob >= 0.0 && mix_expert_prob <= 1.0)) {
    throw ConfigError("data.mix_expert_prob must lie in [0, 1]");
  }
  if (ensemble_size == 0) {
    throw ConfigError("train.ensemble_size must be positive");
  }
  if (real_episodes == 0 || loss_mask_samples == 0) {
    throw ConfigError("eval.real_episodes and eval.loss_mask_samples must be positive");
  }
  try {
    train.validate();
    dream.validate(ensemble_size);
    cma.validate();
    make_environment(env, env_params);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

void apply_override(std::map<std::string, std::string>& flat, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  const std::string key = assignment.substr(0, eq);
  if (!flat.contains(key) && !is_env_param(key)) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  flat[key] = assignment.substr(eq + 1);
}

ExperimentConfig parse_config(const std::string& yaml_text,
                              const std::vector<std::string>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  return from_yaml_and_overrides(root, overrides);
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  if (path.empty()) {
    return from_yaml_and_overrides(YAML::Node(), overrides);
  }
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides);
}

}  // namespace dreamland
