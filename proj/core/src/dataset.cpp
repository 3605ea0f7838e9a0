#include "dreamland/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dreamland/checkpoint.hpp"

namespace dreamland {
namespace {

constexpr std::string_view kFormat = "dreamland-dataset";

std::string_view read_line(std::string_view bytes, std::size_t& offset) {
  const std::size_t end = bytes.find('\n', offset);
  if (end == std::string_view::npos) {
    throw FormatError("dataset truncated: missing header line terminator");
  }
  const std::string_view line = bytes.substr(offset, end - offset);
  offset = end + 1;
  return line;
}

nlohmann::json parse_json_line(std::string_view line, const char* what) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset ") + what + " is not valid JSON: " + e.what());
  }
}

Sequence build_sequence(const Trajectory& traj, std::size_t begin, std::size_t length) {
  const auto n = traj.states.cols();
  const auto a = traj.actions.cols();
  Sequence seq;
  seq.inputs.reserve(length);
  seq.next_latent.reserve(length);
  for (std::size_t t = begin; t < begin + length; ++t) {
    const auto row = static_cast<Eigen::Index>(t);
    Vector x(n + a);
    x.head(n) = traj.states.row(row).transpose();
    x.tail(a) = traj.actions.row(row).transpose();
    seq.inputs.push_back(std::move(x));
    if (t + 1 < traj.size()) {
      seq.next_latent.emplace_back(traj.states.row(row + 1).transpose());
    } else {
      seq.next_latent.emplace_back();
    }
    seq.rewards.push_back(traj.rewards[t]);
    seq.dones.push_back(traj.dones[t]);
  }
  return seq;
}

}  // namespace

bool Trajectory::operator==(const Trajectory& o) const {
  return states.rows() == o.states.rows() && states.cols() == o.states.cols() &&
         actions.rows() == o.actions.rows() && actions.cols() == o.actions.cols() &&
         states == o.states && actions == o.actions && rewards == o.rewards && dones == o.dones &&
         policy == o.policy && seed == o.seed;
}

double Trajectory::total_reward() const {
  return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

void Dataset::validate() const {
  std::set<std::size_t> seen;
  for (const auto* split : {&train, &test}) {
    for (std::size_t i : *split) {
      if (i >= trajectories.size()) {
        throw std::invalid_argument("dataset split index out of range");
      }
      if (!seen.insert(i).second) {
        throw std::invalid_argument("dataset splits overlap or repeat a trajectory");
      }
    }
  }
  for (const Trajectory& t : trajectories) {
    const auto len = static_cast<Eigen::Index>(t.size());
    if (t.states.rows() != len || t.actions.rows() != len || t.dones.size() != t.size() ||
        static_cast<std::size_t>(t.states.cols()) != state_size ||
        static_cast<std::size_t>(t.actions.cols()) != action_size) {
      throw std::invalid_argument("trajectory shape does not match dataset dimensions");
    }
    if (t.size() == 0) {
      throw std::invalid_argument("empty trajectory");
    }
    for (std::size_t s = 0; s + 1 < t.size(); ++s) {
      if (t.dones[s] != 0) {
        throw std::invalid_argument("trajectory terminates before its final tuple");
      }
    }
    if (t.dones.back() == 0) {
      throw std::invalid_argument("trajectory does not terminate on its final tuple");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.env = env;
  out.env_params = env_params;
  out.state_size = state_size;
  out.action_size = action_size;
  out.metadata = metadata;
  for (std::size_t i : indices) {
    out.train.push_back(out.trajectories.size());
    out.trajectories.push_back(trajectories.at(i));
  }
  return out;
}

Dataset collect_trajectories(const Environment& env, std::size_t count, double mix_expert_prob,
                             std::uint64_t seed) {
  if (count == 0) {
    throw std::invalid_argument("collect_trajectories: count must be at least 1");
  }
  if (!(mix_expert_prob >= 0.0 && mix_expert_prob <= 1.0)) {
    throw std::invalid_argument("collect_trajectories: mix_expert_prob must lie in [0, 1]");
  }
  Dataset ds;
  ds.env = env.name();
  ds.env_params = env.describe();
  ds.state_size = env.state_size();
  ds.action_size = env.action_size();
  ds.metadata = {{"mix_expert_prob", mix_expert_prob}, {"seed", seed}};
  const std::string policy = mix_expert_prob == 0.0   ? "random"
                             : mix_expert_prob == 1.0 ? "expert"
                                                      : "mixed";
  const auto n = static_cast<Eigen::Index>(env.state_size());
  const auto a = static_cast<Eigen::Index>(env.action_size());

  for (std::size_t e = 0; e < count; ++e) {
    const std::unique_ptr<Environment> world = env.clone();
    Rng rng = Rng::derive(seed, {e});
    Rng env_rng = rng.split(1);
    Rng policy_rng = rng.split(2);
    std::vector<Vector> states;
    std::vector<Vector> actions;
    Trajectory traj;
    traj.policy = policy;
    traj.seed = Rng::derive_seed(seed, {e});
    Vector z = world->reset(env_rng);
    while (true) {
      Vector act;
      if (policy_rng.uniform() < mix_expert_prob) {
        act = world->expert_action();
      } else {
        act.resize(a);
        for (Eigen::Index i = 0; i < a; ++i) {
          act[i] = policy_rng.uniform(-1.0, 1.0);
        }
      }
      const EnvStep step = world->step(act, env_rng);
      states.push_back(z);
      actions.push_back(act);
      traj.rewards.push_back(step.reward);
      traj.dones.push_back(step.done ? 1 : 0);
      z = step.state;
      if (step.done) {
        break;
      }
    }
    const auto len = static_cast<Eigen::Index>(states.size());
    traj.states.resize(len, n);
    traj.actions.resize(len, a);
    for (Eigen::Index t = 0; t < len; ++t) {
      traj.states.row(t) = states[static_cast<std::size_t>(t)].transpose();
      traj.actions.row(t) = actions[static_cast<std::size_t>(t)].transpose();
    }
    ds.train.push_back(ds.trajectories.size());
    ds.trajectories.push_back(std::move(traj));
  }
  return ds;
}

void split_train_test(Dataset& ds, std::size_t test_count) {
  if (test_count > ds.trajectories.size()) {
    throw std::invalid_argument("split_train_test: more test trajectories than available");
  }
  ds.train.clear();
  ds.test.clear();
  const std::size_t cut = ds.trajectories.size() - test_count;
  for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
    (i < cut ? ds.train : ds.test).push_back(i);
  }
}

std::string encode_dataset(const Dataset& ds) {
  ds.validate();
  nlohmann::json header = {{"format", kFormat},
                           {"version", Dataset::kVersion},
                           {"env", ds.env},
                           {"env_params", ds.env_params},
                           {"state_size", ds.state_size},
                           {"action_size", ds.action_size},
                           {"trajectories", ds.trajectories.size()},
                           {"train", ds.train},
                           {"test", ds.test},
                           {"metadata", ds.metadata}};
  std::string out = header.dump();
  out.push_back('\n');
  for (const Trajectory& t : ds.trajectories) {
    std::string block;
    for (std::size_t s = 0; s < t.size(); ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      for (Eigen::Index i = 0; i < t.states.cols(); ++i) {
        append_f64(block, t.states(row, i));
      }
      for (Eigen::Index i = 0; i < t.actions.cols(); ++i) {
        append_f64(block, t.actions(row, i));
      }
      append_f64(block, t.rewards[s]);
      append_f64(block, t.dones[s] != 0 ? 1.0 : 0.0);
    }
    const nlohmann::json line = {{"len", t.size()},
                                 {"policy", t.policy},
                                 {"seed", t.seed},
                                 {"checksum", fnv1a64(block)}};
    out.append(line.dump());
    out.push_back('\n');
    out.append(block);
    out.push_back('\n');
  }
  return out;
}

Dataset decode_dataset(std::string_view bytes) {
  std::size_t offset = 0;
  const nlohmann::json header = parse_json_line(read_line(bytes, offset), "header");
  if (header.value("format", "") != kFormat) {
    throw FormatError("not a dataset file");
  }
  const auto version = header.value("version", 0u);
  if (version != Dataset::kVersion) {
    throw FormatError("dataset version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(Dataset::kVersion) + ")");
  }
  Dataset ds;
  std::size_t count = 0;
  try {
    ds.env = header.at("env").get<std::string>();
    ds.env_params = header.at("env_params");
    ds.state_size = header.at("state_size").get<std::size_t>();
    ds.action_size = header.at("action_size").get<std::size_t>();
    count = header.at("trajectories").get<std::size_t>();
    ds.train = header.at("train").get<std::vector<std::size_t>>();
    ds.test = header.at("test").get<std::vector<std::size_t>>();
    ds.metadata = header.at("metadata");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("dataset header incomplete: ") + e.what());
  }
  const std::size_t width = ds.state_size + ds.action_size + 2;
  const auto n = static_cast<Eigen::Index>(ds.state_size);
  const auto a = static_cast<Eigen::Index>(ds.action_size);
  for (std::size_t k = 0; k < count; ++k) {
    const nlohmann::json line = parse_json_line(read_line(bytes, offset), "trajectory header");
    Trajectory t;
    std::size_t len = 0;
    std::uint64_t checksum = 0;
    try {
      len = line.at("len").get<std::size_t>();
      t.policy = line.at("policy").get<std::string>();
      t.seed = line.at("seed").get<std::uint64_t>();
      checksum = line.at("checksum").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("trajectory header incomplete: ") + e.what());
    }
    const std::size_t block_size = len * width * 8;
    if (bytes.size() - offset < block_size + 1) {
      throw FormatError("dataset truncated inside trajectory " + std::to_string(k));
    }
    const std::string_view block = bytes.substr(offset, block_size);
    offset += block_size;
    if (bytes[offset] != '\n') {
      throw FormatError("dataset corrupt: missing block terminator");
    }
    ++offset;
    if (fnv1a64(block) != checksum) {
      throw FormatError("dataset corrupt: checksum mismatch in trajectory " + std::to_string(k));
    }
    ByteReader in(block);
    t.states.resize(static_cast<Eigen::Index>(len), n);
    t.actions.resize(static_cast<Eigen::Index>(len), a);
    for (std::size_t s = 0; s < len; ++s) {
      const auto row = static_cast<Eigen::Index>(s);
      for (Eigen::Index i = 0; i < n; ++i) {
        t.states(row, i) = in.f64();
      }
      for (Eigen::Index i = 0; i < a; ++i) {
        t.actions(row, i) = in.f64();
      }
      t.rewards.push_back(in.f64());
      t.dones.push_back(in.f64() != 0.0 ? 1 : 0);
    }
    ds.trajectories.push_back(std::move(t));
  }
  if (offset != bytes.size()) {
    throw FormatError("dataset has trailing bytes");
  }
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("dataset invalid: ") + e.what());
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  write_file(path, encode_dataset(ds));
}

Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(read_file(path)); }

std::vector<Sequence> make_training_windows(const Trajectory& traj, std::size_t length) {
  if (length == 0) {
    throw std::invalid_argument("make_training_windows: length must be positive");
  }
  std::vector<Sequence> out;
  const std::size_t total = traj.size();
  if (total < length) {
    return out;
  }
  std::size_t begin = 0;
  for (; begin + length <= total; begin += length) {
    out.push_back(build_sequence(traj, begin, length));
  }
  if (begin < total) {
    out.push_back(build_sequence(traj, total - length, length));
  }
  return out;
}

Sequence make_sequence(const Trajectory& traj) { return build_sequence(traj, 0, traj.size()); }

}  // namespace dreamland
