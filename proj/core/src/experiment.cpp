#include "dreamland/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dreamland/checkpoint.hpp"

namespace dreamland {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, text);
}

// The run directory is where the echo lives, so out_dir is left out.
std::string echo_yaml(ExperimentConfig cfg) {
  cfg.out_dir.clear();
  return cfg.to_yaml();
}

void echo_config(const ExperimentConfig& cfg, const RunPaths& paths) {
  write_text(paths.config(), echo_yaml(cfg));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string::npos) {
      return out;
    }
    start = pos + 1;
  }
}

Dataset load_run_dataset(const RunPaths& paths) {
  Dataset ds = load_dataset(paths.train_data());
  const Dataset test = load_dataset(paths.test_data());
  for (std::size_t idx : test.test) {
    ds.test.push_back(ds.trajectories.size());
    ds.trajectories.push_back(test.trajectories.at(idx));
  }
  ds.validate();
  return ds;
}

std::vector<WorldModelParams> load_run_models(const ExperimentConfig& cfg, const RunPaths& paths) {
  std::vector<WorldModelParams> models;
  for (std::size_t m = 0; m < cfg.ensemble_size; ++m) {
    models.push_back(world_model_from_checkpoint(load_checkpoint(paths.model(m))));
  }
  return models;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, Stage stage, std::uint64_t member) {
  return Rng::derive_seed(cfg.seed, {static_cast<std::uint64_t>(stage), member});
}

Dataset build_dataset(const ExperimentConfig& cfg) {
  const auto env = make_environment(cfg.env, cfg.env_params);
  Dataset ds = collect_trajectories(*env, cfg.train_trajectories + cfg.test_trajectories,
                                    cfg.mix_expert_prob, stage_seed(cfg, Stage::kCollect));
  split_train_test(ds, cfg.test_trajectories);
  return ds;
}

std::vector<TrainResult> train_world_models(const ExperimentConfig& cfg, const Dataset& dataset) {
  std::vector<TrainResult> out;
  for (std::size_t m = 0; m < cfg.ensemble_size; ++m) {
    TrainConfig tc = cfg.train;
    tc.seed = stage_seed(cfg, Stage::kTrain, m);
    out.push_back(train_dynamics(dataset, tc));
  }
  return out;
}

OptimizeResult train_controller(const ExperimentConfig& cfg,
                                const std::vector<WorldModelParams>& models,
                                const Dataset& dataset) {
  if (models.empty()) {
    throw std::invalid_argument("train_controller: no world model");
  }
  std::vector<const WorldModelParams*> ptrs;
  for (const WorldModelParams& m : models) {
    ptrs.push_back(&m);
  }
  const std::vector<Vector> starts = dataset_starts(dataset);
  DreamConfig dream = cfg.dream;
  dream.p_train = cfg.train.p_train;
  const DreamEnvFactory factory = [&] {
    return std::make_unique<DreamEnv>(ptrs, dream, &starts);
  };
  const WorldModelShape& shape = models.front().shape;
  const ControllerParams ctrl = ControllerParams::zeros(shape.action_size, shape.latent_size,
                                                        shape.hidden_size, cfg.features);
  CmaConfig cma = cfg.cma;
  cma.seed = stage_seed(cfg, Stage::kController);
  return cma_optimize(factory, ctrl, cma);
}

RealEvaluation evaluate_controller(const ExperimentConfig& cfg, const ControllerParams& ctrl,
                                   const WorldModelParams& model) {
  const auto env = make_environment(cfg.env, cfg.env_params);
  return evaluate_real(ctrl, model, *env, cfg.real_episodes, stage_seed(cfg, Stage::kReal));
}

nlohmann::json RunSummary::to_json() const {
  return {{"config_hash", config_hash},   {"seed", seed},
          {"train_loss", train_loss},     {"test_loss", test_loss},
          {"infer_loss", infer_loss},     {"infer_loss_se", infer_loss_se},
          {"dream_best", dream_best},     {"real_mean", real_mean},
          {"real_std", real_std},         {"masks_sampled", masks_sampled},
          {"dream_steps", dream_steps}};
}

std::filesystem::path RunPaths::model(std::size_t member) const {
  return dir / ("model-" + std::to_string(member) + ".ckpt");
}

std::filesystem::path RunPaths::loss_csv(std::size_t member) const {
  return dir / ("loss-" + std::to_string(member) + ".csv");
}

void stage_collect(const ExperimentConfig& cfg, const RunPaths& paths) {
  echo_config(cfg, paths);
  const Dataset ds = build_dataset(cfg);
  Dataset train = ds.subset(ds.train);
  Dataset test = ds.subset(ds.test);
  test.test = std::move(test.train);
  test.train.clear();
  save_dataset(train, paths.train_data());
  save_dataset(test, paths.test_data());
}

void stage_train_dynamics(const ExperimentConfig& cfg, const RunPaths& paths) {
  echo_config(cfg, paths);
  const Dataset ds = load_run_dataset(paths);
  const std::vector<TrainResult> results = train_world_models(cfg, ds);
  for (std::size_t m = 0; m < results.size(); ++m) {
    TrainConfig tc = cfg.train;
    tc.seed = stage_seed(cfg, Stage::kTrain, m);
    nlohmann::json meta = tc.to_json();
    meta["config_hash"] = cfg.hash();
    save_checkpoint(world_model_checkpoint(results[m].params, meta), paths.model(m));
    std::ostringstream csv;
    results[m].report.write_csv(csv);
    write_text(paths.loss_csv(m), csv.str());
  }
}

void stage_train_controller(const ExperimentConfig& cfg, const RunPaths& paths) {
  echo_config(cfg, paths);
  const Dataset ds = load_run_dataset(paths);
  const std::vector<WorldModelParams> models = load_run_models(cfg, paths);
  const OptimizeResult result = train_controller(cfg, models, ds);

  std::ostringstream board;
  result.board.write_csv(board);
  write_text(paths.leaderboard(), board.str());

  std::ostringstream gens;
  gens << "generation,best_fitness,mean_fitness,sigma,masks_sampled,episodes,dream_steps,flagged\n";
  for (const GenerationStats& g : result.history) {
    gens << g.generation << ',' << format_double(g.best_fitness) << ','
         << format_double(g.mean_fitness) << ',' << format_double(g.sigma) << ','
         << g.masks_sampled << ',' << g.episodes << ',' << g.dream_steps << ',' << g.flagged
         << '\n';
  }
  write_text(paths.generations(), gens.str());

  const LeaderEntry& top = result.board.best();
  nlohmann::json meta = cfg.cma.to_json();
  meta["seed"] = stage_seed(cfg, Stage::kController);
  meta["config_hash"] = cfg.hash();
  meta["leader_generation"] = top.generation;
  meta["dream_mean"] = top.dream_mean;
  meta["dream_std"] = top.dream_std;
  save_checkpoint(controller_checkpoint(result.best, meta), paths.controller());
}

RealEvaluation stage_eval_real(const ExperimentConfig& cfg, const RunPaths& paths,
                               const std::filesystem::path& controller) {
  echo_config(cfg, paths);
  const ControllerParams ctrl = controller_from_checkpoint(
      load_checkpoint(controller.empty() ? paths.controller() : controller));
  const WorldModelParams model = world_model_from_checkpoint(load_checkpoint(paths.model(0)));
  const RealEvaluation eval = evaluate_controller(cfg, ctrl, model);
  nlohmann::json j = {{"config_hash", cfg.hash()},
                      {"seed", cfg.seed},
                      {"env", cfg.env},
                      {"episodes", eval.returns.size()},
                      {"mean", eval.mean},
                      {"std", eval.std},
                      {"returns", eval.returns}};
  write_text(paths.eval_json(), j.dump(2) + "\n");
  return eval;
}

RunSummary run_all_stages(const ExperimentConfig& cfg, const RunPaths& paths) {
  stage_collect(cfg, paths);
  stage_train_dynamics(cfg, paths);
  stage_train_controller(cfg, paths);
  const RealEvaluation eval = stage_eval_real(cfg, paths);

  RunSummary s;
  s.config_hash = cfg.hash();
  s.seed = cfg.seed;
  {
    std::ifstream in(paths.loss_csv(0));
    std::string line;
    std::string last;
    while (std::getline(in, line)) {
      if (!line.empty()) {
        last = line;
      }
    }
    const std::vector<std::string> cols = split(last, ',');
    if (cols.size() < 3) {
      throw FormatError("malformed loss CSV " + paths.loss_csv(0).string());
    }
    s.train_loss = std::stod(cols[1]);
    s.test_loss = cols[2] == "nan" ? std::nan("") : std::stod(cols[2]);
  }
  const Dataset ds = load_run_dataset(paths);
  const WorldModelParams model = world_model_from_checkpoint(load_checkpoint(paths.model(0)));
  const LossEstimate est =
      evaluate_loss(model, ds, cfg.dream.p_infer, cfg.loss_mask_samples,
                    stage_seed(cfg, Stage::kLoss), cfg.train.weights, cfg.dream.scaling,
                    cfg.train.p_train);
  s.infer_loss = est.mean;
  s.infer_loss_se = est.standard_error;
  {
    std::ifstream in(paths.leaderboard());
    std::string line;
    std::getline(in, line);
    bool first = true;
    while (std::getline(in, line)) {
      const std::vector<std::string> cols = split(line, ',');
      const double v = std::stod(cols.at(1));
      if (first || v > s.dream_best) {
        s.dream_best = v;
      }
      first = false;
    }
  }
  {
    std::ifstream in(paths.generations());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const std::vector<std::string> cols = split(line, ',');
      s.masks_sampled += std::stoull(cols.at(4));
      s.dream_steps += std::stoull(cols.at(6));
    }
  }
  s.real_mean = eval.mean;
  s.real_std = eval.std;
  write_text(paths.summary(), s.to_json().dump(2) + "\n");
  return s;
}

SweepAxis parse_axis(const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("sweep axis '" + spec + "' is not of the form section.key=v1,v2,...");
  }
  SweepAxis axis{spec.substr(0, eq), split(spec.substr(eq + 1), ',')};
  const std::map<std::string, std::string> known = ExperimentConfig{}.to_flat();
  if (!known.contains(axis.key) && axis.key.rfind("env.params.", 0) != 0) {
    throw ConfigError("unknown sweep axis '" + axis.key + "'");
  }
  if (axis.key == "seed" || axis.key == "out_dir") {
    throw ConfigError("'" + axis.key + "' cannot be swept; use the seed list");
  }
  return axis;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& base,
                                      const std::vector<SweepAxis>& axes,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::filesystem::path& out) {
  if (seeds.empty()) {
    throw ConfigError("ablation needs at least one seed");
  }
  std::vector<std::vector<std::string>> points{{}};
  for (const SweepAxis& axis : axes) {
    std::vector<std::vector<std::string>> next;
    for (const auto& p : points) {
      for (const std::string& v : axis.values) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }

  // Resolve every point up front so a bad value fails before any work.
  std::vector<ExperimentConfig> configs;
  for (const auto& point : points) {
    std::map<std::string, std::string> flat = base.to_flat();
    for (std::size_t i = 0; i < axes.size(); ++i) {
      apply_override(flat, axes[i].key + "=" + point[i]);
    }
    ExperimentConfig cfg = ExperimentConfig::from_flat(flat);
    cfg.validate();
    configs.push_back(std::move(cfg));
  }

  std::vector<AblationRow> rows;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const std::string hash = configs[p].hash();
    write_text(out / "configs" / (hash + ".yaml"), echo_yaml(configs[p]));
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = configs[p];
      cfg.seed = seed;
      const RunPaths paths{out / "points" / hash / ("seed-" + std::to_string(seed))};
      rows.push_back({points[p], run_all_stages(cfg, paths)});
    }
  }
  std::ostringstream csv;
  write_ablation_csv(csv, axes, rows);
  write_text(out / "results.csv", csv.str());
  return rows;
}

std::string format_summary_row(const RunSummary& s) {
  std::ostringstream o;
  o << format_double(s.train_loss) << ',' << format_double(s.test_loss) << ','
    << format_double(s.infer_loss) << ',' << format_double(s.infer_loss_se) << ','
    << format_double(s.dream_best) << ',' << format_double(s.real_mean) << ','
    << format_double(s.real_std) << ',' << s.masks_sampled << ',' << s.dream_steps;
  return o.str();
}

void write_ablation_csv(std::ostream& out, const std::vector<SweepAxis>& axes,
                        const std::vector<AblationRow>& rows) {
  out << "config_hash,seed";
  for (const SweepAxis& a : axes) {
    out << ',' << a.key;
  }
  out << ",train_loss,test_loss,infer_loss,infer_loss_se,dream_best,real_mean,real_std,"
         "masks_sampled,dream_steps\n";
  for (const AblationRow& r : rows) {
    out << r.summary.config_hash << ',' << r.summary.seed;
    for (const std::string& v : r.axis_values) {
      out << ',' << v;
    }
    out << ',' << format_summary_row(r.summary) << '\n';
  }
}

void write_report(std::istream& results_csv, std::ostream& out) {
  std::string line;
  if (!std::getline(results_csv, line)) {
    throw FormatError("results CSV is empty");
  }
  const std::vector<std::string> header = split(line, ',');
  if (header.size() < 2 || header[0] != "config_hash" || header[1] != "seed") {
    throw FormatError("results CSV must start with config_hash,seed");
  }
  std::size_t first_metric = 2;
  while (first_metric < header.size() && header[first_metric] != "train_loss") {
    ++first_metric;
  }
  if (first_metric == header.size()) {
    throw FormatError("results CSV has no train_loss column");
  }

  struct Group {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> metrics;
  };
  std::vector<std::string> order;
  std::map<std::string, Group> groups;
  while (std::getline(results_csv, line)) {
    if (line.empty()) {
      continue;
    }
    const std::vector<std::string> cols = split(line, ',');
    if (cols.size() != header.size()) {
      throw FormatError("results CSV row has " + std::to_string(cols.size()) + " columns, expected " +
                        std::to_string(header.size()));
    }
    auto [it, inserted] = groups.try_emplace(cols[0]);
    if (inserted) {
      order.push_back(cols[0]);
      it->second.labels.assign(cols.begin() + 2, cols.begin() + static_cast<long>(first_metric));
      it->second.metrics.resize(header.size() - first_metric);
    }
    for (std::size_t c = first_metric; c < header.size(); ++c) {
      it->second.metrics[c - first_metric].push_back(cols[c] == "nan" ? std::nan("")
                                                                      : std::stod(cols[c]));
    }
  }

  out << "config_hash";
  for (std::size_t c = 2; c < first_metric; ++c) {
    out << ',' << header[c];
  }
  out << ",seeds";
  for (std::size_t c = first_metric; c < header.size(); ++c) {
    out << ',' << header[c];
  }
  out << '\n';
  for (const std::string& hash : order) {
    const Group& g = groups.at(hash);
    out << hash;
    for (const std::string& l : g.labels) {
      out << ',' << l;
    }
    out << ',' << g.metrics.front().size();
    for (const std::vector<double>& m : g.metrics) {
      double mean = 0.0;
      for (double v : m) {
        mean += v;
      }
      mean /= static_cast<double>(m.size());
      double ss = 0.0;
      for (double v : m) {
        ss += (v - mean) * (v - mean);
      }
      const double sd = std::sqrt(ss / static_cast<double>(m.size()));
      char buf[96];
      std::snprintf(buf, sizeof buf, "%.4g ± %.4g", mean, sd);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace dreamland
