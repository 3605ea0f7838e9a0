#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamland/config.hpp"
#include "dreamland/controller_opt.hpp"
#include "dreamland/dataset.hpp"
#include "dreamland/model_trainer.hpp"

namespace dreamland {

// Independent streams derived from the global seed, one per pipeline stage.
enum class Stage : std::uint64_t { kCollect = 1, kTrain = 2, kController = 3, kReal = 4, kLoss = 5 };
std::uint64_t stage_seed(const ExperimentConfig& cfg, Stage stage, std::uint64_t member = 0);

// Train trajectories followed by test trajectories, split accordingly.
Dataset build_dataset(const ExperimentConfig& cfg);
// One model per ensemble member, each from its own training seed.
std::vector<TrainResult> train_world_models(const ExperimentConfig& cfg, const Dataset& dataset);
OptimizeResult train_controller(const ExperimentConfig& cfg,
                                const std::vector<WorldModelParams>& models,
                                const Dataset& dataset);
// The first model supplies h and c on the real environment.
RealEvaluation evaluate_controller(const ExperimentConfig& cfg, const ControllerParams& ctrl,
                                   const WorldModelParams& model);

struct RunSummary {
  std::string config_hash;
  std::uint64_t seed = 0;
  double train_loss = 0.0;      // last epoch, training masks applied
  double test_loss = 0.0;       // last epoch, mask-free
  double infer_loss = 0.0;      // test loss with masks at dream.p_infer
  double infer_loss_se = 0.0;
  double dream_best = 0.0;      // top of the leader board
  double real_mean = 0.0;
  double real_std = 0.0;
  std::uint64_t masks_sampled = 0;
  std::uint64_t dream_steps = 0;

  nlohmann::json to_json() const;
};

// Files written into a run directory by the stage commands.
struct RunPaths {
  std::filesystem::path dir;
  std::filesystem::path config() const { return dir / "config.yaml"; }
  std::filesystem::path train_data() const { return dir / "train.dset"; }
  std::filesystem::path test_data() const { return dir / "test.dset"; }
  std::filesystem::path model(std::size_t member) const;
  std::filesystem::path loss_csv(std::size_t member) const;
  std::filesystem::path leaderboard() const { return dir / "leaderboard.csv"; }
  std::filesystem::path generations() const { return dir / "generations.csv"; }
  std::filesystem::path controller() const { return dir / "controller.ckpt"; }
  std::filesystem::path eval_json() const { return dir / "eval.json"; }
  std::filesystem::path summary() const { return dir / "summary.json"; }
};

// Each stage echoes the effective config into the run directory and reads
// its inputs from files written by the previous stage.
void stage_collect(const ExperimentConfig& cfg, const RunPaths& paths);
void stage_train_dynamics(const ExperimentConfig& cfg, const RunPaths& paths);
void stage_train_controller(const ExperimentConfig& cfg, const RunPaths& paths);
// Uses paths.controller() unless another controller checkpoint is given.
RealEvaluation stage_eval_real(const ExperimentConfig& cfg, const RunPaths& paths,
                               const std::filesystem::path& controller = {});
// All four stages followed by the infer-loss estimate; writes summary.json.
RunSummary run_all_stages(const ExperimentConfig& cfg, const RunPaths& paths);

struct SweepAxis {
  std::string key;  // config key, e.g. dream.p_infer
  std::vector<std::string> values;
};
// "dream.p_infer=0,0.05,0.1". Throws ConfigError for an unknown key.
SweepAxis parse_axis(const std::string& spec);

struct AblationRow {
  std::vector<std::string> axis_values;
  RunSummary summary;
};

/// Runs every point of the cartesian product of the axes for every seed. Run
/// directories are <out>/points/<hash>/seed-<seed>; configs/<hash>.yaml holds
/// each point's effective config and results.csv the long-format rows.
std::vector<AblationRow> run_ablation(const ExperimentConfig& base,
                                      const std::vector<SweepAxis>& axes,
                                      const std::vector<std::uint64_t>& seeds,
                                      const std::filesystem::path& out);

// config_hash,seed,<axes...>,train_loss,test_loss,infer_loss,infer_loss_se,
// dream_best,real_mean,real_std,masks_sampled,dream_steps
void write_ablation_csv(std::ostream& out, const std::vector<SweepAxis>& axes,
                        const std::vector<AblationRow>& rows);
std::string format_summary_row(const RunSummary& s);

/// Groups the rows of a results.csv by config hash, labels each group with its
/// axis values and reports mean and std over seeds for each metric column.
void write_report(std::istream& results_csv, std::ostream& out);

// Shortest round-trip text, used for every floating-point value in reports.
std::string format_double(double v);

}  // namespace dreamland
