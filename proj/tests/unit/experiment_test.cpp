#include "dreamland/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "dreamland/checkpoint.hpp"

namespace dreamland {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kTiny = {
    "data.train_trajectories=6", "data.test_trajectories=2", "train.epochs=1",
    "train.hidden_size=4",       "cma.generations=2",        "cma.eval_cadence=1",
    "cma.population=4",          "cma.trials=1",             "cma.threads=1",
    "eval.real_episodes=2",      "eval.loss_mask_samples=1", "dream.max_episode_steps=20"};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("dreamland_experiment_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) { return read_file(p); }

TEST(Experiment, StageSeedsAreIndependent) {
  ExperimentConfig cfg;
  EXPECT_NE(stage_seed(cfg, Stage::kCollect), stage_seed(cfg, Stage::kTrain));
  EXPECT_NE(stage_seed(cfg, Stage::kTrain, 0), stage_seed(cfg, Stage::kTrain, 1));
  ExperimentConfig other = cfg;
  other.seed = 1;
  EXPECT_NE(stage_seed(cfg, Stage::kTrain), stage_seed(other, Stage::kTrain));
}

TEST(Experiment, AllStagesWriteExpectedFilesDeterministically) {
  const ExperimentConfig cfg = parse_config("", kTiny);
  const RunPaths a{scratch("a")};
  const RunPaths b{scratch("b")};
  const RunSummary sa = run_all_stages(cfg, a);
  const RunSummary sb = run_all_stages(cfg, b);
  for (const fs::path& p : {a.config(), a.train_data(), a.test_data(), a.model(0), a.loss_csv(0),
                            a.leaderboard(), a.generations(), a.controller(), a.eval_json(),
                            a.summary()}) {
    EXPECT_TRUE(fs::exists(p)) << p;
  }
  EXPECT_EQ(slurp(a.summary()), slurp(b.summary()));
  EXPECT_EQ(slurp(a.model(0)), slurp(b.model(0)));
  EXPECT_EQ(slurp(a.controller()), slurp(b.controller()));
  EXPECT_EQ(sa.config_hash, cfg.hash());
  EXPECT_EQ(load_dataset(a.train_data()).trajectories.size(), 6u);
  EXPECT_EQ(load_dataset(a.test_data()).test.size(), 2u);
  // The echoed config reproduces the run.
  const ExperimentConfig echoed = load_config(a.config());
  EXPECT_EQ(echoed.hash(), cfg.hash());
  EXPECT_TRUE(echoed.out_dir.empty());
  fs::remove_all(a.dir);
  fs::remove_all(b.dir);
}

TEST(Experiment, EvalAcceptsExplicitController) {
  const ExperimentConfig cfg = parse_config("", kTiny);
  const RunPaths run{scratch("eval")};
  run_all_stages(cfg, run);
  const fs::path copy = run.dir / "other.ckpt";
  fs::copy_file(run.controller(), copy);
  const RealEvaluation a = stage_eval_real(cfg, run);
  const RealEvaluation b = stage_eval_real(cfg, run, copy);
  EXPECT_EQ(a.returns, b.returns);
  EXPECT_THROW(stage_eval_real(cfg, run, run.dir / "missing.ckpt"), std::runtime_error);
  fs::remove_all(run.dir);
}

TEST(Ablation, ParseAxis) {
  const SweepAxis axis = parse_axis("dream.p_infer=0,0.05,0.1");
  EXPECT_EQ(axis.key, "dream.p_infer");
  EXPECT_EQ(axis.values, (std::vector<std::string>{"0", "0.05", "0.1"}));
  EXPECT_EQ(parse_axis("env.params.tiles=10,20").values.size(), 2u);
  EXPECT_THROW(parse_axis("dream.p_infr=0"), ConfigError);
  EXPECT_THROW(parse_axis("seed=1,2"), ConfigError);
  EXPECT_THROW(parse_axis("dream.p_infer"), ConfigError);
}

TEST(Ablation, RowsRegenerateFromRecordedConfig) {
  const ExperimentConfig base = parse_config("", kTiny);
  const fs::path out = scratch("ablation");
  const std::vector<SweepAxis> axes{parse_axis("dream.policy=step,episode")};
  const auto rows = run_ablation(base, axes, {0, 1}, out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_TRUE(fs::exists(out / "results.csv"));
  EXPECT_NE(rows[0].summary.config_hash, rows[2].summary.config_hash);
  EXPECT_EQ(rows[0].summary.config_hash, rows[1].summary.config_hash);

  const AblationRow& row = rows[3];
  ExperimentConfig cfg = load_config(out / "configs" / (row.summary.config_hash + ".yaml"));
  cfg.seed = row.summary.seed;
  const RunSummary again = run_all_stages(cfg, RunPaths{out / "regen"});
  EXPECT_EQ(format_summary_row(again), format_summary_row(row.summary));
  EXPECT_EQ(again.config_hash, row.summary.config_hash);

  std::ifstream csv(out / "results.csv");
  std::ostringstream report;
  write_report(csv, report);
  const std::string text = report.str();
  EXPECT_EQ(text.substr(0, text.find('\n')),
            "config_hash,dream.policy,seeds,train_loss,test_loss,infer_loss,infer_loss_se,"
            "dream_best,real_mean,real_std,masks_sampled,dream_steps");
  EXPECT_NE(text.find(",step,2,"), std::string::npos);
  EXPECT_NE(text.find(",episode,2,"), std::string::npos);
  fs::remove_all(out);
}

TEST(Report, RejectsMalformedInput) {
  std::istringstream empty("");
  std::ostringstream out;
  EXPECT_THROW(write_report(empty, out), FormatError);
  std::istringstream bad_header("a,b,c\n");
  EXPECT_THROW(write_report(bad_header, out), FormatError);
  std::istringstream ragged("config_hash,seed,train_loss\nabc,0\n");
  EXPECT_THROW(write_report(ragged, out), FormatError);
}

TEST(Report, MeanAndStdOverSeeds) {
  std::istringstream csv("config_hash,seed,x,train_loss\nh1,0,a,1\nh1,1,a,3\nh2,0,b,5\n");
  std::ostringstream out;
  write_report(csv, out);
  EXPECT_EQ(out.str(), "config_hash,x,seeds,train_loss\nh1,a,2,2 ± 1\nh2,b,1,5 ± 0\n");
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(-2.5), "-2.5");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

}  // namespace
}  // namespace dreamland
