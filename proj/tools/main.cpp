#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dreamland/checkpoint.hpp"
#include "dreamland/config.hpp"
#include "dreamland/experiment.hpp"

namespace fs = std::filesystem;
using namespace dreamland;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("-c,--config", opts.config_path, "YAML experiment config")
      ->check(CLI::ExistingFile);
  cmd->add_option("-s,--set", opts.overrides, "Override a config key: section.key=value")
      ->take_all();
  cmd->add_option("-o,--out", opts.out,
                  "Output directory (default: out_dir from the config, then $DREAMLAND_OUT, "
                  "then ./runs)");
}

ExperimentConfig resolve(const CommonOptions& opts) {
  ExperimentConfig cfg = load_config(opts.config_path, opts.overrides);
  if (!opts.out.empty()) {
    cfg.out_dir = opts.out;
  } else if (cfg.out_dir.empty()) {
    const char* env = std::getenv("DREAMLAND_OUT");
    cfg.out_dir = env != nullptr && *env != '\0' ? env : "runs";
  }
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const std::size_t dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(item));
      } else {
        const std::uint64_t lo = std::stoull(item.substr(0, dash));
        const std::uint64_t hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) {
          throw ConfigError("seed range '" + item + "' is descending");
        }
        for (std::uint64_t s = lo; s <= hi; ++s) {
          seeds.push_back(s);
        }
      }
    } catch (const std::logic_error&) {
      throw ConfigError("cannot parse seed list '" + text + "' (e.g. 0,1,2 or 0-9)");
    }
  }
  if (seeds.empty()) {
    throw ConfigError("empty seed list");
  }
  return seeds;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dream-environment world models with dropout mask randomization"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string controller_path;
  std::vector<std::string> axes;
  std::string seeds_text = "0";
  std::string results_path;
  std::string report_path;

  auto* collect = app.add_subcommand("collect", "Collect train/test trajectory datasets");
  auto* train_dyn = app.add_subcommand("train-dynamics", "Train the world model(s)");
  auto* train_ctrl =
      app.add_subcommand("train-controller", "Train the controller with CMA-ES in dream envs");
  auto* eval_real = app.add_subcommand("eval-real", "Evaluate the controller on the real env");
  auto* ablate = app.add_subcommand("ablate", "Run the full pipeline over a parameter sweep");
  auto* report = app.add_subcommand("report", "Summarize an ablation results CSV as mean ± std");
  for (CLI::App* cmd : {collect, train_dyn, train_ctrl, eval_real, ablate}) {
    add_common(cmd, opts);
  }
  eval_real->add_option("--controller", controller_path, "Controller checkpoint")
      ->check(CLI::ExistingFile);
  ablate->add_option("-a,--axis", axes, "Sweep axis: section.key=v1,v2,...")->take_all();
  ablate->add_option("--seeds", seeds_text, "Seeds: 0,1,2 or 0-9")->capture_default_str();
  report->add_option("results", results_path, "results.csv written by ablate")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("-o,--output", report_path, "Write the report here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (report->parsed()) {
      std::ifstream in(results_path);
      if (report_path.empty()) {
        write_report(in, std::cout);
      } else {
        std::ostringstream text;
        write_report(in, text);
        write_file(report_path, text.str());
      }
      return 0;
    }

    const ExperimentConfig cfg = resolve(opts);
    const RunPaths paths{cfg.out_dir};
    if (collect->parsed()) {
      stage_collect(cfg, paths);
      std::cout << "wrote " << paths.train_data().string() << " (" << cfg.train_trajectories
                << " trajectories) and " << paths.test_data().string() << " ("
                << cfg.test_trajectories << ")\n";
    } else if (train_dyn->parsed()) {
      stage_train_dynamics(cfg, paths);
      for (std::size_t m = 0; m < cfg.ensemble_size; ++m) {
        std::cout << "wrote " << paths.model(m).string() << " and " << paths.loss_csv(m).string()
                  << '\n';
      }
    } else if (train_ctrl->parsed()) {
      stage_train_controller(cfg, paths);
      std::cout << "wrote " << paths.leaderboard().string() << " and "
                << paths.controller().string() << '\n';
    } else if (eval_real->parsed()) {
      const RealEvaluation eval = stage_eval_real(cfg, paths, controller_path);
      char line[128];
      std::snprintf(line, sizeof line, "%s: %.2f ± %.2f over %zu episodes", cfg.env.c_str(),
                    eval.mean, eval.std, eval.returns.size());
      std::cout << line << '\n';
    } else if (ablate->parsed()) {
      std::vector<SweepAxis> sweep;
      for (const std::string& a : axes) {
        sweep.push_back(parse_axis(a));
      }
      const std::vector<AblationRow> rows =
          run_ablation(cfg, sweep, parse_seeds(seeds_text), cfg.out_dir);
      std::cout << "wrote " << (fs::path(cfg.out_dir) / "results.csv").string() << " ("
                << rows.size() << " rows)\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "dreamland: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "dreamland: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
