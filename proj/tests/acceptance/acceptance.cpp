// Acceptance suite: one PASS/FAIL line per criterion on stdout, per-seed
// detail on stderr. Exit status is non-zero if any criterion fails.
//
//   acceptance            run every criterion
//   acceptance 1 4 9      run a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dreamland/checkpoint.hpp"
#include "dreamland/cma_es.hpp"
#include "dreamland/config.hpp"
#include "dreamland/controller_opt.hpp"
#include "dreamland/dataset.hpp"
#include "dreamland/dream_env.hpp"
#include "dreamland/experiment.hpp"
#include "dreamland/model_trainer.hpp"
#include "test_support.hpp"

namespace dl = dreamland;
using dl::Vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void log(const std::string& line) {
  std::fprintf(stderr, "    %s\n", line.c_str());
  std::fflush(stderr);
}

// ------------------------------------------------------------------ 1

// Central differences on a loss of magnitude ~40 with eps 1e-5 resolve a
// coordinate only to ~1e-9 absolute, so the relative error uses a 1e-5 floor.
constexpr double kGradientFloor = 1e-5;

Outcome gradient_correctness() {
  const dl::WorldModelShape shape{4, 3, 8, 2};
  const double rates[] = {0.0, 0.05, 0.5};
  dl::Rng rng(101);
  double worst = 0.0;
  double worst_large = 0.0;
  std::size_t coordinates = 0;
  std::size_t below_floor = 0;
  for (int i = 0; i < 100; ++i) {
    const double p = rates[i % 3];
    const dl::WorldModelParams params = dl::testing::random_model(shape, rng);
    const dl::Sequence seq = dl::testing::random_sequence(shape, 5, rng);
    const dl::MaskSet mask = dl::sample_mask_set(p, shape.input_size(), shape.hidden_size,
                                                 params.action_dims(), rng);
    const dl::LossWeights weights{rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
    const auto check =
        dl::testing::check_sequence_gradient(params, seq, mask, weights, kGradientFloor);
    worst = std::max(worst, check.max_relative_error);
    coordinates += check.coordinates;
    for (std::size_t j = 0; j < check.analytic_all.size(); ++j) {
      const double a = check.analytic_all[j];
      const double n = check.numeric_all[j];
      if (std::max(std::abs(a), std::abs(n)) < kGradientFloor) {
        ++below_floor;
      } else {
        worst_large = std::max(worst_large, dl::relative_error(a, n, 0.0));
      }
    }
  }
  return {worst < 1e-4,
          fmt("max relative error %.2e (floor 1e-5) over 100 instances, %zu coordinates; "
              "%.2e on the %zu coordinates above the floor",
              worst, coordinates, worst_large, coordinates - below_floor)};
}

// ------------------------------------------------------------------ 2

dl::Dataset small_track_dataset(std::uint64_t seed, std::size_t count) {
  dl::Dataset ds = dl::collect_trajectories(dl::TrackWorld(), count, 0.9, seed);
  return ds;
}

Outcome dropout_semantics() {
  // (a) one mask id per training sequence, varying across sequences.
  dl::TrainConfig tc;
  tc.p_train = 0.05;
  tc.epochs = 2;
  tc.seed = 7;
  std::map<std::pair<std::size_t, std::size_t>, std::set<std::uint64_t>> ids;
  std::set<std::uint64_t> distinct;
  dl::TrainObserver obs;
  obs.on_mask = [&](std::size_t epoch, std::size_t seq, std::size_t, std::uint64_t id) {
    ids[{epoch, seq}].insert(id);
    distinct.insert(id);
  };
  dl::train_dynamics(small_track_dataset(3, 20), tc, obs);
  std::size_t violations = 0;
  for (const auto& [key, set] : ids) {
    violations += set.size() != 1 ? 1 : 0;
  }
  const bool constancy = !ids.empty() && violations == 0 && distinct.size() > ids.size() / 2;

  // (b) mean inverted-dropout pre-activation matches the unmasked one.
  const std::size_t in = 6;
  const std::size_t hid = 32;
  const std::vector<std::size_t> actions{4, 5};
  dl::Rng rng(11);
  dl::LstmWeights w = dl::LstmWeights::zeros(hid, in);
  dl::LstmWeights::visit(w, [&](const auto&, double* data, Eigen::Index r, Eigen::Index c) {
    for (Eigen::Index i = 0; i < r * c; ++i) {
      data[i] = rng.uniform(0.1, 1.0);
    }
  });
  Vector x(static_cast<Eigen::Index>(in));
  Vector h(static_cast<Eigen::Index>(hid));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.1, 1.0);
  for (Eigen::Index i = 0; i < h.size(); ++i) h[i] = rng.uniform(0.1, 1.0);
  const double p = 0.3;
  const int draws = 100000;
  std::array<Vector, dl::kGates> mean;
  std::array<Vector, dl::kGates> ref;
  for (std::size_t g = 0; g < dl::kGates; ++g) {
    mean[g] = Vector::Zero(static_cast<Eigen::Index>(hid));
    ref[g] = w.input[g] * x + w.hidden[g] * h + w.bias[g];
  }
  for (int d = 0; d < draws; ++d) {
    const dl::MaskSet m = dl::sample_mask_set(p, in, hid, actions, rng);
    const dl::MaskMultipliers mult = dl::mask_multipliers(m, p);
    for (std::size_t g = 0; g < dl::kGates; ++g) {
      mean[g] += w.input[g] * x.cwiseProduct(mult.input[g]) +
                 w.hidden[g] * h.cwiseProduct(mult.hidden[g]) + w.bias[g];
    }
  }
  double worst_scaling = 0.0;
  for (std::size_t g = 0; g < dl::kGates; ++g) {
    mean[g] /= draws;
    const Vector rel = (mean[g] - ref[g]).cwiseAbs().cwiseQuotient(ref[g].cwiseAbs());
    worst_scaling = std::max(worst_scaling, rel.maxCoeff());
  }
  const bool scaling = worst_scaling <= 0.02;

  // (c) action inputs are never masked.
  std::size_t dropped = 0;
  for (int d = 0; d < draws; ++d) {
    const dl::MaskSet m = dl::sample_mask_set(0.9, in, hid, actions, rng);
    for (std::size_t g = 0; g < dl::kGates; ++g) {
      for (std::size_t a : actions) {
        dropped += m.input[g][static_cast<Eigen::Index>(a)] != 1.0 ? 1 : 0;
      }
    }
  }
  const bool action_pinned = dropped == 0;
  return {constancy && scaling && action_pinned,
          fmt("(a) %zu sequences, %zu with >1 mask id; (b) max rel deviation %.3f%% at p=0.3; "
              "(c) %zu dropped action entries in 1e5 draws at p=0.9",
              ids.size(), violations, 100.0 * worst_scaling, dropped)};
}

// ------------------------------------------------------------------ 3

Outcome mdn_validity() {
  dl::Rng rng(21);
  const dl::WorldModelShape shape{4, 3, 8, 2};
  double worst_row = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const dl::WorldModelParams params = dl::testing::random_model(shape, rng, 1.0);
    Vector h(8);
    for (Eigen::Index j = 0; j < 8; ++j) h[j] = rng.normal();
    const dl::Prediction p = dl::heads_forward(params, h);
    for (Eigen::Index r = 0; r < p.mdn.pi.rows(); ++r) {
      worst_row = std::max(worst_row, std::abs(p.mdn.pi.row(r).sum() - 1.0));
    }
  }

  dl::Prediction pred;
  pred.mdn.pi = dl::Matrix(1, 2);
  pred.mdn.pi << 0.3, 0.7;
  pred.mdn.mu = dl::Matrix(1, 2);
  pred.mdn.mu << -100.0, 100.0;
  pred.mdn.sigma = dl::Matrix::Constant(1, 2, 1e-6);
  const int draws = 100000;
  int first = 0;
  for (int i = 0; i < draws; ++i) {
    first += dl::sample_transition(pred, rng).latent[0] < 0.0 ? 1 : 0;
  }
  const double e0 = 0.3 * draws;
  const double e1 = 0.7 * draws;
  const double chi2 =
      (first - e0) * (first - e0) / e0 + (draws - first - e1) * (draws - first - e1) / e1;
  const double critical = 6.634897;  // chi-square, 1 dof, 99%

  const std::size_t n = 6;
  dl::MdnOutput trivial;
  trivial.pi = dl::Matrix::Ones(n, 1);
  trivial.sigma = dl::Matrix::Ones(n, 1);
  trivial.mu = dl::Matrix(n, 1);
  Vector z(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    z[i] = rng.normal();
    trivial.mu(i, 0) = z[i];
  }
  const double trivial_err = std::abs(dl::mdn_loss(trivial, z) - n * 0.91893853320467274178);

  return {worst_row <= 1e-6 && chi2 < critical && trivial_err <= 1e-9,
          fmt("max |sum pi - 1| %.1e; chi2 %.3f < %.3f; |L - n*0.918939| %.1e", worst_row, chi2,
              critical, trivial_err)};
}

// ------------------------------------------------------------------ 4

Outcome mc_dropout_identity() {
  dl::Rng rng(31);
  const dl::WorldModelShape shape{4, 3, 32, 2};
  dl::WorldModelParams model = dl::testing::random_model(shape, rng, 0.3);
  model.done_bias[0] = -3.0;
  const std::vector<Vector> starts{Vector::LinSpaced(4, -1.0, 1.0)};

  auto rollouts = [&](std::size_t mc, double p) {
    dl::DreamConfig cfg;
    cfg.p_infer = p;
    cfg.mc_samples = mc;
    cfg.max_episode_steps = 200;
    dl::DreamEnv env({&model}, cfg, &starts);
    std::vector<double> trace;
    dl::Rng r(32);
    Vector a(2);
    a << 0.4, -0.3;
    for (int e = 0; e < 20; ++e) {
      env.reset(r);
      while (!env.done()) {
        const dl::DreamStep s = env.step(a);
        trace.insert(trace.end(), s.z.data(), s.z.data() + s.z.size());
        trace.insert(trace.end(), s.h.data(), s.h.data() + s.h.size());
        trace.insert(trace.end(), s.c.data(), s.c.data() + s.c.size());
        trace.push_back(s.reward);
        trace.push_back(s.done_prob);
        trace.push_back(s.done ? 1.0 : 0.0);
      }
    }
    return trace;
  };
  const std::vector<double> plain = rollouts(0, 0.0);
  bool identical = true;
  for (std::size_t k : {1u, 4u, 10u, 16u}) {
    identical = identical && rollouts(k, 0.0) == plain;
  }

  // Variance of the averaged d-hat from a fixed state, over fresh masks.
  dl::WorldModelParams varied = model;
  for (Eigen::Index i = 0; i < varied.done_weight.size(); ++i) {
    varied.done_weight[i] = rng.normal(0.0, 1.0);
  }
  varied.done_bias[0] = 0.0;
  std::vector<double> variance;
  for (std::size_t k : {1u, 4u, 16u}) {
    dl::DreamConfig cfg;
    cfg.p_infer = 0.1;
    cfg.mc_samples = k;
    dl::DreamEnv env({&varied}, cfg, &starts);
    dl::Rng r(33);
    const int n = 20000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
      env.reset(r);
      const double d = env.step(Vector::Zero(2)).done_prob;
      sum += d;
      sq += d * d;
    }
    const double mean = sum / n;
    variance.push_back((sq / n - mean * mean) * n / (n - 1));
  }
  const double r14 = variance[0] / variance[1] / 4.0;
  const double r416 = variance[1] / variance[2] / 4.0;
  const auto within = [](double r) { return r >= 1.0 / 1.5 && r <= 1.5; };
  return {identical && within(r14) && within(r416),
          fmt("p_infer=0 bit-identical for K in {1,4,10,16}: %s; var ratio / expected: "
              "K1:K4 %.3f, K4:K16 %.3f",
              identical ? "yes" : "no", r14, r416)};
}

// ------------------------------------------------------------------ 5

Outcome environment_count() {
  dl::Rng rng(41);
  const dl::WorldModelShape shape{4, 3, 32, 2};
  dl::WorldModelParams model = dl::testing::random_model(shape, rng, 0.2);
  model.done_weight.setZero();
  model.done_bias[0] = -7.0;  // many episodes run to the step limit
  const std::vector<Vector> starts{Vector::Zero(4)};
  const dl::ControllerParams ctrl = dl::ControllerParams::zeros(2, 4, 32, dl::FeatureSpec::kZH);
  dl::CmaConfig cma;
  cma.population = 64;
  cma.trials = 16;
  cma.generations = 1;
  cma.eval_cadence = 1;
  cma.seed = 42;

  std::map<dl::RandomizationPolicy, dl::GenerationStats> stats;
  for (auto policy : {dl::RandomizationPolicy::kStep, dl::RandomizationPolicy::kEpisode}) {
    dl::DreamConfig cfg;
    cfg.p_infer = 0.1;
    cfg.policy = policy;
    cfg.max_episode_steps = 1000;
    const dl::DreamEnvFactory factory = [&] {
      return std::make_unique<dl::DreamEnv>(std::vector<const dl::WorldModelParams*>{&model}, cfg,
                                            &starts);
    };
    stats[policy] = dl::cma_optimize(factory, ctrl, cma).history.at(0);
  }
  const auto& step = stats[dl::RandomizationPolicy::kStep];
  const auto& episode = stats[dl::RandomizationPolicy::kEpisode];
  const bool ok = step.masks_sampled <= 1024000 && step.masks_sampled == step.dream_steps &&
                  step.episodes == 1024 && episode.masks_sampled == 1024 &&
                  episode.episodes == 1024;
  return {ok, fmt("Step: %llu MaskSets over %llu steps (bound 1024000); Episode: %llu MaskSets "
                  "over %llu episodes",
                  static_cast<unsigned long long>(step.masks_sampled),
                  static_cast<unsigned long long>(step.dream_steps),
                  static_cast<unsigned long long>(episode.masks_sampled),
                  static_cast<unsigned long long>(episode.episodes))};
}

// ------------------------------------------------------------------ 6

Outcome cma_sanity() {
  auto run = [](auto f, Vector start, double sigma, std::size_t budget, std::uint64_t seed,
                auto done) {
    dl::CmaEs es(std::move(start), sigma,
                 dl::default_population(static_cast<std::size_t>(start.size())), seed);
    while (es.evaluations() < budget && !done(es)) {
      const auto c = es.ask();
      std::vector<double> fit;
      for (const Vector& v : c) fit.push_back(-f(v));
      es.tell(c, fit);
    }
    return es;
  };
  auto sphere = [](const Vector& x) { return x.squaredNorm(); };
  auto rosen = [](const Vector& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const dl::CmaEs s = run(sphere, Vector::Constant(10, 1.0), 0.5, 5000, 61,
                          [](const dl::CmaEs& e) { return e.mean().norm() < 1e-6; });
  const dl::CmaEs r = run(rosen, Vector::Zero(2), 0.5, 20000, 62,
                          [&](const dl::CmaEs& e) { return rosen(e.mean()) < 1e-8; });

  dl::CmaEs a(Vector::Constant(5, 1.5), 0.6, 10, 63);
  dl::CmaEs b(Vector::Constant(5, 1.5), 0.6, 10, 63);
  bool invariant = true;
  for (int g = 0; g < 50 && invariant; ++g) {
    const auto ca = a.ask();
    const auto cb = b.ask();
    std::vector<double> fa;
    std::vector<double> fb;
    for (std::size_t i = 0; i < ca.size(); ++i) {
      fa.push_back(-sphere(ca[i]));
      fb.push_back(std::atan(-sphere(cb[i])) * 5.0 + 2.0);
    }
    a.tell(ca, fa);
    b.tell(cb, fb);
    invariant = ca == cb && a.mean() == b.mean() && a.sigma() == b.sigma() &&
                a.covariance() == b.covariance();
  }
  const bool ok = s.mean().norm() < 1e-6 && s.evaluations() <= 5000 && rosen(r.mean()) < 1e-8 &&
                  r.evaluations() <= 20000 && invariant;
  return {ok, fmt("sphere |mean| %.1e after %zu evals; rosenbrock f %.1e after %zu evals; "
                  "rank invariance exact: %s",
                  s.mean().norm(), s.evaluations(), rosen(r.mean()), r.evaluations(),
                  invariant ? "yes" : "no")};
}

// ------------------------------------------------------------ shared pipeline

// Desk-scale TrackWorld protocol shared by criteria 7 to 10.
struct SeedModels {
  dl::Dataset dataset;
  dl::TrainResult dropout;     // p_train = 0.05
  dl::TrainResult no_dropout;  // p_train = 0
};

dl::ExperimentConfig protocol(std::uint64_t seed, double p_train) {
  dl::ExperimentConfig cfg;
  cfg.seed = seed;
  cfg.env = "track";
  cfg.train_trajectories = 200;
  cfg.test_trajectories = 50;
  cfg.train.hidden_size = 32;
  cfg.train.mixtures = 3;
  cfg.train.p_train = p_train;
  cfg.cma.population = 16;
  cfg.cma.trials = 4;
  cfg.cma.generations = 200;
  cfg.validate();
  return cfg;
}

class ModelCache {
 public:
  const SeedModels& get(std::uint64_t seed) {
    auto it = cache_.find(seed);
    if (it != cache_.end()) {
      return it->second;
    }
    const auto t0 = std::chrono::steady_clock::now();
    SeedModels m;
    m.dataset = dl::build_dataset(protocol(seed, 0.05));
    m.dropout = dl::train_world_models(protocol(seed, 0.05), m.dataset).at(0);
    m.no_dropout = dl::train_world_models(protocol(seed, 0.0), m.dataset).at(0);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(fmt("seed %llu: trained world models in %.1f s (train loss %.4f with dropout, %.4f "
            "without)",
            static_cast<unsigned long long>(seed), secs,
            m.dropout.report.epochs.back().train_loss,
            m.no_dropout.report.epochs.back().train_loss));
    return cache_.emplace(seed, std::move(m)).first->second;
  }

 private:
  std::map<std::uint64_t, SeedModels> cache_;
};

ModelCache& models() {
  static ModelCache cache;
  return cache;
}

// ------------------------------------------------------------------ 7

Outcome loss_increases_with_p_infer() {
  const SeedModels& m = models().get(0);
  const double sweep[] = {0.0, 0.05, 0.1, 0.2, 0.3};
  std::vector<dl::LossEstimate> est;
  std::string values;
  for (double p : sweep) {
    est.push_back(dl::evaluate_loss(m.dropout.params, m.dataset, p, 8, 77, {}));
    values += fmt("%s%.4f±%.4f", values.empty() ? "" : ", ", est.back().mean,
                  est.back().standard_error);
  }
  int inversions = 0;
  bool within_se = true;
  for (std::size_t i = 0; i + 1 < est.size(); ++i) {
    if (est[i + 1].mean < est[i].mean) {
      ++inversions;
      const double se = std::hypot(est[i].standard_error, est[i + 1].standard_error);
      within_se = within_se && est[i].mean - est[i + 1].mean <= se;
    }
  }
  return {inversions == 0 || (inversions == 1 && within_se),
          fmt("test loss at p_infer {0,0.05,0.1,0.2,0.3}: %s; %d inversion(s)", values.c_str(),
              inversions)};
}

// ------------------------------------------------------------------ 8

constexpr std::uint64_t kSeeds = 10;

Outcome dropout_trains_worse() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const SeedModels& m = models().get(s);
    const double with = m.dropout.report.epochs.back().train_loss;
    const double without = m.no_dropout.report.epochs.back().train_loss;
    wins += with > without ? 1 : 0;
  }
  return {wins >= 8, fmt("train loss higher with p_train=0.05 than p_train=0 in %d/10 seeds", wins)};
}

// ------------------------------------------------------------------ 9, 10

struct Variant {
  const char* name;
  double p_train;
  double p_infer;
  dl::RandomizationPolicy policy;
};

constexpr Variant kDdl{"ddl_step", 0.05, 0.1, dl::RandomizationPolicy::kStep};
constexpr Variant kWm{"wm", 0.0, 0.0, dl::RandomizationPolicy::kOff};
constexpr Variant kEpisode{"ddl_episode", 0.05, 0.1, dl::RandomizationPolicy::kEpisode};
constexpr Variant kStepNoTrain{"step_ptrain0", 0.0, 0.1, dl::RandomizationPolicy::kStep};

class RealReturns {
 public:
  double get(std::uint64_t seed, const Variant& v) {
    const auto key = std::make_pair(seed, std::string(v.name));
    if (auto it = cache_.find(key); it != cache_.end()) {
      return it->second;
    }
    const SeedModels& m = models().get(seed);
    dl::ExperimentConfig cfg = protocol(seed, v.p_train);
    cfg.dream.p_infer = v.p_infer;
    cfg.dream.policy = v.policy;
    const dl::WorldModelParams& model = v.p_train > 0.0 ? m.dropout.params : m.no_dropout.params;
    const auto t0 = std::chrono::steady_clock::now();
    const dl::OptimizeResult opt = dl::train_controller(cfg, {model}, m.dataset);
    const dl::RealEvaluation eval = dl::evaluate_controller(cfg, opt.best, model);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log(fmt("seed %llu %-12s dream %8.2f  real %8.2f ± %6.2f  (%.1f s)",
            static_cast<unsigned long long>(seed), v.name, opt.board.best().dream_mean, eval.mean,
            eval.std, secs));
    return cache_.emplace(key, eval.mean).first->second;
  }

 private:
  std::map<std::pair<std::uint64_t, std::string>, double> cache_;
};

RealReturns& returns() {
  static RealReturns cache;
  return cache;
}

Outcome dream_to_real() {
  int wins = 0;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    wins += returns().get(s, kDdl) >= returns().get(s, kWm) ? 1 : 0;
  }
  return {wins >= 7, fmt("DDL real return >= WM baseline in %d/10 paired seeds", wins)};
}

Outcome step_without_training_dropout_last() {
  int last = 0;
  int strictly_last = 0;
  for (std::uint64_t s = 0; s < kSeeds; ++s) {
    const double collapse = returns().get(s, kStepNoTrain);
    const double others = std::min(returns().get(s, kDdl), returns().get(s, kEpisode));
    last += collapse <= others ? 1 : 0;
    strictly_last += collapse < others ? 1 : 0;
  }
  return {last >= 7, fmt("Step(p_train=0, p_infer=0.1) ranks last in %d/10 paired seeds "
                         "(%d strictly below both others)",
                         last, strictly_last)};
}

// ------------------------------------------------------------------ 11

Outcome round_trips() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dreamland_acceptance_roundtrip";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const SeedModels& m = models().get(0);
  dl::save_dataset(m.dataset, dir / "data.dset");
  const dl::Dataset back = dl::load_dataset(dir / "data.dset");
  const bool dataset_ok = back == m.dataset && dl::encode_dataset(back) == dl::encode_dataset(m.dataset);

  dl::save_checkpoint(dl::world_model_checkpoint(m.dropout.params), dir / "model.ckpt");
  const dl::WorldModelParams loaded =
      dl::world_model_from_checkpoint(dl::load_checkpoint(dir / "model.ckpt"));
  const Vector a = m.dropout.params.flatten();
  const Vector b = loaded.flatten();
  const bool ckpt_ok = a.size() == b.size() &&
                       std::equal(a.data(), a.data() + a.size(), b.data(),
                                  [](double x, double y) {
                                    return std::memcmp(&x, &y, sizeof x) == 0;
                                  });

  // A reduced sweep; every row is regenerated from its recorded config.
  dl::ExperimentConfig base = dl::parse_config(
      "", {"data.train_trajectories=20", "data.test_trajectories=5", "train.epochs=2",
           "cma.generations=4", "cma.eval_cadence=2", "cma.population=6", "cma.trials=2",
           "eval.real_episodes=5", "eval.loss_mask_samples=2", "dream.max_episode_steps=200"});
  const std::vector<dl::SweepAxis> axes{dl::parse_axis("dream.p_infer=0,0.1"),
                                        dl::parse_axis("dream.policy=step,episode")};
  const auto rows = dl::run_ablation(base, axes, {0, 1}, dir / "sweep");
  std::size_t regenerated = 0;
  for (const dl::AblationRow& row : rows) {
    dl::ExperimentConfig cfg =
        dl::load_config(dir / "sweep" / "configs" / (row.summary.config_hash + ".yaml"));
    cfg.seed = row.summary.seed;
    const dl::RunSummary again = dl::run_all_stages(cfg, dl::RunPaths{dir / "regen"});
    regenerated += again.config_hash == row.summary.config_hash &&
                           dl::format_summary_row(again) == dl::format_summary_row(row.summary)
                       ? 1
                       : 0;
  }
  fs::remove_all(dir);
  return {dataset_ok && ckpt_ok && regenerated == rows.size(),
          fmt("dataset bit-exact: %s; checkpoint bit-exact: %s; %zu/%zu report rows regenerated",
              dataset_ok ? "yes" : "no", ckpt_ok ? "yes" : "no", regenerated, rows.size())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", gradient_correctness},
      {2, "dropout semantics", dropout_semantics},
      {3, "MDN validity", mdn_validity},
      {4, "MC-dropout identity", mc_dropout_identity},
      {5, "environment-count accounting", environment_count},
      {6, "CMA-ES sanity", cma_sanity},
      {7, "model loss increases with p_infer", loss_increases_with_p_infer},
      {8, "dropout training loss is higher", dropout_trains_worse},
      {9, "dream-to-real trend", dream_to_real},
      {10, "Step(p_train=0) collapse ranks last", step_without_training_dropout_last},
      {11, "round-trips", round_trips},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    selected.insert(std::stoi(argv[i]));
  }
  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) {
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  %2d  %-38s %s  [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
