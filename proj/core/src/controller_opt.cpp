#include "dreamland/controller_opt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "dreamland/cma_es.hpp"

namespace dreamland {
namespace {

enum Stream : std::uint64_t { kPopulationStream = 0, kLeaderStream = 1, kSearchStream = 2 };

std::size_t worker_count(std::size_t requested, std::size_t jobs) {
  std::size_t n = requested;
  if (n == 0) {
    n = std::max(1u, std::thread::hardware_concurrency());
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

struct EpisodeJob {
  const ControllerParams* ctrl;
  std::uint64_t seed;
};

struct BatchResult {
  std::vector<double> returns;
  std::uint64_t masks = 0;
  std::uint64_t steps = 0;
};

// Runs the jobs on up to `threads` workers, one environment per worker;
// returns are stored by job index so scheduling never affects the result.
BatchResult run_batch(const DreamEnvFactory& make_env, const std::vector<EpisodeJob>& jobs,
                      std::size_t threads) {
  BatchResult out;
  out.returns.assign(jobs.size(), 0.0);
  std::atomic<std::size_t> next{0};
  std::atomic<std::uint64_t> masks{0};
  std::atomic<std::uint64_t> steps{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    try {
      std::unique_ptr<DreamEnv> env = make_env();
      const std::uint64_t masks_before = env->masks_sampled();
      std::uint64_t local_steps = 0;
      for (std::size_t j = next++; j < jobs.size(); j = next++) {
        Rng rng(jobs[j].seed);
        const EpisodeOutcome o = run_dream_episode(*env, *jobs[j].ctrl, rng);
        out.returns[j] = o.total_reward;
        local_steps += o.steps;
      }
      masks += env->masks_sampled() - masks_before;
      steps += local_steps;
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) {
        failure = std::current_exception();
      }
      next = jobs.size();
    }
  };

  const std::size_t n = worker_count(threads, jobs.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      pool.emplace_back(worker);
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  out.masks = masks;
  out.steps = steps;
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) {
    mean += x;
  }
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) {
    ss += (x - mean) * (x - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(v.size()))};
}

}  // namespace

void CmaConfig::validate() const {
  if (population < 4) {
    throw std::invalid_argument("CmaConfig: population must be at least 4");
  }
  if (trials == 0 || generations == 0 || eval_cadence == 0) {
    throw std::invalid_argument("CmaConfig: trials, generations and eval_cadence must be positive");
  }
  if (!(initial_sigma > 0.0) || !std::isfinite(initial_sigma)) {
    throw std::invalid_argument("CmaConfig: initial_sigma must be positive");
  }
}

nlohmann::json CmaConfig::to_json() const {
  return {{"population", population}, {"trials", trials},
          {"generations", generations}, {"eval_cadence", eval_cadence},
          {"initial_sigma", initial_sigma}, {"seed", seed}};
}

const LeaderEntry& LeaderBoard::best() const {
  if (entries.empty()) {
    throw std::logic_error("LeaderBoard::best on an empty board");
  }
  const LeaderEntry* best = &entries.front();
  for (const LeaderEntry& e : entries) {
    if (e.dream_mean > best->dream_mean) {
      best = &e;
    }
  }
  return *best;
}

void LeaderBoard::write_csv(std::ostream& out) const {
  const auto old_precision = out.precision(17);
  out << "generation,dream_mean,dream_std\n";
  for (const LeaderEntry& e : entries) {
    out << e.generation << ',' << e.dream_mean << ',' << e.dream_std << '\n';
  }
  out.precision(old_precision);
}

EpisodeOutcome run_dream_episode(DreamEnv& env, const ControllerParams& ctrl, Rng& rng) {
  DreamObservation obs = env.reset(rng);
  EpisodeOutcome out;
  Vector z = std::move(obs.z);
  Vector h = std::move(obs.h);
  Vector c = std::move(obs.c);
  while (true) {
    const Vector a = act(ctrl, z, h, c);
    DreamStep s = env.step(a);
    out.total_reward += s.reward;
    ++out.steps;
    if (s.done) {
      break;
    }
    z = std::move(s.z);
    h = std::move(s.h);
    c = std::move(s.c);
  }
  return out;
}

OptimizeResult cma_optimize(const DreamEnvFactory& make_env, const ControllerParams& shape,
                            const CmaConfig& cfg) {
  cfg.validate();
  shape.validate();
  const auto dim = static_cast<Eigen::Index>(shape.parameter_count());
  CmaEs es(Vector::Zero(dim), cfg.initial_sigma, cfg.population,
           Rng::derive_seed(cfg.seed, {kSearchStream}));
  OptimizeResult result;
  result.best = shape;

  for (std::size_t g = 0; g < cfg.generations; ++g) {
    const std::vector<Vector> candidates = es.ask();
    std::vector<ControllerParams> members(cfg.population, shape);
    std::vector<EpisodeJob> jobs;
    jobs.reserve(cfg.population * cfg.trials);
    for (std::size_t m = 0; m < cfg.population; ++m) {
      members[m].assign(candidates[m]);
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        jobs.push_back({&members[m], Rng::derive_seed(cfg.seed, {kPopulationStream, g, m, t})});
      }
    }
    const BatchResult batch = run_batch(make_env, jobs, cfg.threads);

    std::vector<double> fitness(cfg.population, 0.0);
    for (std::size_t m = 0; m < cfg.population; ++m) {
      for (std::size_t t = 0; t < cfg.trials; ++t) {
        fitness[m] += batch.returns[m * cfg.trials + t];
      }
      fitness[m] /= static_cast<double>(cfg.trials);
    }
    std::size_t best = cfg.population;
    double fitness_sum = 0.0;
    std::size_t finite = 0;
    for (std::size_t m = 0; m < cfg.population; ++m) {
      if (!std::isfinite(fitness[m])) {
        continue;
      }
      fitness_sum += fitness[m];
      ++finite;
      if (best == cfg.population || fitness[m] > fitness[best]) {
        best = m;
      }
    }
    es.tell(candidates, fitness);

    GenerationStats stats;
    stats.generation = g + 1;
    stats.best_fitness =
        best < cfg.population ? fitness[best] : std::numeric_limits<double>::quiet_NaN();
    stats.mean_fitness = finite > 0 ? fitness_sum / static_cast<double>(finite)
                                    : std::numeric_limits<double>::quiet_NaN();
    stats.sigma = es.sigma();
    stats.masks_sampled = batch.masks;
    stats.episodes = jobs.size();
    stats.dream_steps = batch.steps;
    stats.flagged = es.flagged().size();
    result.history.push_back(stats);

    const bool log_now = (g + 1) % cfg.eval_cadence == 0 || g + 1 == cfg.generations;
    if (log_now && best < cfg.population) {
      std::vector<EpisodeJob> eval_jobs;
      const std::size_t n_eval = cfg.population * cfg.trials;
      eval_jobs.reserve(n_eval);
      for (std::size_t e = 0; e < n_eval; ++e) {
        eval_jobs.push_back({&members[best], Rng::derive_seed(cfg.seed, {kLeaderStream, g, e})});
      }
      const BatchResult eval = run_batch(make_env, eval_jobs, cfg.threads);
      const auto [mean, sd] = mean_std(eval.returns);
      result.board.entries.push_back({g + 1, members[best], mean, sd});
    }
  }
  if (!result.board.entries.empty()) {
    result.best = result.board.best().controller;
  }
  return result;
}

RealEvaluation evaluate_real(const ControllerParams& ctrl, const WorldModelParams& model,
                             const Environment& env, std::size_t n_episodes, std::uint64_t seed) {
  ctrl.validate();
  const WorldModelShape& shape = model.shape;
  if (ctrl.latent_size != shape.latent_size || ctrl.hidden_size != shape.hidden_size ||
      ctrl.action_size() != shape.action_size) {
    throw DimensionError("evaluate_real: controller (n=" + std::to_string(ctrl.latent_size) +
                         ", d=" + std::to_string(ctrl.hidden_size) +
                         ", a=" + std::to_string(ctrl.action_size()) +
                         ") does not match the world model (n=" +
                         std::to_string(shape.latent_size) + ", d=" +
                         std::to_string(shape.hidden_size) + ", a=" +
                         std::to_string(shape.action_size) + ")");
  }
  if (env.state_size() != shape.latent_size || env.action_size() != shape.action_size) {
    throw DimensionError("evaluate_real: environment '" + env.name() +
                         "' does not match the world model dimensions");
  }
  const MaskMultipliers ones = mask_multipliers(
      MaskSet::all_ones(shape.input_size(), shape.hidden_size, model.action_dims()), 0.0);

  RealEvaluation out;
  out.returns.reserve(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    Rng rng = Rng::derive(seed, {e});
    std::unique_ptr<Environment> real = env.clone();
    Vector z = real->reset(rng);
    LstmState state = LstmState::zeros(shape.hidden_size);
    double total = 0.0;
    Vector x(static_cast<Eigen::Index>(shape.input_size()));
    while (true) {
      const Vector a = act(ctrl, z, state.h, state.c);
      EnvStep s = real->step(a, rng);
      total += s.reward;
      if (s.done) {
        break;
      }
      x << z, a;
      state = lstm_step(model.lstm, state, x, ones);
      z = std::move(s.state);
    }
    out.returns.push_back(total);
  }
  if (!out.returns.empty()) {
    std::tie(out.mean, out.std) = mean_std(out.returns);
  }
  return out;
}

}  // namespace dreamland
