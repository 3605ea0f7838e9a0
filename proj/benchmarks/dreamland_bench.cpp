#include <benchmark/benchmark.h>

#include <vector>

#include "dreamland/dream_env.hpp"
#include "dreamland/dropout_lstm.hpp"
#include "dreamland/world_model.hpp"

namespace dl = dreamland;

namespace {

dl::WorldModelShape shape_for(std::int64_t hidden) {
  return {4, 3, static_cast<std::size_t>(hidden), 2};
}

dl::Sequence make_sequence(const dl::WorldModelShape& shape, std::size_t length, dl::Rng& rng) {
  dl::Sequence seq;
  for (std::size_t t = 0; t < length; ++t) {
    dl::Vector x(static_cast<Eigen::Index>(shape.input_size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.normal();
    seq.inputs.push_back(x);
    const bool last = t + 1 == length;
    dl::Vector z;
    if (!last) {
      z.resize(static_cast<Eigen::Index>(shape.latent_size));
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    }
    seq.next_latent.push_back(z);
    seq.rewards.push_back(rng.normal());
    seq.dones.push_back(last ? 1 : 0);
  }
  return seq;
}

void BM_LstmStep(benchmark::State& state) {
  const auto shape = shape_for(state.range(0));
  dl::Rng rng(1);
  const auto params = dl::WorldModelParams::initialized(shape, rng);
  const auto mask = dl::sample_mask_set(0.1, shape.input_size(), shape.hidden_size,
                                        params.action_dims(), rng);
  const auto mult = dl::mask_multipliers(mask, 0.1);
  dl::LstmState s = dl::LstmState::zeros(shape.hidden_size);
  const dl::Vector x = dl::Vector::Constant(static_cast<Eigen::Index>(shape.input_size()), 0.3);
  for (auto _ : state) {
    s = dl::lstm_step(params.lstm, s, x, mult);
    benchmark::DoNotOptimize(s.h.data());
  }
}
BENCHMARK(BM_LstmStep)->Arg(32)->Arg(64)->Arg(256);

void BM_SequenceLossGradient(benchmark::State& state) {
  const auto shape = shape_for(state.range(0));
  dl::Rng rng(2);
  const auto params = dl::WorldModelParams::initialized(shape, rng);
  const auto seq = make_sequence(shape, 20, rng);
  const std::vector<dl::MaskSet> masks{dl::sample_mask_set(
      0.05, shape.input_size(), shape.hidden_size, params.action_dims(), rng)};
  dl::WorldModelParams grad;
  for (auto _ : state) {
    const auto loss = dl::sequence_loss(params, seq, masks, 0.05, {}, &grad);
    benchmark::DoNotOptimize(loss.total);
  }
  state.SetItemsProcessed(state.iterations() * 20);
}
BENCHMARK(BM_SequenceLossGradient)->Arg(32)->Arg(64);

void BM_DreamStep(benchmark::State& state) {
  const auto shape = shape_for(32);
  dl::Rng rng(3);
  auto params = dl::WorldModelParams::initialized(shape, rng);
  params.done_bias[0] = -50.0;  // never terminates
  const std::vector<dl::Vector> starts{dl::Vector::Zero(4)};
  dl::DreamConfig cfg;
  cfg.policy = static_cast<dl::RandomizationPolicy>(state.range(0));
  cfg.mc_samples = static_cast<std::size_t>(state.range(1));
  cfg.max_episode_steps = 1u << 30;
  dl::DreamEnv env({&params}, cfg, &starts);
  env.reset(rng);
  const dl::Vector action = dl::Vector::Constant(2, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(env.step(action).reward);
  }
}
BENCHMARK(BM_DreamStep)
    ->ArgNames({"policy", "mc"})
    ->Args({static_cast<int>(dl::RandomizationPolicy::kOff), 0})
    ->Args({static_cast<int>(dl::RandomizationPolicy::kEpisode), 0})
    ->Args({static_cast<int>(dl::RandomizationPolicy::kStep), 0})
    ->Args({static_cast<int>(dl::RandomizationPolicy::kStep), 4});

}  // namespace

BENCHMARK_MAIN();
