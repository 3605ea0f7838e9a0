#include "dreamland/config.hpp"

#include <gtest/gtest.h>

namespace dreamland {
namespace {

TEST(Config, DefaultsRoundTripThroughYaml) {
  const ExperimentConfig cfg;
  const ExperimentConfig back = parse_config(cfg.to_yaml());
  EXPECT_EQ(back.to_flat(), cfg.to_flat());
  EXPECT_EQ(back.hash(), cfg.hash());
}

TEST(Config, FileValuesAndOverridesApplyInOrder) {
  const std::string yaml = R"(
seed: 4
env:
  name: dodge
  params:
    hazards: 3
train:
  p_train: 0.2
dream:
  policy: episode
)";
  const ExperimentConfig cfg =
      parse_config(yaml, {"train.p_train=0.05", "dream.p_infer=0.3", "train.p_train=0.07"});
  EXPECT_EQ(cfg.seed, 4u);
  EXPECT_EQ(cfg.env, "dodge");
  EXPECT_EQ(cfg.env_params["hazards"], 3);
  EXPECT_EQ(cfg.train.p_train, 0.07);
  EXPECT_EQ(cfg.dream.p_train, 0.07);
  EXPECT_EQ(cfg.dream.p_infer, 0.3);
  EXPECT_EQ(cfg.dream.policy, RandomizationPolicy::kEpisode);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("train:\n  learning_rat: 0.1\n"), ConfigError);
  EXPECT_THROW(parse_config("", {"dream.nope=1"}), ConfigError);
  EXPECT_THROW(parse_config("", {"dream.p_infer=abc"}), ConfigError);
  EXPECT_THROW(parse_config("", {"cma.population=-3"}), ConfigError);
  EXPECT_THROW(parse_config("", {"dream.policy=sometimes"}), ConfigError);
  EXPECT_THROW(parse_config("", {"no_equals_sign"}), ConfigError);
  EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
  EXPECT_THROW(parse_config("train: {p_train: [1]}"), ConfigError);
}

TEST(Config, ValidationRejectsOutOfRangeValues) {
  EXPECT_THROW(parse_config("", {"train.p_train=1"}), ConfigError);
  EXPECT_THROW(parse_config("", {"dream.p_infer=1.5"}), ConfigError);
  EXPECT_THROW(parse_config("", {"data.mix_expert_prob=2"}), ConfigError);
  EXPECT_THROW(parse_config("", {"dream.mc_samples=4", "dream.noise_sigma=1"}), ConfigError);
}

TEST(Config, HashIgnoresSeedOutputAndThreads) {
  const ExperimentConfig a = parse_config("");
  EXPECT_EQ(a.hash().size(), 16u);
  EXPECT_EQ(parse_config("", {"seed=9", "out_dir=/tmp/x", "cma.threads=4"}).hash(), a.hash());
  EXPECT_NE(parse_config("", {"dream.p_infer=0.2"}).hash(), a.hash());
  EXPECT_NE(parse_config("", {"env.params.tiles=10"}).hash(), a.hash());
}

TEST(Config, CanonicalNumbers) {
  const auto a = parse_config("", {"dream.p_infer=0.10"}).to_flat();
  const auto b = parse_config("", {"dream.p_infer=1e-1"}).to_flat();
  EXPECT_EQ(a.at("dream.p_infer"), "0.1");
  EXPECT_EQ(a, b);
}

TEST(Config, FlatKeysCoverEverySection) {
  const auto flat = ExperimentConfig{}.to_flat();
  for (const char* key : {"seed", "env.name", "data.train_trajectories", "train.p_train",
                          "train.ensemble_size", "dream.policy", "dream.scaling", "cma.population",
                          "cma.features", "eval.real_episodes"}) {
    EXPECT_TRUE(flat.contains(key)) << key;
  }
}

TEST(Config, MissingFileIsReported) {
  EXPECT_THROW(load_config("/nonexistent/dreamland.yaml"), ConfigError);
  EXPECT_EQ(load_config("").hash(), ExperimentConfig{}.hash());
}

}  // namespace
}  // namespace dreamland
