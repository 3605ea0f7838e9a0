#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dreamland {

// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distribution transforms are written
// out here because the std:: distributions are implementation-defined.
//
// Streams are derived, not shared: Rng::derive(seed, {generation, member,
// trial}) yields the same stream on every run and platform regardless of
// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
  static std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

  // Child stream keyed by `stream`; does not advance this generator.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller; the spare variate is cached.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  // Uniform integer in [0, n). Requires n > 0.
  std::uint64_t index(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dreamland
