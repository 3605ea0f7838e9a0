#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dreamland/numerics.hpp"
#include "dreamland/rng.hpp"

namespace dreamland {

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation and rank-one
// plus rank-mu covariance updates, using the default strategy constants.
// Fitness is maximized.
class CmaEs {
 public:
  CmaEs(Vector initial_mean, double initial_sigma, std::size_t population, std::uint64_t seed);

  // Candidates for the current generation; generation g always draws from
  // Rng::derive(seed, {g}).
  std::vector<Vector> ask();
  /// Updates the search distribution from the fitness of the candidates
  /// returned by the last ask(). Only the ranking is used; non-finite fitness
  /// values rank last and are reported by flagged(). Throws NumericError if
  /// the covariance loses positive definiteness.
  void tell(std::span<const Vector> candidates, std::span<const double> fitness);

  std::size_t dimension() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t population() const { return lambda_; }
  std::size_t parents() const { return mu_; }
  std::size_t generation() const { return generation_; }
  std::size_t evaluations() const { return generation_ * lambda_; }
  const Vector& mean() const { return mean_; }
  double sigma() const { return sigma_; }
  const Matrix& covariance() const { return cov_; }
  const Vector& weights() const { return weights_; }
  double mu_eff() const { return mueff_; }
  const std::vector<std::size_t>& flagged() const { return flagged_; }

 private:
  void decompose();

  Vector mean_;
  double sigma_;
  std::size_t lambda_;
  std::size_t mu_;
  std::uint64_t seed_;
  Vector weights_;
  double mueff_, cc_, cs_, c1_, cmu_, damps_, chi_n_;
  Vector pc_, ps_;
  Matrix cov_, basis_;
  Vector scales_;  // square roots of the eigenvalues of cov_
  std::size_t generation_ = 0;
  std::vector<std::size_t> flagged_;
};

// 4 + floor(3 ln n)
std::size_t default_population(std::size_t dimension);

}  // namespace dreamland
