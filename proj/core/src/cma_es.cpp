#include "dreamland/cma_es.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace dreamland {

std::size_t default_population(std::size_t dimension) {
  return 4 + static_cast<std::size_t>(std::floor(3.0 * std::log(static_cast<double>(dimension))));
}

CmaEs::CmaEs(Vector initial_mean, double initial_sigma, std::size_t population, std::uint64_t seed)
    : mean_(std::move(initial_mean)), sigma_(initial_sigma), lambda_(population), seed_(seed) {
  const auto n = static_cast<double>(mean_.size());
  if (mean_.size() == 0) {
    throw DimensionError("CmaEs: empty search space");
  }
  if (lambda_ < 4) {
    throw std::invalid_argument("CmaEs: population must be at least 4");
  }
  if (!(sigma_ > 0.0) || !std::isfinite(sigma_) || !mean_.allFinite()) {
    throw std::invalid_argument("CmaEs: initial mean and step size must be finite, sigma > 0");
  }
  mu_ = lambda_ / 2;
  weights_.resize(static_cast<Eigen::Index>(mu_));
  for (std::size_t i = 0; i < mu_; ++i) {
    weights_[static_cast<Eigen::Index>(i)] =
        std::log(static_cast<double>(mu_) + 0.5) - std::log(static_cast<double>(i + 1));
  }
  weights_ /= weights_.sum();
  mueff_ = 1.0 / weights_.squaredNorm();

  cc_ = (4.0 + mueff_ / n) / (n + 4.0 + 2.0 * mueff_ / n);
  cs_ = (mueff_ + 2.0) / (n + mueff_ + 5.0);
  c1_ = 2.0 / ((n + 1.3) * (n + 1.3) + mueff_);
  cmu_ = std::min(1.0 - c1_, 2.0 * (mueff_ - 2.0 + 1.0 / mueff_) / ((n + 2.0) * (n + 2.0) + mueff_));
  damps_ = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff_ - 1.0) / (n + 1.0)) - 1.0) + cs_;
  chi_n_ = std::sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

  pc_ = Vector::Zero(mean_.size());
  ps_ = Vector::Zero(mean_.size());
  cov_ = Matrix::Identity(mean_.size(), mean_.size());
  basis_ = cov_;
  scales_ = Vector::Ones(mean_.size());
}

std::vector<Vector> CmaEs::ask() {
  Rng rng = Rng::derive(seed_, {static_cast<std::uint64_t>(generation_)});
  std::vector<Vector> out;
  out.reserve(lambda_);
  Vector z(mean_.size());
  for (std::size_t k = 0; k < lambda_; ++k) {
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      z[i] = rng.normal();
    }
    out.emplace_back(mean_ + sigma_ * (basis_ * scales_.cwiseProduct(z)));
  }
  return out;
}

void CmaEs::tell(std::span<const Vector> candidates, std::span<const double> fitness) {
  if (candidates.size() != lambda_ || fitness.size() != lambda_) {
    throw DimensionError("CmaEs::tell: expected " + std::to_string(lambda_) +
                         " candidates and fitness values");
  }
  for (const Vector& x : candidates) {
    require_size(static_cast<std::size_t>(x.size()), dimension(), "CmaEs candidate");
  }
  flagged_.clear();
  for (std::size_t k = 0; k < lambda_; ++k) {
    if (!std::isfinite(fitness[k])) {
      flagged_.push_back(k);
    }
  }
  std::vector<std::size_t> order(lambda_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool fa = std::isfinite(fitness[a]);
    const bool fb = std::isfinite(fitness[b]);
    if (fa != fb) {
      return fa;
    }
    return fa && fitness[a] > fitness[b];
  });

  const auto n = static_cast<double>(dimension());
  const Vector old_mean = mean_;
  mean_.setZero();
  for (std::size_t i = 0; i < mu_; ++i) {
    mean_ += weights_[static_cast<Eigen::Index>(i)] * candidates[order[i]];
  }
  const Vector y_w = (mean_ - old_mean) / sigma_;

  // C^{-1/2} y_w = B D^{-1} B^T y_w
  const Vector inv_sqrt_y = basis_ * (basis_.transpose() * y_w).cwiseQuotient(scales_);
  ps_ = (1.0 - cs_) * ps_ + std::sqrt(cs_ * (2.0 - cs_) * mueff_) * inv_sqrt_y;
  const double ps_norm = ps_.norm();
  const double decay = 1.0 - std::pow(1.0 - cs_, 2.0 * static_cast<double>(generation_ + 1));
  const bool hsig = ps_norm / std::sqrt(decay) / chi_n_ < 1.4 + 2.0 / (n + 1.0);
  pc_ = (1.0 - cc_) * pc_ + (hsig ? std::sqrt(cc_ * (2.0 - cc_) * mueff_) : 0.0) * y_w;

  Matrix rank_mu = Matrix::Zero(cov_.rows(), cov_.cols());
  for (std::size_t i = 0; i < mu_; ++i) {
    const Vector y = (candidates[order[i]] - old_mean) / sigma_;
    rank_mu.noalias() += weights_[static_cast<Eigen::Index>(i)] * (y * y.transpose());
  }
  const double hsig_correction = hsig ? 0.0 : cc_ * (2.0 - cc_);
  cov_ = (1.0 - c1_ - cmu_) * cov_ + c1_ * (pc_ * pc_.transpose() + hsig_correction * cov_) +
         cmu_ * rank_mu;
  sigma_ *= std::exp((cs_ / damps_) * (ps_norm / chi_n_ - 1.0));
  ++generation_;
  decompose();
}

void CmaEs::decompose() {
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
  if (solver.info() != Eigen::Success || !(solver.eigenvalues().minCoeff() > 0.0) ||
      !solver.eigenvalues().allFinite() || !std::isfinite(sigma_)) {
    throw NumericError("CmaEs: covariance is no longer positive definite at generation " +
                       std::to_string(generation_));
  }
  basis_ = solver.eigenvectors();
  scales_ = solver.eigenvalues().cwiseSqrt();
}

}  // namespace dreamland
