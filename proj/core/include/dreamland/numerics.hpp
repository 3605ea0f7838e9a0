#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace dreamland {

// Dense storage is row-major float64 throughout. Shapes are fixed at
// construction; callers resize only through explicit re-creation.
using Vector = Eigen::VectorXd;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<Vector>;
using VectorCRef = Eigen::Ref<const Vector>;
using MatrixCRef = Eigen::Ref<const Matrix>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

// Throws DimensionError carrying `what` when `actual != expected`.
void require_size(std::size_t actual, std::size_t expected, const std::string& what);

bool all_finite(VectorCRef v);
bool all_finite(MatrixCRef m);

// Builds a vector from external data; rejects NaN/Inf.
Vector vector_from(std::span<const double> values);
// Builds a rows x cols matrix from row-major external data; rejects NaN/Inf.
Matrix matrix_from(std::size_t rows, std::size_t cols, std::span<const double> values);

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sum_i exp(v_i)), shifted by max(v) so any finite input gives a finite
/// result. Throws std::invalid_argument on empty input.
double log_sum_exp(VectorCRef v);

/// Log density of N(mu, sigma^2) at x. Throws std::invalid_argument unless
/// sigma > 0.
double gaussian_logpdf(double x, double mu, double sigma);

using ScalarFunction = std::function<double(const Vector&)>;

/// Central-difference gradient, one coordinate at a time:
///   g_i = (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
/// Used as the independent oracle for every analytic gradient in the library.
Vector finite_diff_grad(const ScalarFunction& f, const Vector& x, double eps = 1e-5);

// |a - b| / max(|a|, |b|, floor). The floor keeps near-zero coordinates from
// dominating relative-error checks.
double relative_error(double a, double b, double floor = 1e-8);

}  // namespace dreamland
