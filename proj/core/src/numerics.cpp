#include "dreamland/numerics.hpp"

#include <algorithm>
#include <limits>

namespace dreamland {

void require_size(std::size_t actual, std::size_t expected, const std::string& what) {
  if (actual != expected) {
    throw DimensionError(what + ": expected size " + std::to_string(expected) + ", got " +
                         std::to_string(actual));
  }
}

bool all_finite(VectorCRef v) { return v.allFinite(); }

bool all_finite(MatrixCRef m) { return m.allFinite(); }

Vector vector_from(std::span<const double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite entry at index " + std::to_string(i));
    }
    v[static_cast<Eigen::Index>(i)] = values[i];
  }
  return v;
}

Matrix matrix_from(std::size_t rows, std::size_t cols, std::span<const double> values) {
  require_size(values.size(), rows * cols, "matrix_from");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError("non-finite entry at flat index " + std::to_string(i));
    }
    m.data()[i] = values[i];
  }
  return m;
}

double log_sum_exp(VectorCRef v) {
  if (v.size() == 0) {
    throw std::invalid_argument("log_sum_exp: empty input");
  }
  const double shift = v.maxCoeff();
  if (!std::isfinite(shift)) {
    throw std::invalid_argument("log_sum_exp: non-finite input");
  }
  double acc = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    acc += std::exp(v[i] - shift);
  }
  return shift + std::log(acc);
}

double gaussian_logpdf(double x, double mu, double sigma) {
  if (!(sigma > 0.0)) {
    throw std::invalid_argument("gaussian_logpdf: sigma must be positive");
  }
  const double u = (x - mu) / sigma;
  return -kHalfLog2Pi - std::log(sigma) - 0.5 * u * u;
}

Vector finite_diff_grad(const ScalarFunction& f, const Vector& x, double eps) {
  if (!(eps > 0.0)) {
    throw std::invalid_argument("finite_diff_grad: eps must be positive");
  }
  Vector grad(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(double a, double b, double floor) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace dreamland
