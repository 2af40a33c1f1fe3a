#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace psiland {

inline constexpr int kMaxDim = 8;

template <typename Scalar>
using VectorN = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
template <typename Scalar>
using MatrixN = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using Vector = VectorN<double>;
using Matrix = MatrixN<double>;

// Bad input or violated precondition. The CLI maps it to exit code 2.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iteration or quadrature failed to reach its target. Exit code 3.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

// |S^{n-1}|
inline double sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

inline double ball_volume(int n) { return sphere_area(n) / n; }

inline double critical_exponent(int n) { return (n + 2.0) / (n - 2.0); }

inline double bubble_alpha(int n) {
  return std::pow(double(n) * (n - 2), (n - 2) / 4.0);
}

}  // namespace psiland
