#pragma once

#include "psiland/geometry.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>

namespace psiland {

struct QuadratureConfig {
  std::uint64_t seed = 0;
  std::size_t near_budget = std::size_t(1) << 20;  // rays over all replicates
  int far_shells = 64;
  int replicates = 8;
  double target_rel_err = 1e-3;
  double h_min_factor = 1e-3;  // boundary guard relative to the bounding radius
  int workers = 0;             // 0 selects the hardware concurrency

  void validate() const;
  std::size_t rays_per_replicate() const;
};

struct QuadratureResult {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_evals = 0;
};

struct PsiEvaluation {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
  double value_error = 0.0;
  Vector gradient_error;
  Matrix hessian_error;
  std::size_t n_evals = 0;
};

// psi(xi) = int_{R^n \ Omega} |x - xi|^{-2n} dx with gradient and Hessian.
PsiEvaluation psi_integrals(const Domain& domain, const Vector& xi, const QuadratureConfig& cfg);

using ScalarField = std::function<double(const Vector&)>;

// int_{R^n \ Omega} |f|^p in polar coordinates about `center`; `scale` is the
// radial length below which nodes are spaced linearly.
QuadratureResult exterior_lp_mass(const Domain& domain, const ScalarField& f, double p,
                                  const QuadratureConfig& cfg, const Vector& center,
                                  double scale);
QuadratureResult exterior_lp_mass(const Domain& domain, const ScalarField& f, double p,
                                  const QuadratureConfig& cfg);

// int_{R^n} U^power (times ln U when log_weight) for the unit bubble.
double bubble_moment(int n, double power, bool log_weight);

// ---------------------------------------------------------------------------
// polar integration engine shared with the bubble energies

enum class Region { exterior, interior, whole };

struct HalfSpace {
  Vector normal;
  double offset;  // keeps {x : normal . x < offset}
};

struct RadialPiece {
  double lo;
  double hi;  // may be +inf
};
using RadialPieces = boost::container::small_vector<RadialPiece, 8>;

// Returns the radial integral (with the r^{n-1} Jacobian) over the pieces of
// the ray center + r w.
using RayIntegral = std::function<double(const Vector& w, const RadialPieces& pieces)>;

struct PolarRegion {
  const Domain* domain = nullptr;  // required unless region == whole
  Region region = Region::whole;
  std::optional<HalfSpace> clip;
};

QuadratureResult polar_integral(const PolarRegion& where, const Vector& center,
                                const RayIntegral& integral, const QuadratureConfig& cfg);

struct RadialStats {
  std::size_t nodes = 0;
  bool tail_not_decaying = false;
};

// int_a^b h(r) dr with Gauss rules: linear on [a, scale], geometric pieces
// (ratio <= 2, log variable) beyond; b = inf uses up to max_shells dyadic
// shells with a geometric tail correction.
double integrate_radial(const std::function<double(double)>& h, double a, double b, double scale,
                        int max_shells, RadialStats* stats = nullptr);

// Ray integral for a pointwise integrand g(x) (the r^{n-1} factor is added).
RayIntegral pointwise_ray(const ScalarField& g, const Vector& center, double scale,
                          int max_shells, std::atomic<bool>* tail_flag = nullptr);

}  // namespace psiland
