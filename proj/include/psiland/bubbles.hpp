#pragma once

#include "psiland/landscape.hpp"

#include <functional>
#include <vector>

namespace psiland {

struct Bubble {
  double delta;
  Vector xi;
  int sign = 1;
};

struct Ansatz {
  std::vector<Bubble> bubbles;
};

void validate(const Bubble& b);
void validate(const Ansatz& a, int dim);

// Unsigned profile alpha_n delta^{(n-2)/2} / (delta^2 + r2)^{(n-2)/2}.
template <typename Scalar>
Scalar bubble_profile(int n, Scalar delta, Scalar r2) {
  using std::pow;
  const Scalar alpha = pow(Scalar(n) * Scalar(n - 2), Scalar(n - 2) / Scalar(4));
  return alpha * pow(delta / (delta * delta + r2), Scalar(n - 2) / Scalar(2));
}

// Z^0 = delta dU/ddelta, Z^i = delta dU/dxi_i.
template <typename Scalar>
Scalar z_profile(int n, int i, Scalar delta, const VectorN<Scalar>& diff) {
  using std::pow;
  const Scalar alpha = pow(Scalar(n) * Scalar(n - 2), Scalar(n - 2) / Scalar(4));
  const Scalar r2 = diff.squaredNorm();
  const Scalar den = pow(delta * delta + r2, Scalar(n) / Scalar(2));
  if (i == 0)
    return alpha * Scalar(n - 2) / Scalar(2) * pow(delta, Scalar(n - 2) / Scalar(2)) *
           (r2 - delta * delta) / den;
  return alpha * Scalar(n - 2) * pow(delta, Scalar(n) / Scalar(2)) * diff(i - 1) / den;
}

double bubble_value(const Bubble& b, const Vector& x);
double ansatz_value(const Ansatz& a, const Vector& x);
double z_value(int i, double delta, const Vector& xi, const Vector& x);

struct ResidualReport {
  double max_residual;
  double max_abs;  // max |Z^i| (or U) over the samples
};

// Central-difference Laplacian with h = 1e-4 (delta^2 + |x-xi|^2)^{1/2}.
// i = -1 checks -Delta U = U^p, i >= 0 checks -Delta Z^i = p U^{p-1} Z^i.
ResidualReport linearization_residual(int i, double delta, const Vector& xi,
                                      const std::vector<Vector>& samples);

struct RadialFunction {
  std::function<double(double)> value;
  std::function<double(double)> derivative;
};

struct IsometryReport {
  std::vector<double> deltas;
  std::vector<double> gradient_norm;  // |grad P u|_2
  double reference_gradient_norm;     // |grad u|_2
  double max_gradient_rel_dev;
  double s;
  double alpha;  // n/s - (n-2)/2
  std::vector<double> ls_norm;  // |P u|_s
  double reference_ls_norm;
  double max_ls_rel_dev;  // against delta^alpha |u|_s
  double measured_slope;  // least squares of ln |P u|_s against ln delta
};

// P u(x) = delta^{-(n-2)/2} u((x - xi)/delta) for radial u; norms by
// double-exponential quadrature.
IsometryReport rescaling_isometry_check(int n, const std::vector<double>& deltas,
                                        const Vector& xi, const RadialFunction& u, double s);

// Unsigned interaction int U_1^p U_2 about xi_1: radial quadrature of U_1^p
// against the spherical mean of U_2. std_error is the quadrature error estimate.
QuadratureResult interaction(const Bubble& b1, const Bubble& b2, const QuadratureConfig& cfg);

// int over the part of R^n outside (or inside) `domain` of U^power, about xi.
QuadratureResult bubble_region_mass(const Domain& domain, Region region, const Bubble& b,
                                    double power, const QuadratureConfig& cfg);
// Closed form of int_{R^n} U^power.
double bubble_whole_mass(int n, double delta, double power);

struct EnergyReport {
  double j_eps;
  double gradient_part;     // int |grad u|^2
  double weighted_part;     // int Q |u|^{p+1-eps}
  double whole_space_part;  // int_{R^n} |u|^{p+1-eps}
  double exterior_part;     // int_{R^n \ Omega} |u|^{p+1-eps}
  double std_error;
  std::size_t n_evals;
};

EnergyReport energy(const Domain& domain, const Ansatz& ansatz, double eps,
                    const ModelConstants& k, const QuadratureConfig& cfg);

struct SubResidualRow {
  double eps;
  double delta;
  double j_eps;
  double residual;               // includes -Psi(d, xi)
  double residual_without_psi;
  double exterior_mass_ratio;    // 2/(p+1) int_ext U^{p+1} / (eps d^n c1 psi)
  double std_error;
};

std::vector<SubResidualRow> expansion_residual_sub(const Domain& domain, double d,
                                                   const Vector& xi,
                                                   const std::vector<double>& eps_list,
                                                   const ModelConstants& k,
                                                   const QuadratureConfig& cfg);

struct HoleResidualRow {
  double rho;
  double delta;
  double j;
  double residual;
  double hole_mass_ratio;  // 2/(p+1) int_{B_rho} U^{p+1} / (rho^{n/2} b2 d^-n (1+|zeta|^2)^-n)
  double std_error;
};

std::vector<HoleResidualRow> expansion_residual_hole(const Domain& domain, double d,
                                                     const Vector& zeta,
                                                     const std::vector<double>& rho_list,
                                                     const ModelConstants& k,
                                                     const QuadratureConfig& cfg);

}  // namespace psiland
