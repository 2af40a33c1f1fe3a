#pragma once

#include "psiland/quadrature.hpp"

#include <optional>
#include <tuple>
#include <string>
#include <utility>
#include <vector>

namespace psiland {

struct ModelConstants {
  int n = 0;
  double p = 0.0;
  double alpha_n = 0.0;
  double moment = 0.0;      // int U^{p+1}
  double log_moment = 0.0;  // int U^{p+1} ln U
  double a = 0.0, b = 0.0, c = 0.0, c1 = 0.0, c2 = 0.0;
  double c1_nodal = 0.0, c2_nodal = 0.0, c3_nodal = 0.0, c4_nodal = 0.0;
  double D_interaction = 0.0;
  double halfspace_integral = 0.0;  // int over the far side of a unit-distance plane of |y-nu|^{-2n}
  double b2_hole = 0.0;
  bool c2_nodal_injected = false;
};

ModelConstants constants(int n, std::optional<double> c2_nodal = std::nullopt);

// Symbol name, value, provenance note; stable order.
std::vector<std::tuple<std::string, double, std::string>> constants_table(const ModelConstants& k);

// ---------------------------------------------------------------------------
// single bubble, slightly subcritical

double reduced_energy_sub(const ModelConstants& k, double psi_val, double d);
double optimal_d(const ModelConstants& k, double psi_val);

enum class Regime { subcritical, nodal, hole };
const char* regime_name(Regime r);

struct ReducedEnergyPoint {
  Regime regime;
  std::vector<std::pair<std::string, double>> parameters;
  double value;
  Eigen::VectorXd gradient;  // in the free parameters
};

// Value and gradient in (d, xi) from one psi evaluation.
ReducedEnergyPoint reduced_energy_sub_point(const ModelConstants& k, const PsiEvaluation& psi,
                                            double d);

struct RatePrediction {
  Regime regime;
  double parameter;  // epsilon or rho
  std::vector<double> d;
  std::vector<double> delta;
  std::vector<double> t;
  std::vector<double> tau;
  std::vector<Vector> xi;
};

RatePrediction predict_subcritical(const Domain& domain, double eps, const Vector& xi_star,
                                   const ModelConstants& k, const QuadratureConfig& cfg);
RatePrediction predict_subcritical(double eps, const Vector& xi_star, double psi_val,
                                   const ModelConstants& k);

// ---------------------------------------------------------------------------
// two bubbles of opposite sign near the boundary

double nodal_xi_term(const ModelConstants& k, double d1, double d2, const BoundaryPoint& eta1,
                     const BoundaryPoint& eta2);
double nodal_upsilon_term(const ModelConstants& k, double d1, double d2, double t1, double t2,
                          const BoundaryPoint& eta1, const BoundaryPoint& eta2);
double reduced_energy_nodal(const ModelConstants& k, double d1, double d2, double t1, double t2,
                            const BoundaryPoint& eta1, const BoundaryPoint& eta2,
                            double eps_power_scale);
double nodal_eps_power_scale(int n, double eps);

struct NodalLimits {
  BoundaryPoint eta1, eta2;
  double r = 0.0;  // |eta1 - eta2|
  double s_bar = 0.0;
  double lambda1 = 0.0, lambda2 = 0.0;
  double r_bar = 0.0, t1_bar = 0.0, t2_bar = 0.0;
  int newton_iterations = 0;
};

// s_bar minimizing c1 s^{n-2}/r^{n-2} - 2 c2 ln s.
double nodal_s_bar(const ModelConstants& k, double r);
// Minimizes c3 s^{n-2} (l1 t1 + l2 t2) + c4 [(r/t1)^n + (s/(r t2))^n].
void nodal_inner_minimum(const ModelConstants& k, double s_bar, double lambda1, double lambda2,
                         double& r_bar, double& t1_bar, double& t2_bar, int* iterations = nullptr);
NodalLimits nodal_limits(const Domain& domain, const ModelConstants& k, int boundary_samples = 256);
RatePrediction predict_nodal(const NodalLimits& lim, double eps, int n);
RatePrediction predict_nodal(const Domain& domain, double eps, const ModelConstants& k,
                             int boundary_samples = 256);

// ---------------------------------------------------------------------------
// critical exponent with a shrinking hole

// b1 = c1 psi_Omega(0).
double hole_b1(const ModelConstants& k, const Domain& domain, const QuadratureConfig& cfg);
double hole_phi(const ModelConstants& k, double b1, double d, const Vector& zeta);
Eigen::VectorXd hole_phi_gradient(const ModelConstants& k, double b1, double d, const Vector& zeta);
Eigen::MatrixXd hole_phi_hessian(const ModelConstants& k, double b1, double d, const Vector& zeta);
double reduced_energy_hole(const ModelConstants& k, const Domain& domain, double d,
                           const Vector& zeta, const QuadratureConfig& cfg);

struct HoleCriticalPoint {
  double d0;
  Vector zeta;
  Eigen::VectorXd hessian_eigenvalues;  // ascending
  int positive_directions;
  int negative_directions;
};
HoleCriticalPoint hole_critical_point(const ModelConstants& k, double b1);

// delta = d0 sqrt(rho), concentration at the hole center.
RatePrediction predict_hole(double rho, double d0, int n);

}  // namespace psiland
