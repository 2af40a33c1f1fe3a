#include "psiland/landscape.hpp"

#include <Eigen/Eigenvalues>

#include <limits>

namespace psiland {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_consts(const ModelConstants& k) {
  require(k.n >= 3 && k.n <= kMaxDim, "model constants are not initialized");
}

}  // namespace

ModelConstants constants(int n, std::optional<double> c2_nodal) {
  require(n >= 3 && n <= kMaxDim, "constants: n must be in [3, 8]");
  ModelConstants k;
  k.n = n;
  k.p = critical_exponent(n);
  k.alpha_n = bubble_alpha(n);
  const double q = k.p + 1.0;
  k.moment = bubble_moment(n, q, false);
  k.log_moment = bubble_moment(n, q, true);
  k.a = k.moment / n;
  k.b = -(k.moment / (q * q) - k.log_moment / q);
  k.c = -k.moment / (q * q);
  const double alpha_q = std::pow(k.alpha_n, q);
  k.c1 = 2.0 * alpha_q / q;
  k.c2 = n / (q * q) * k.moment;

  // alpha^{p+1} int (1+|y|^2)^{-(n+2)/2} = alpha * int U^p
  k.D_interaction = k.alpha_n * bubble_moment(n, k.p, false);
  k.c1_nodal = k.D_interaction;
  k.c3_nodal = (n - 2) * k.D_interaction;

  // int_{t>1} int_{R^{n-1}} (t^2 + |z|^2)^{-n} dz dt = C_{n-1} / n
  auto h = [n](double rho) { return std::pow(rho, n - 2) * std::pow(1.0 + rho * rho, -n); };
  double radial = integrate_radial(h, 0.0, kInf, 1.0, 400);
  k.halfspace_integral = sphere_area(n - 1) * radial / n;
  k.c4_nodal = 2.0 / q * alpha_q * k.halfspace_integral;

  k.c2_nodal = (n - 2) / (2.0 * q) * k.moment;
  if (c2_nodal) {
    require(std::isfinite(*c2_nodal) && *c2_nodal > 0.0, "constants: c2_nodal must be positive");
    k.c2_nodal = *c2_nodal;
    k.c2_nodal_injected = true;
  }
  k.b2_hole = 2.0 / q * alpha_q * ball_volume(n);
  return k;
}

std::vector<std::tuple<std::string, double, std::string>> constants_table(const ModelConstants& k) {
  check_consts(k);
  const std::string quad = "radial quadrature";
  return {
      {"n", double(k.n), "input"},
      {"p", k.p, "closed form (n+2)/(n-2)"},
      {"alpha_n", k.alpha_n, "closed form (n(n-2))^((n-2)/4)"},
      {"moment_p1", k.moment, quad + ": int U^(p+1)"},
      {"log_moment_p1", k.log_moment, quad + ": int U^(p+1) ln U"},
      {"a", k.a, "moment_p1 / n"},
      {"b", k.b, "-(moment_p1/(p+1)^2 - log_moment_p1/(p+1))"},
      {"c", k.c, "-moment_p1/(p+1)^2"},
      {"c1", k.c1, "closed form 2 alpha_n^(p+1)/(p+1)"},
      {"c2", k.c2, "n moment_p1/(p+1)^2"},
      {"D", k.D_interaction, quad + ": alpha_n^(p+1) int (1+|y|^2)^(-(n+2)/2)"},
      {"c1_nodal", k.c1_nodal, "= D"},
      {"c2_nodal", k.c2_nodal,
       k.c2_nodal_injected ? "injected by configuration"
                           : "default stand-in (n-2)/(2(p+1)) moment_p1, not fixed by the source"},
      {"c3_nodal", k.c3_nodal, "(n-2) D"},
      {"c4_nodal", k.c4_nodal, quad + ": 2/(p+1) alpha_n^(p+1) int_{half-space complement} |y-nu|^(-2n)"},
      {"b2_hole", k.b2_hole, "closed form 2/(p+1) alpha_n^(p+1) |B_1|"},
  };
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::subcritical:
      return "sub";
    case Regime::nodal:
      return "nodal";
    case Regime::hole:
      return "hole";
  }
  return "?";
}

// ---------------------------------------------------------------------------

double reduced_energy_sub(const ModelConstants& k, double psi_val, double d) {
  check_consts(k);
  require(d > 0.0, "reduced_energy_sub: d must be positive");
  require(psi_val > 0.0, "reduced_energy_sub: psi must be positive");
  return k.c1 * std::pow(d, k.n) * psi_val - k.c2 * std::log(d);
}

double optimal_d(const ModelConstants& k, double psi_val) {
  check_consts(k);
  require(psi_val > 0.0, "optimal_d: psi must be positive");
  return std::pow(k.c2 / (k.n * k.c1 * psi_val), 1.0 / k.n);
}

ReducedEnergyPoint reduced_energy_sub_point(const ModelConstants& k, const PsiEvaluation& psi,
                                            double d) {
  const int n = k.n;
  require(psi.gradient.size() == n, "reduced_energy_sub_point: dimension mismatch");
  ReducedEnergyPoint pt{Regime::subcritical, {{"d", d}}, reduced_energy_sub(k, psi.value, d),
                        Eigen::VectorXd(n + 1)};
  pt.gradient(0) = n * k.c1 * std::pow(d, n - 1) * psi.value - k.c2 / d;
  pt.gradient.tail(n) = k.c1 * std::pow(d, n) * psi.gradient;
  return pt;
}

RatePrediction predict_subcritical(double eps, const Vector& xi_star, double psi_val,
                                   const ModelConstants& k) {
  require(eps > 0.0 && eps <= 1.0, "predict_subcritical: eps must lie in (0, 1]");
  double d = optimal_d(k, psi_val);
  RatePrediction r{Regime::subcritical, eps, {d}, {d * std::pow(eps, 1.0 / k.n)}, {}, {}, {xi_star}};
  return r;
}

RatePrediction predict_subcritical(const Domain& domain, double eps, const Vector& xi_star,
                                   const ModelConstants& k, const QuadratureConfig& cfg) {
  require(eps > 0.0 && eps <= 1.0, "predict_subcritical: eps must lie in (0, 1]");
  return predict_subcritical(eps, xi_star, psi_integrals(domain, xi_star, cfg).value, k);
}

// ---------------------------------------------------------------------------

double nodal_xi_term(const ModelConstants& k, double d1, double d2, const BoundaryPoint& eta1,
                     const BoundaryPoint& eta2) {
  check_consts(k);
  require(d1 > 0.0 && d2 > 0.0, "nodal: d1, d2 must be positive");
  double dist = (eta1.location - eta2.location).norm();
  require(dist > 0.0, "nodal: coincident boundary points");
  const int n = k.n;
  return k.c1_nodal * std::pow(d1 * d2, 0.5 * (n - 2)) / std::pow(dist, n - 2) -
         k.c2_nodal * std::log(d1 * d2);
}

double nodal_upsilon_term(const ModelConstants& k, double d1, double d2, double t1, double t2,
                          const BoundaryPoint& eta1, const BoundaryPoint& eta2) {
  check_consts(k);
  require(d1 > 0.0 && d2 > 0.0 && t1 > 0.0 && t2 > 0.0, "nodal: d and t must be positive");
  Vector diff = eta1.location - eta2.location;
  double dist = diff.norm();
  require(dist > 0.0, "nodal: coincident boundary points");
  const int n = k.n;
  Vector e = diff / std::pow(dist, n);
  // -<e, t1 nu1 - t2 nu2>, summed per bubble so the index swap is exact
  double pairing = -t1 * e.dot(eta1.inner_normal) + t2 * e.dot(eta2.inner_normal);
  return k.c3_nodal * std::pow(d1 * d2, 0.5 * (n - 2)) * pairing +
         k.c4_nodal * (std::pow(d1 / t1, n) + std::pow(d2 / t2, n));
}

double reduced_energy_nodal(const ModelConstants& k, double d1, double d2, double t1, double t2,
                            const BoundaryPoint& eta1, const BoundaryPoint& eta2,
                            double eps_power_scale) {
  return nodal_xi_term(k, d1, d2, eta1, eta2) +
         eps_power_scale * nodal_upsilon_term(k, d1, d2, t1, t2, eta1, eta2);
}

double nodal_eps_power_scale(int n, double eps) {
  return std::pow(eps, 2.0 / ((n - 2.0) * (n + 1.0)));
}

double nodal_s_bar(const ModelConstants& k, double r) {
  check_consts(k);
  require(r > 0.0, "nodal_s_bar: r must be positive");
  return r * std::pow(2.0 * k.c2_nodal / ((k.n - 2.0) * k.c1_nodal), 1.0 / (k.n - 2.0));
}

void nodal_inner_minimum(const ModelConstants& k, double s_bar, double lambda1, double lambda2,
                         double& r_bar, double& t1_bar, double& t2_bar, int* iterations) {
  check_consts(k);
  require(lambda1 > 0.0 && lambda2 > 0.0,
          "nodal: boundary normals at the diameter pair do not face each other");
  const int n = k.n;
  const double A1 = k.c3_nodal * std::pow(s_bar, n - 2) * lambda1;
  const double A2 = k.c3_nodal * std::pow(s_bar, n - 2) * lambda2;
  const double C = k.c4_nodal;
  const double ln_s = std::log(s_bar);
  // log variables (u, v1, v2) = (ln r, ln t1, ln t2); the objective is a sum
  // of exponentials of linear forms, hence strictly convex
  auto terms = [&](const Eigen::Vector3d& x, Eigen::Vector3d* g, Eigen::Matrix3d* H) {
    double e1 = A1 * std::exp(x(1));
    double e2 = A2 * std::exp(x(2));
    double e3 = C * std::exp(n * (x(0) - x(1)));
    double e4 = C * std::exp(n * (ln_s - x(0) - x(2)));
    if (g) *g << n * (e3 - e4), e1 - n * e3, e2 - n * e4;
    if (H) {
      double n2 = double(n) * n;
      *H << n2 * (e3 + e4), -n2 * e3, n2 * e4,  //
          -n2 * e3, e1 + n2 * e3, 0.0,          //
          n2 * e4, 0.0, e2 + n2 * e4;
    }
    return e1 + e2 + e3 + e4;
  };
  Eigen::Vector3d x = Eigen::Vector3d::Zero(), g;
  Eigen::Matrix3d H;
  double f = terms(x, &g, &H);
  int it = 0;
  for (; it < 200; ++it) {
    if (g.norm() <= 1e-13 * std::max(1.0, f)) break;
    Eigen::Vector3d step = -H.ldlt().solve(g);
    double t = 1.0;
    double slope = g.dot(step);
    Eigen::Vector3d trial;
    double ft = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      trial = x + t * step;
      ft = terms(trial, nullptr, nullptr);
      if (ft <= f + 1e-4 * t * slope) break;
    }
    if (!(ft < f) && !(g.norm() <= 1e-10 * std::max(1.0, f))) {
      if (ft > f) throw ConvergenceError("nodal inner minimization did not converge");
    }
    x = trial;
    f = terms(x, &g, &H);
  }
  if (g.norm() > 1e-10 * std::max(1.0, f))
    throw ConvergenceError("nodal inner minimization did not converge");
  r_bar = std::exp(x(0));
  t1_bar = std::exp(x(1));
  t2_bar = std::exp(x(2));
  if (iterations) *iterations = it;
}

NodalLimits nodal_limits(const Domain& domain, const ModelConstants& k, int boundary_samples) {
  check_consts(k);
  require(domain.dimension() == k.n, "nodal: dimension mismatch");
  DiameterPair pair = diameter_pair(domain, boundary_samples);
  require(pair.normals_aligned,
          "nodal: the diameter pair sits on a non-smooth part of the boundary");
  NodalLimits lim;
  lim.eta1 = pair.first;
  lim.eta2 = pair.second;
  lim.r = pair.distance;
  const int n = k.n;
  Vector e = (lim.eta1.location - lim.eta2.location) / std::pow(lim.r, n);
  lim.lambda1 = -lim.eta1.inner_normal.dot(e);
  lim.lambda2 = lim.eta2.inner_normal.dot(e);
  lim.s_bar = nodal_s_bar(k, lim.r);
  nodal_inner_minimum(k, lim.s_bar, lim.lambda1, lim.lambda2, lim.r_bar, lim.t1_bar, lim.t2_bar,
                      &lim.newton_iterations);
  return lim;
}

RatePrediction predict_nodal(const NodalLimits& lim, double eps, int n) {
  require(eps > 0.0 && eps < 1.0, "predict_nodal: eps must lie in (0, 1)");
  const double d_scale = std::pow(eps, 1.0 / (n - 2.0));
  const double t_scale = nodal_eps_power_scale(n, eps);
  RatePrediction r{Regime::nodal, eps, {}, {}, {}, {}, {}};
  r.d = {lim.r_bar, lim.s_bar / lim.r_bar};
  r.t = {lim.t1_bar, lim.t2_bar};
  for (int i = 0; i < 2; ++i) {
    r.delta.push_back(r.d[i] * d_scale);
    r.tau.push_back(r.t[i] * t_scale);
  }
  r.xi.push_back(lim.eta1.location + r.tau[0] * lim.eta1.inner_normal);
  r.xi.push_back(lim.eta2.location + r.tau[1] * lim.eta2.inner_normal);
  return r;
}

RatePrediction predict_nodal(const Domain& domain, double eps, const ModelConstants& k,
                             int boundary_samples) {
  require(eps > 0.0 && eps < 1.0, "predict_nodal: eps must lie in (0, 1)");
  return predict_nodal(nodal_limits(domain, k, boundary_samples), eps, k.n);
}

// ---------------------------------------------------------------------------

double hole_b1(const ModelConstants& k, const Domain& domain, const QuadratureConfig& cfg) {
  check_consts(k);
  require(domain.dimension() == k.n, "hole: dimension mismatch");
  Vector origin = Vector::Zero(k.n);
  require(contains(domain, origin), "hole: the origin must lie inside the domain");
  return k.c1 * psi_integrals(domain, origin, cfg).value;
}

double hole_phi(const ModelConstants& k, double b1, double d, const Vector& zeta) {
  check_consts(k);
  require(d > 0.0, "hole_phi: d must be positive");
  const int n = k.n;
  return b1 * std::pow(d, n) + k.b2_hole * std::pow(d, -n) * std::pow(1.0 + zeta.squaredNorm(), -n);
}

Eigen::VectorXd hole_phi_gradient(const ModelConstants& k, double b1, double d, const Vector& zeta) {
  const int n = k.n;
  const double q = 1.0 + zeta.squaredNorm();
  Eigen::VectorXd g(zeta.size() + 1);
  g(0) = n * b1 * std::pow(d, n - 1) - n * k.b2_hole * std::pow(d, -n - 1) * std::pow(q, -n);
  g.tail(zeta.size()) = -2.0 * n * k.b2_hole * std::pow(d, -n) * std::pow(q, -n - 1) * zeta;
  return g;
}

Eigen::MatrixXd hole_phi_hessian(const ModelConstants& k, double b1, double d, const Vector& zeta) {
  const int n = k.n;
  const int m = int(zeta.size());
  const double q = 1.0 + zeta.squaredNorm();
  const double b2 = k.b2_hole;
  Eigen::MatrixXd H(m + 1, m + 1);
  H(0, 0) = n * (n - 1.0) * b1 * std::pow(d, n - 2) +
            n * (n + 1.0) * b2 * std::pow(d, -n - 2) * std::pow(q, -n);
  Eigen::VectorXd mixed = 2.0 * n * n * b2 * std::pow(d, -n - 1) * std::pow(q, -n - 1) * zeta;
  H.block(1, 0, m, 1) = mixed;
  H.block(0, 1, 1, m) = mixed.transpose();
  Eigen::MatrixXd zz = zeta * zeta.transpose();
  H.block(1, 1, m, m) = -2.0 * n * b2 * std::pow(d, -n) *
                        (std::pow(q, -n - 1) * Eigen::MatrixXd::Identity(m, m) -
                         2.0 * (n + 1.0) * std::pow(q, -n - 2) * zz);
  return H;
}

double reduced_energy_hole(const ModelConstants& k, const Domain& domain, double d,
                           const Vector& zeta, const QuadratureConfig& cfg) {
  require(zeta.size() == k.n, "hole: dimension mismatch");
  return hole_phi(k, hole_b1(k, domain, cfg), d, zeta);
}

HoleCriticalPoint hole_critical_point(const ModelConstants& k, double b1) {
  check_consts(k);
  require(b1 > 0.0, "hole_critical_point: b1 must be positive");
  HoleCriticalPoint cp;
  cp.d0 = std::pow(k.b2_hole / b1, 1.0 / (2.0 * k.n));
  cp.zeta = Vector::Zero(k.n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hole_phi_hessian(k, b1, cp.d0, cp.zeta));
  cp.hessian_eigenvalues = es.eigenvalues();
  double scale = cp.hessian_eigenvalues.cwiseAbs().maxCoeff();
  cp.positive_directions = int((cp.hessian_eigenvalues.array() > 1e-8 * scale).count());
  cp.negative_directions = int((cp.hessian_eigenvalues.array() < -1e-8 * scale).count());
  return cp;
}

RatePrediction predict_hole(double rho, double d0, int n) {
  require(rho > 0.0 && rho < 1.0, "predict_hole: rho must lie in (0, 1)");
  require(d0 > 0.0, "predict_hole: d0 must be positive");
  return {Regime::hole, rho, {d0}, {d0 * std::sqrt(rho)}, {}, {}, {Vector::Zero(n)}};
}

}  // namespace psiland
