#include "psiland/bubbles.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <limits>

namespace psiland {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// int_lo^hi r^{n-1} (delta^2 + r^2)^{-m} dr through t = r^2/(delta^2 + r^2)
double radial_power_integral(int n, double m, double delta, double lo, double hi) {
  const double a = 0.5 * n, b = m - 0.5 * n;
  const double d2 = delta * delta;
  auto t_of = [&](double r) { return r * r / (d2 + r * r); };
  auto y_of = [&](double r) { return std::isinf(r) ? 0.0 : d2 / (d2 + r * r); };
  double diff;
  if (std::isfinite(hi) && t_of(hi) < 0.5) {
    diff = boost::math::beta(a, b, t_of(hi)) - boost::math::beta(a, b, t_of(lo));
  } else {
    double y_hi = y_of(hi);
    double upper = y_hi > 0.0 ? boost::math::beta(b, a, y_hi) : 0.0;
    diff = boost::math::beta(b, a, y_of(lo)) - upper;
  }
  return 0.5 * std::pow(delta, n - 2.0 * m) * diff;
}

double mass_exponent(int n, double power) { return 0.5 * power * (n - 2); }

void require_integrable(int n, double power) {
  require(power * (n - 2) > n, "bubble mass: power*(n-2) must exceed n");
}

}  // namespace

void validate(const Bubble& b) {
  require(std::isfinite(b.delta) && b.delta > 0.0, "bubble: delta must be positive");
  require(b.sign == 1 || b.sign == -1, "bubble: sign must be +1 or -1");
  require(b.xi.size() >= 3 && b.xi.size() <= kMaxDim, "bubble: dimension must be in [3, 8]");
  require(b.xi.allFinite(), "bubble: center must be finite");
}

void validate(const Ansatz& a, int dim) {
  require(a.bubbles.size() == 1 || a.bubbles.size() == 2, "ansatz: one or two bubbles");
  for (const Bubble& b : a.bubbles) {
    validate(b);
    require(b.xi.size() == dim, "ansatz: dimension mismatch");
  }
  if (a.bubbles.size() == 2)
    require((a.bubbles[0].xi - a.bubbles[1].xi).norm() > 0.0, "ansatz: coincident centers");
}

double bubble_value(const Bubble& b, const Vector& x) {
  return b.sign * bubble_profile<double>(int(x.size()), b.delta, (x - b.xi).squaredNorm());
}

double ansatz_value(const Ansatz& a, const Vector& x) {
  double s = 0.0;
  for (const Bubble& b : a.bubbles) s += bubble_value(b, x);
  return s;
}

double z_value(int i, double delta, const Vector& xi, const Vector& x) {
  const int n = int(x.size());
  require(i >= 0 && i <= n, "z_value: index out of range");
  require(xi.size() == n, "z_value: dimension mismatch");
  return z_profile<double>(n, i, delta, Vector(x - xi));
}

ResidualReport linearization_residual(int i, double delta, const Vector& xi,
                                      const std::vector<Vector>& samples) {
  const int n = int(xi.size());
  require(n >= 3 && n <= kMaxDim, "linearization_residual: dimension must be in [3, 8]");
  require(i >= -1 && i <= n, "linearization_residual: index out of range");
  require(delta > 0.0, "linearization_residual: delta must be positive");
  using LD = long double;
  const LD p = LD(n + 2) / LD(n - 2);
  VectorN<LD> c = xi.cast<LD>();
  auto u = [&](const VectorN<LD>& x) { return bubble_profile<LD>(n, delta, (x - c).squaredNorm()); };
  auto f = [&](const VectorN<LD>& x) { return i < 0 ? u(x) : z_profile<LD>(n, i, delta, x - c); };
  ResidualReport rep{0.0, 0.0};
  for (const Vector& s : samples) {
    require(s.size() == n, "linearization_residual: dimension mismatch");
    require((s - xi).norm() >= 1e-3, "linearization_residual: sample too close to the center");
    VectorN<LD> x = s.cast<LD>();
    const LD h = 1e-4L * std::sqrt(LD(delta) * delta + (x - c).squaredNorm());
    const LD f0 = f(x);
    LD lap = 0.0;
    for (int k = 0; k < n; ++k) {
      VectorN<LD> e = VectorN<LD>::Zero(n);
      e(k) = h;
      lap += f(x + e) - 2.0L * f0 + f(x - e);
    }
    lap /= h * h;
    const LD u0 = u(x);
    const LD rhs = i < 0 ? std::pow(u0, p) : p * std::pow(u0, p - 1.0L) * f0;
    rep.max_residual = std::max(rep.max_residual, double(std::abs(-lap - rhs)));
    rep.max_abs = std::max(rep.max_abs, double(std::abs(f0)));
  }
  return rep;
}

IsometryReport rescaling_isometry_check(int n, const std::vector<double>& deltas,
                                        const Vector& xi, const RadialFunction& u, double s) {
  require(n >= 3 && n <= kMaxDim, "rescaling_isometry_check: dimension must be in [3, 8]");
  require(xi.size() == n, "rescaling_isometry_check: dimension mismatch");
  require(deltas.size() >= 2, "rescaling_isometry_check: need at least two scales");
  require(s >= 1.0, "rescaling_isometry_check: s must be at least 1");
  require(bool(u.value) && bool(u.derivative), "rescaling_isometry_check: empty test function");
  boost::math::quadrature::exp_sinh<double> quad;
  const double S = sphere_area(n);
  const double m = 0.5 * (n - 2);
  // xi only moves the center; the norms are taken in polar coordinates about it
  auto grad_norm = [&](double delta) {
    auto h = [&](double r) {
      if (r > 1e100) return 0.0;
      double g = std::pow(delta, -m - 1.0) * u.derivative(r / delta);
      return g * g * std::pow(r, n - 1);
    };
    return std::sqrt(S * quad.integrate(h, 0.0, kInf));
  };
  auto ls_norm = [&](double delta) {
    auto h = [&](double r) {
      if (r > 1e100) return 0.0;
      return std::pow(std::abs(std::pow(delta, -m) * u.value(r / delta)), s) * std::pow(r, n - 1);
    };
    return std::pow(S * quad.integrate(h, 0.0, kInf), 1.0 / s);
  };
  IsometryReport rep;
  rep.deltas = deltas;
  rep.s = s;
  rep.alpha = n / s - m;
  rep.reference_gradient_norm = grad_norm(1.0);
  rep.reference_ls_norm = ls_norm(1.0);
  rep.max_gradient_rel_dev = 0.0;
  rep.max_ls_rel_dev = 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (double delta : deltas) {
    require(delta > 0.0, "rescaling_isometry_check: delta must be positive");
    double g = grad_norm(delta), l = ls_norm(delta);
    rep.gradient_norm.push_back(g);
    rep.ls_norm.push_back(l);
    rep.max_gradient_rel_dev =
        std::max(rep.max_gradient_rel_dev, std::abs(g / rep.reference_gradient_norm - 1.0));
    double expect = std::pow(delta, rep.alpha) * rep.reference_ls_norm;
    rep.max_ls_rel_dev = std::max(rep.max_ls_rel_dev, std::abs(l / expect - 1.0));
    double x = std::log(delta), y = std::log(l);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double k = double(deltas.size());
  rep.measured_slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
  return rep;
}

QuadratureResult interaction(const Bubble& b1, const Bubble& b2, const QuadratureConfig& cfg) {
  cfg.validate();
  validate(b1);
  validate(b2);
  const int n = int(b1.xi.size());
  require(b2.xi.size() == n, "interaction: dimension mismatch");
  const double L = (b1.xi - b2.xi).norm();
  require(L > 0.0, "interaction: coincident centers");
  const double p = critical_exponent(n);
  boost::math::quadrature::tanh_sinh<double> finite;
  boost::math::quadrature::exp_sinh<double> infinite;
  const double tol = 1e-10;
  std::size_t evals = 0;
  // U_1^p is radial about xi_1, so only the spherical mean of U_2 over
  // |x - xi_1| = r is needed; it is integrated in rho = |x - xi_2|
  auto mean_u2 = [&](double r) {
    if (r <= 0.0) return bubble_profile<double>(n, b2.delta, L * L);
    auto g = [&](double rho) {
      ++evals;
      double c = (r * r + L * L - rho * rho) / (2.0 * r * L);
      double sin_t = std::sqrt(std::max(0.0, 1.0 - c * c));
      return bubble_profile<double>(n, b2.delta, rho * rho) * std::pow(sin_t, n - 3) * rho /
             (r * L);
    };
    return sphere_area(n - 1) * finite.integrate(g, std::abs(r - L), r + L, tol);
  };
  auto h = [&](double r) {
    if (r > 1e100) return 0.0;
    return std::pow(bubble_profile<double>(n, b1.delta, r * r), p) * std::pow(r, n - 1) *
           mean_u2(r);
  };
  const double w = 0.5 * L;
  double err = 0.0, e = 0.0;
  double total = finite.integrate(h, 0.0, L - w, tol, &e);
  err += e;
  total += finite.integrate(h, L - w, L, tol, &e);
  err += e;
  total += finite.integrate(h, L, L + w, tol, &e);
  err += e;
  total += infinite.integrate(h, L + w, kInf, tol, &e);
  err += e;
  return {total, err * std::abs(total), evals};
}

double bubble_whole_mass(int n, double delta, double power) {
  require(n >= 3 && n <= kMaxDim, "bubble mass: dimension must be in [3, 8]");
  require_integrable(n, power);
  const double m = mass_exponent(n, power);
  return sphere_area(n) * std::pow(bubble_alpha(n), power) *
         std::pow(delta, power * 0.5 * (n - 2)) * radial_power_integral(n, m, delta, 0.0, kInf);
}

QuadratureResult bubble_region_mass(const Domain& domain, Region region, const Bubble& b,
                                    double power, const QuadratureConfig& cfg) {
  validate(b);
  const int n = domain.dimension();
  require(b.xi.size() == n, "bubble mass: dimension mismatch");
  require_integrable(n, power);
  const double m = mass_exponent(n, power);
  const double pre = std::pow(bubble_alpha(n), power) * std::pow(b.delta, power * 0.5 * (n - 2));
  const double delta = b.delta;
  RayIntegral ray = [n, m, pre, delta](const Vector&, const RadialPieces& pieces) {
    double total = 0.0;
    for (const RadialPiece& piece : pieces)
      total += radial_power_integral(n, m, delta, piece.lo, piece.hi);
    return pre * total;
  };
  PolarRegion where{&domain, region, std::nullopt};
  return polar_integral(where, b.xi, ray, cfg);
}

EnergyReport energy(const Domain& domain, const Ansatz& ansatz, double eps,
                    const ModelConstants& k, const QuadratureConfig& cfg) {
  const int n = domain.dimension();
  require(k.n == n, "energy: constants are for a different dimension");
  validate(ansatz, n);
  require(eps >= 0.0 && eps < k.p - 1.0, "energy: eps must lie in [0, p-1)");
  const double q = k.p + 1.0 - eps;
  require(q * (n - 2) > n, "energy: |u|^(p+1-eps) is not integrable for this eps");

  EnergyReport rep{};
  const auto& bs = ansatz.bubbles;
  double grad_var = 0.0, ext_var = 0.0, whole_var = 0.0;
  rep.gradient_part = double(bs.size()) * k.moment;
  if (bs.size() == 1) {
    rep.whole_space_part = bubble_whole_mass(n, bs[0].delta, q);
    QuadratureResult ext = bubble_region_mass(domain, Region::exterior, bs[0], q, cfg);
    rep.exterior_part = ext.value;
    ext_var = ext.std_error * ext.std_error;
    rep.n_evals = ext.n_evals;
  } else {
    QuadratureResult inter = interaction(bs[0], bs[1], cfg);
    rep.gradient_part += 2.0 * bs[0].sign * bs[1].sign * inter.value;
    grad_var = 4.0 * inter.std_error * inter.std_error;
    rep.n_evals = inter.n_evals;
    ScalarField g = [&](const Vector& x) { return std::pow(std::abs(ansatz_value(ansatz, x)), q); };
    Vector axis = (bs[1].xi - bs[0].xi).normalized();
    const double mid = axis.dot(0.5 * (bs[0].xi + bs[1].xi));
    for (int side = 0; side < 2; ++side) {
      const Bubble& b = bs[side];
      HalfSpace half{side == 0 ? axis : Vector(-axis), side == 0 ? mid : -mid};
      std::atomic<bool> tail{false};
      RayIntegral ray = pointwise_ray(g, b.xi, b.delta, cfg.far_shells, &tail);
      QuadratureResult whole = polar_integral({nullptr, Region::whole, half}, b.xi, ray, cfg);
      QuadratureResult ext = polar_integral({&domain, Region::exterior, half}, b.xi, ray, cfg);
      if (tail) throw ConvergenceError("energy: shell masses do not decay");
      rep.whole_space_part += whole.value;
      rep.exterior_part += ext.value;
      whole_var += whole.std_error * whole.std_error;
      ext_var += ext.std_error * ext.std_error;
      rep.n_evals += whole.n_evals + ext.n_evals;
    }
  }
  rep.weighted_part = rep.whole_space_part - 2.0 * rep.exterior_part;
  rep.j_eps = 0.5 * rep.gradient_part - rep.weighted_part / q;
  rep.std_error =
      std::sqrt(0.25 * grad_var + (whole_var + 4.0 * ext_var) / (q * q));
  return rep;
}

std::vector<SubResidualRow> expansion_residual_sub(const Domain& domain, double d,
                                                   const Vector& xi,
                                                   const std::vector<double>& eps_list,
                                                   const ModelConstants& k,
                                                   const QuadratureConfig& cfg) {
  const int n = domain.dimension();
  require(k.n == n && xi.size() == n, "expansion_residual_sub: dimension mismatch");
  require(d > 0.0, "expansion_residual_sub: d must be positive");
  require(contains(domain, xi), "expansion_residual_sub: xi must lie inside the domain");
  require(!eps_list.empty(), "expansion_residual_sub: empty eps list");
  for (std::size_t i = 0; i < eps_list.size(); ++i) {
    require(eps_list[i] > 0.0 && eps_list[i] < 0.2, "expansion_residual_sub: eps must lie in (0, 0.2)");
    if (i > 0) require(eps_list[i] < eps_list[i - 1], "expansion_residual_sub: eps list must decrease");
  }
  const double psi = psi_integrals(domain, xi, cfg).value;
  const double Psi = reduced_energy_sub(k, psi, d);
  std::vector<SubResidualRow> rows;
  for (double eps : eps_list) {
    Bubble b{d * std::pow(eps, 1.0 / n), xi, 1};
    EnergyReport e = energy(domain, Ansatz{{b}}, eps, k, cfg);
    QuadratureResult ext = bubble_region_mass(domain, Region::exterior, b, k.p + 1.0, cfg);
    SubResidualRow row;
    row.eps = eps;
    row.delta = b.delta;
    row.j_eps = e.j_eps;
    row.residual_without_psi = (e.j_eps - k.a - k.b * eps - k.c * eps * std::log(eps)) / eps;
    row.residual = row.residual_without_psi - Psi;
    row.exterior_mass_ratio =
        2.0 / (k.p + 1.0) * ext.value / (eps * std::pow(d, n) * k.c1 * psi);
    row.std_error = e.std_error / eps;
    rows.push_back(row);
  }
  return rows;
}

std::vector<HoleResidualRow> expansion_residual_hole(const Domain& domain, double d,
                                                     const Vector& zeta,
                                                     const std::vector<double>& rho_list,
                                                     const ModelConstants& k,
                                                     const QuadratureConfig& cfg) {
  const int n = domain.dimension();
  require(k.n == n && zeta.size() == n, "expansion_residual_hole: dimension mismatch");
  require(d > 0.0, "expansion_residual_hole: d must be positive");
  require(!rho_list.empty(), "expansion_residual_hole: empty rho list");
  for (std::size_t i = 0; i < rho_list.size(); ++i) {
    require(rho_list[i] > 0.0 && rho_list[i] < 1.0, "expansion_residual_hole: rho must lie in (0, 1)");
    if (i > 0) require(rho_list[i] < rho_list[i - 1], "expansion_residual_hole: rho list must decrease");
  }
  const double b1 = hole_b1(k, domain, cfg);
  const double Phi = hole_phi(k, b1, d, zeta);
  const double zeta_factor = std::pow(1.0 + zeta.squaredNorm(), -double(n));
  std::vector<HoleResidualRow> rows;
  for (double rho : rho_list) {
    Domain hole(Ball{Vector::Zero(n), rho});
    Domain punctured = subtract(domain, hole);
    const double delta = d * std::sqrt(rho);
    Bubble b{delta, Vector(delta * zeta), 1};
    EnergyReport e = energy(punctured, Ansatz{{b}}, 0.0, k, cfg);
    QuadratureResult hm = bubble_region_mass(hole, Region::interior, b, k.p + 1.0, cfg);
    const double scale = std::pow(rho, 0.5 * n);
    HoleResidualRow row;
    row.rho = rho;
    row.delta = delta;
    row.j = e.j_eps;
    row.residual = (e.j_eps - k.a) / scale - Phi;
    row.hole_mass_ratio = 2.0 / (k.p + 1.0) * hm.value /
                          (scale * k.b2_hole * std::pow(d, -n) * zeta_factor);
    row.std_error = e.std_error / scale;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace psiland
