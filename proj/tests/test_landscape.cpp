#include <doctest.h>

#include "psiland/landscape.hpp"
#include "test_oracles.hpp"
#include "test_support.hpp"

#include <random>

using namespace psiland;
using psiland::test::axis;
using psiland::test::vec;

namespace {

BoundaryPoint boundary(const Vector& location, const Vector& normal) {
  return BoundaryPoint{location, normal};
}

}  // namespace

TEST_CASE("model constants for n = 4") {
  const double pi = std::numbers::pi;
  ModelConstants k = constants(4);
  CHECK(k.p == 3.0);
  CHECK(std::abs(k.alpha_n - std::sqrt(8.0)) < 1e-12);
  CHECK(std::abs(k.c1 - 32.0) < 1e-10);
  CHECK(std::abs(k.c2 - 8 * pi * pi / 3) < 1e-9);
  CHECK(std::abs(k.a - 8 * pi * pi / 3) < 1e-9);
  CHECK(std::abs(-k.c * 16 - 4 * k.a) < 1e-9);
}

TEST_CASE("model constants across dimensions") {
  for (int n = 3; n <= 8; ++n) {
    ModelConstants k = constants(n);
    double p = (n + 2.0) / (n - 2.0);
    CHECK(std::abs(k.alpha_n - std::pow(double(n * (n - 2)), (n - 2) / 4.0)) <=
          1e-12 * k.alpha_n);
    CHECK(std::abs(k.a - k.moment / n) <= 1e-12 * k.a);
    CHECK(std::abs(-k.c * (p + 1) * (p + 1) - n * k.a) <= 1e-10 * k.a);
    CHECK(std::abs(k.c1 - 2 * std::pow(k.alpha_n, p + 1) / (p + 1)) <= 1e-12 * k.c1);
    CHECK(std::abs(k.c2_nodal - n / ((p + 1) * (p + 1)) * k.moment) <= 1e-12 * k.c2_nodal);
    CHECK(std::abs(k.c3_nodal - (n - 2) * k.D_interaction) <= 1e-12 * k.c3_nodal);
    CHECK(k.c1_nodal == k.D_interaction);
    // int (1 + |y|^2)^{-(n+2)/2} = |B_1| since the radial integral is B(n/2, 1)/2 = 1/n
    CHECK(std::abs(k.D_interaction - std::pow(k.alpha_n, p + 1) * ball_volume(n)) <=
          1e-9 * k.D_interaction);
    CHECK(std::abs(k.b2_hole - 2 / (p + 1) * std::pow(k.alpha_n, p + 1) * ball_volume(n)) <=
          1e-12 * k.b2_hole);
    // far side of a plane at unit distance: pi^{(n-1)/2} Gamma((n+1)/2) / (n Gamma(n))
    double half = std::pow(std::numbers::pi, (n - 1) / 2.0) * std::tgamma((n + 1) / 2.0) /
                  (n * std::tgamma(double(n)));
    CHECK(std::abs(k.halfspace_integral - half) <= 1e-9 * half);
    for (double v : {k.c1, k.c2, k.c1_nodal, k.c2_nodal, k.c3_nodal, k.c4_nodal, k.D_interaction,
                     k.b2_hole})
      CHECK(v > 0);
  }
  CHECK_THROWS_AS(constants(2), PreconditionError);
  CHECK_THROWS_AS(constants(9), PreconditionError);
  CHECK_THROWS_AS(constants(3, -1.0), PreconditionError);
  CHECK(constants(3, 2.5).c2_nodal == 2.5);
}

TEST_CASE("constants table is keyed by symbol names") {
  auto rows = constants_table(constants(3));
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(std::get<0>(r));
  for (const char* want : {"alpha_n", "a", "b", "c", "c1", "c2", "c1_nodal", "c2_nodal",
                           "c3_nodal", "c4_nodal", "D", "b2_hole"})
    CHECK(std::find(names.begin(), names.end(), want) != names.end());
}

TEST_CASE("subcritical reduced energy") {
  ModelConstants k = constants(3);
  double psi = 2.7;
  CHECK(std::abs(reduced_energy_sub(k, psi, 1.0) - k.c1 * psi) < 1e-12);
  double d = 0.8;
  CHECK(std::abs(reduced_energy_sub(k, 2 * psi, d) - reduced_energy_sub(k, psi, d) -
                 k.c1 * std::pow(d, 3) * psi) < 1e-12);
  double dstar = optimal_d(k, psi);
  double h = 1e-5 * dstar;
  double deriv = (reduced_energy_sub(k, psi, dstar + h) - reduced_energy_sub(k, psi, dstar - h)) /
                 (2 * h);
  CHECK(std::abs(deriv) < 1e-8);
  CHECK(std::abs(optimal_d(k, k.c2 / (3 * k.c1)) - 1.0) < 1e-14);
  CHECK(std::abs(optimal_d(k, 4 * psi) / dstar - std::pow(4.0, -1.0 / 3)) < 1e-14);
  CHECK_THROWS_AS(optimal_d(k, 0.0), PreconditionError);
  CHECK_THROWS_AS(reduced_energy_sub(k, psi, 0.0), PreconditionError);
}

TEST_CASE("optimal_d matches golden-section search") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int n : {3, 4, 6}) {
    ModelConstants k = constants(n);
    for (int i = 0; i < 20; ++i) {
      double psi = std::pow(10.0, u(rng));
      double d = optimal_d(k, psi);
      // extended precision keeps the flat minimum resolvable below 1e-8
      using R = long double;
      std::function<R(R)> f = [&](R x) {
        return R(k.c1) * std::pow(x, R(n)) * R(psi) - R(k.c2) * std::log(x);
      };
      R g = test::golden_section<R>(f, R(1e-6) * d, R(1e3) * d, R(1e-15));
      CHECK(std::abs(double(g) / d - 1) < 1e-8);
    }
  }
}

TEST_CASE("reduced energy point gradient") {
  ModelConstants k = constants(3);
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  PsiEvaluation e = psi_integrals(ball, vec(0.2, 0.1, 0), test::fast_config());
  ReducedEnergyPoint pt = reduced_energy_sub_point(k, e, 0.9);
  CHECK(pt.regime == Regime::subcritical);
  CHECK(std::abs(pt.value - reduced_energy_sub(k, e.value, 0.9)) < 1e-12);
  double h = 1e-6;
  double fd = (reduced_energy_sub(k, e.value, 0.9 + h) - reduced_energy_sub(k, e.value, 0.9 - h)) /
              (2 * h);
  CHECK(std::abs(pt.gradient(0) - fd) < 1e-6 * std::abs(fd) + 1e-8);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(pt.gradient(1 + i) - k.c1 * std::pow(0.9, 3) * e.gradient(i)) < 1e-10);
}

TEST_CASE("argmin of the minimized reduced energy follows psi") {
  ModelConstants k = constants(3);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 50);
  std::vector<double> psi(40);
  for (double& v : psi) v = u(rng);
  auto min_psi = std::min_element(psi.begin(), psi.end()) - psi.begin();
  for (double lambda : {1.0, 0.01, 100.0}) {
    std::size_t best = 0;
    double best_val = INFINITY;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      double val = reduced_energy_sub(k, lambda * psi[i], optimal_d(k, lambda * psi[i]));
      if (val < best_val) best_val = val, best = i;
    }
    CHECK(long(best) == min_psi);
    CHECK(std::abs(optimal_d(k, lambda * psi[0]) / optimal_d(k, psi[0]) -
                   std::pow(lambda, -1.0 / 3)) < 1e-12);
  }
}

TEST_CASE("subcritical rate prediction") {
  ModelConstants k = constants(3);
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  QuadratureConfig q = test::fast_config();
  RatePrediction a = predict_subcritical(ball, 0.01, vec(0, 0, 0), k, q);
  RatePrediction b = predict_subcritical(ball, 0.005, vec(0, 0, 0), k, q);
  CHECK(std::abs(b.delta[0] / a.delta[0] - std::pow(2.0, -1.0 / 3)) < 1e-12);
  double expected = std::cbrt(k.c2 / (3 * k.c1 * 4 * std::numbers::pi / 3));
  CHECK(std::abs(a.delta[0] / std::cbrt(0.01) - expected) < 1e-9 * expected);
  RatePrediction one = predict_subcritical(1.0, vec(0, 0, 0), 4 * std::numbers::pi / 3, k);
  CHECK(std::abs(one.delta[0] - expected) < 1e-12);
  CHECK(a.xi[0] == vec(0, 0, 0));
  CHECK_THROWS_AS(predict_subcritical(0.0, vec(0, 0, 0), 1.0, k), PreconditionError);
}

TEST_CASE("nodal reduced energy") {
  ModelConstants k = constants(3);
  BoundaryPoint e1 = boundary(vec(-1, 0, 0), vec(1, 0, 0));
  BoundaryPoint e2 = boundary(vec(1, 0, 0), vec(-1, 0, 0));
  CHECK(std::abs(reduced_energy_nodal(k, 2.0, 0.5, 1, 1, e1, e2, 0.0) - k.c1_nodal / 2.0) < 1e-12);

  BoundaryPoint f1 = boundary(vec(-1, 0.2, 0), vec(0.9, -0.1, 0).normalized());
  BoundaryPoint f2 = boundary(vec(0.7, -0.3, 0.5), vec(-0.5, 0.3, -0.4).normalized());
  double v12 = reduced_energy_nodal(k, 0.7, 1.3, 0.4, 2.2, f1, f2, 0.3);
  double v21 = reduced_energy_nodal(k, 1.3, 0.7, 2.2, 0.4, f2, f1, 0.3);
  CHECK(v12 == doctest::Approx(v21).epsilon(1e-14));

  // antipodal pair: the pairing term equals +c3 (d1 d2)^{(n-2)/2} lambda (t1 + t2)
  double lambda = 2.0 / std::pow(2.0, 3);
  double ups = nodal_upsilon_term(k, 0.6, 0.8, 0.3, 0.5, e1, e2);
  double expected = k.c3_nodal * std::sqrt(0.6 * 0.8) * lambda * 0.8 +
                    k.c4_nodal * (std::pow(0.6 / 0.3, 3) + std::pow(0.8 / 0.5, 3));
  CHECK(std::abs(ups - expected) < 1e-12 * expected);

  CHECK_THROWS_AS(nodal_xi_term(k, 1, 1, e1, e1), PreconditionError);
  CHECK_THROWS_AS(nodal_xi_term(k, -1, 1, e1, e2), PreconditionError);
}

TEST_CASE("nodal s_bar is stationary for the printed s-function") {
  for (int n : {3, 4, 5}) {
    ModelConstants k = constants(n);
    BoundaryPoint e1 = boundary(axis(n, -1.5), axis(n, 1));
    BoundaryPoint e2 = boundary(axis(n, 1.5), axis(n, -1));
    double s = nodal_s_bar(k, 3.0);
    // with d1 = d2 = s the Xi term is c1 s^{n-2}/r^{n-2} - 2 c2 ln s
    auto xi = [&](double x) { return nodal_xi_term(k, x, x, e1, e2); };
    double h = 1e-5 * s;
    double deriv = (xi(s - 2 * h) - 8 * xi(s - h) + 8 * xi(s + h) - xi(s + 2 * h)) / (12 * h);
    CHECK(std::abs(deriv) < 1e-8 * std::max(1.0, k.c2_nodal / s));
  }
  for (int n : {3, 4, 6}) {
    ModelConstants base = constants(n);
    ModelConstants k = constants(n, base.c1_nodal * (n - 2) / 2.0);
    CHECK(std::abs(nodal_s_bar(k, 1.0) - 1.0) < 1e-14);
  }
}

TEST_CASE("nodal inner minimum") {
  for (int n : {3, 4}) {
    ModelConstants k = constants(n);
    double s = 0.7, lam = 0.3;
    double r, t1, t2;
    nodal_inner_minimum(k, s, lam, lam, r, t1, t2);
    double A = k.c3_nodal * std::pow(s, n - 2) * lam;
    CHECK(std::abs(r - std::sqrt(s)) < 1e-10);
    double t = std::pow(n * k.c4_nodal * std::pow(s, n / 2.0) / A, 1.0 / (n + 1));
    CHECK(std::abs(t1 - t) < 1e-10 * t);
    CHECK(std::abs(t2 - t) < 1e-10 * t);

    double l2 = 0.9;
    nodal_inner_minimum(k, s, lam, l2, r, t1, t2);
    auto F = [&](double rr, double a, double b) {
      return k.c3_nodal * std::pow(s, n - 2) * (lam * a + l2 * b) +
             k.c4_nodal * (std::pow(rr / a, n) + std::pow(s / (rr * b), n));
    };
    double base = F(r, t1, t2);
    for (double f : {0.999, 1.001}) {
      CHECK(F(r * f, t1, t2) >= base);
      CHECK(F(r, t1 * f, t2) >= base);
      CHECK(F(r, t1, t2 * f) >= base);
    }
    double rr = 0, a = 0, b = 0;
    CHECK_THROWS_AS(nodal_inner_minimum(k, s, -1.0, lam, rr, a, b), PreconditionError);
  }
}

TEST_CASE("nodal limits and power laws on the unit ball") {
  ModelConstants k = constants(3);
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  NodalLimits lim = nodal_limits(ball, k);
  CHECK(std::abs(lim.r - 2.0) < 1e-9);
  CHECK(std::abs(lim.lambda1 - 0.25) < 1e-9);
  CHECK(std::abs(lim.lambda2 - 0.25) < 1e-9);
  CHECK(std::abs(lim.t1_bar - lim.t2_bar) < 1e-9);
  RatePrediction a = predict_nodal(lim, 1e-3, 3);
  RatePrediction b = predict_nodal(lim, 5e-4, 3);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::abs(b.delta[i] / a.delta[i] - std::pow(2.0, -1.0)) < 1e-12);
    CHECK(std::abs(b.tau[i] / a.tau[i] - std::pow(2.0, -2.0 / 4)) < 1e-12);
    Vector eta = i == 0 ? lim.eta1.location : lim.eta2.location;
    CHECK((b.xi[i] - eta).norm() < (a.xi[i] - eta).norm());
    CHECK(contains(ball, b.xi[i]));
  }
  CHECK(std::abs(a.d[0] * a.d[1] - lim.s_bar) < 1e-12);
  CHECK(std::abs(nodal_eps_power_scale(3, 1e-3) - std::pow(1e-3, 2.0 / 4)) < 1e-15);
}

TEST_CASE("hole reduced energy") {
  ModelConstants k = constants(3);
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  QuadratureConfig q = test::fast_config();
  double b1 = hole_b1(k, ball, q);
  CHECK(std::abs(b1 - k.c1 * 4 * std::numbers::pi / 3) < 1e-9 * b1);
  Vector z0 = vec(0, 0, 0);
  CHECK(std::abs(reduced_energy_hole(k, ball, 1.0, z0, q) - (b1 + k.b2_hole)) < 1e-9 * b1);
  double prev = hole_phi(k, b1, 0.8, z0);
  for (double r : {0.1, 0.5, 1.0, 3.0}) {
    double v = hole_phi(k, b1, 0.8, vec(r, 0, 0));
    CHECK(v < prev);
    prev = v;
  }
  CHECK(hole_phi(k, b1, 1e-6, z0) > 1e12);
  CHECK(hole_phi(k, b1, 1e6, z0) > 1e12);
  CHECK_THROWS_AS(hole_b1(k, Domain(Ball{vec(3, 0, 0), 1.0}), q), PreconditionError);
  CHECK_THROWS_AS(hole_phi(k, b1, 0.0, z0), PreconditionError);
}

TEST_CASE("hole Phi derivatives match finite differences") {
  ModelConstants k = constants(4);
  double b1 = 3.0;
  Vector z = Vector::Zero(4);
  z << 0.3, -0.2, 0.1, 0.05;
  double d = 0.9;
  Eigen::VectorXd g = hole_phi_gradient(k, b1, d, z);
  Eigen::MatrixXd H = hole_phi_hessian(k, b1, d, z);
  auto phi = [&](const Eigen::VectorXd& v) { return hole_phi(k, b1, v(0), Vector(v.tail(4))); };
  Eigen::VectorXd x(5);
  x << d, z;
  const double h = 1e-5;
  for (int i = 0; i < 5; ++i) {
    Eigen::VectorXd p = x, m = x;
    p(i) += h;
    m(i) -= h;
    CHECK(std::abs((phi(p) - phi(m)) / (2 * h) - g(i)) < 1e-6 * (1 + std::abs(g(i))));
    Eigen::VectorXd gp = hole_phi_gradient(k, b1, p(0), Vector(p.tail(4)));
    Eigen::VectorXd gm = hole_phi_gradient(k, b1, m(0), Vector(m.tail(4)));
    for (int j = 0; j < 5; ++j)
      CHECK(std::abs((gp(j) - gm(j)) / (2 * h) - H(j, i)) < 1e-6 * (1 + std::abs(H(j, i))));
  }
}

TEST_CASE("hole critical point is a nondegenerate saddle") {
  for (int n : {3, 4, 5}) {
    ModelConstants k = constants(n);
    HoleCriticalPoint eq = hole_critical_point(k, k.b2_hole);
    CHECK(std::abs(eq.d0 - 1.0) < 1e-14);
    for (double b1 : {0.3, 7.0}) {
      HoleCriticalPoint cp = hole_critical_point(k, b1);
      CHECK(std::abs(cp.d0 - std::pow(k.b2_hole / b1, 1.0 / (2 * n))) < 1e-14 * cp.d0);
      CHECK(cp.zeta.norm() == 0.0);
      CHECK(cp.positive_directions == 1);
      CHECK(cp.negative_directions == n);
      CHECK(std::abs(n * b1 * std::pow(cp.d0, n - 1) - n * k.b2_hole * std::pow(cp.d0, -n - 1)) <
            1e-10 * n * b1);

      Eigen::VectorXd start(n + 1);
      start(0) = 1.1 * cp.d0;
      for (int i = 1; i <= n; ++i) start(i) = 0.02 * i;
      Eigen::VectorXd found = test::fd_newton_critical(
          [&](const Eigen::VectorXd& v) { return hole_phi(k, b1, v(0), Vector(v.tail(n))); },
          start);
      CHECK(std::abs(found(0) - cp.d0) < 1e-8 * cp.d0);
      CHECK(found.tail(n).norm() < 1e-8);
    }
    CHECK_THROWS_AS(hole_critical_point(k, 0.0), PreconditionError);
  }
}

TEST_CASE("hole rate prediction") {
  RatePrediction r = predict_hole(1e-4, 1.3, 3);
  CHECK(std::abs(r.delta[0] - 1.3e-2) < 1e-15);
  CHECK(r.xi[0].norm() == 0.0);
  CHECK(std::string(regime_name(Regime::hole)) == "hole");
}
