#include <doctest.h>

#include "psiland/domain_io.hpp"
#include "psiland/geometry.hpp"
#include "test_support.hpp"

#include <random>

using namespace psiland;
using psiland::test::vec;

TEST_CASE("contains on reference domains") {
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  CHECK(contains(ball, vec(0, 0, 0)));
  CHECK_FALSE(contains(ball, vec(2, 0, 0)));
  CHECK_FALSE(contains(ball, vec(1, 0, 0)));

  Domain bell = test::dumbbell();
  CHECK(contains(bell, vec(0, 0, 0)));
  CHECK(contains(bell, vec(0, 0.29, 0)));
  CHECK_FALSE(contains(bell, vec(0, 0.31, 0)));
  CHECK_THROWS_AS(contains(ball, Vector::Zero(4)), PreconditionError);
}

TEST_CASE("bounding radius is an enclosing radius with bounded slack") {
  auto check = [](const Domain& d, const Vector& c, double exact) {
    double r = bounding_radius(d, c);
    CHECK(r >= exact - 1e-12);
    CHECK(r <= 1.1 * exact);
  };
  check(Domain(Ball{vec(0, 0, 0), 1.0}), vec(0, 0, 0), 1.0);
  check(translate(vec(5, 0, 0), Domain(Ball{vec(0, 0, 0), 1.0})), vec(0, 0, 0), 6.0);
  check(test::two_balls(), vec(0, 0, 0), 3.0);
  check(test::dumbbell(), vec(0, 0, 0), 3.0);
}

TEST_CASE("boundary_nearest on a ball and on a capsule wall") {
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  BoundaryPoint b = boundary_nearest(ball, vec(0.5, 0, 0));
  CHECK((b.location - vec(1, 0, 0)).norm() < 1e-9);
  CHECK((b.inner_normal - vec(-1, 0, 0)).norm() < 1e-9);

  BoundaryPoint c = boundary_nearest(ball, vec(0, 0, 0));
  CHECK(std::abs(c.location.norm() - 1.0) < 1e-9);
  CHECK(std::abs(std::abs(c.location(0)) - 1.0) < 1e-9);
  BoundaryPoint c2 = boundary_nearest(ball, vec(0, 0, 0));
  CHECK(c.location == c2.location);

  BoundaryPoint w = boundary_nearest(test::dumbbell(), vec(0, 0.29, 0));
  CHECK((w.location - vec(0, 0.3, 0)).norm() < 1e-7);
  CHECK((w.inner_normal - vec(0, -1, 0)).norm() < 1e-7);
}

TEST_CASE("boundary_nearest lands on the boundary") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const Domain& d : {Domain(Ball{vec(0, 0, 0), 1.0}), test::two_balls(), test::dumbbell()}) {
    int checked = 0;
    while (checked < 30) {
      Vector x = vec(3 * u(rng), 1.2 * u(rng), 1.2 * u(rng));
      if (!contains(d, x)) continue;
      BoundaryPoint b;
      try {
        b = boundary_nearest(d, x);
      } catch (const ConvergenceError&) {
        continue;
      }
      ++checked;
      CHECK(std::abs(b.inner_normal.norm() - 1.0) < 1e-12);
      CHECK(contains(d, Vector(b.location + 1e-9 * b.inner_normal)));
      CHECK_FALSE(contains(d, Vector(b.location - 1e-9 * b.inner_normal)));
      CHECK(std::abs((x - b.location).norm() + signed_distance_bound(d, x)) <
            1e-6 + 1e-6 * (x - b.location).norm() + std::abs(signed_distance_bound(d, x)));
    }
  }
}

TEST_CASE("boundary_nearest distance matches the ball distance") {
  Domain ball(Ball{vec(1, -1, 0.5), 2.0});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int i = 0; i < 50; ++i) {
    Vector x = vec(1, -1, 0.5) + 1.9 * std::pow(std::uniform_real_distribution<double>()(rng), 1.0 / 3) *
                                     vec(g(rng), g(rng), g(rng)).normalized();
    BoundaryPoint b = boundary_nearest(ball, x);
    CHECK(std::abs((x - b.location).norm() - (2.0 - (x - vec(1, -1, 0.5)).norm())) < 1e-9);
  }
}

TEST_CASE("diameter pairs") {
  DiameterPair ball = diameter_pair(Domain(Ball{vec(0, 0, 0), 1.0}), 512);
  CHECK(std::abs(ball.distance - 2.0) < 1e-9);
  CHECK((ball.first.location + ball.second.location).norm() < 1e-6);
  CHECK(ball.normals_aligned);

  for (const Domain& d : {test::two_balls(), test::dumbbell()}) {
    DiameterPair p = diameter_pair(d, 512);
    CHECK(std::abs(p.distance - 6.0) < 1e-9);
    Vector lo = p.first.location(0) < p.second.location(0) ? p.first.location : p.second.location;
    Vector hi = p.first.location(0) < p.second.location(0) ? p.second.location : p.first.location;
    CHECK((lo - vec(-3, 0, 0)).norm() < 1e-6);
    CHECK((hi - vec(3, 0, 0)).norm() < 1e-6);
    CHECK(p.normals_aligned);
    CHECK(p.distance >= p.sample_max - 1e-12);
    CHECK(p.distance <= 2 * bounding_radius(d, vec(0, 0, 0)) + 1e-12);
  }
  CHECK_THROWS_AS(diameter_pair(Domain(Ball{vec(0, 0, 0), 1.0}), 1), PreconditionError);
}

TEST_CASE("translate and scale wrappers preserve membership") {
  Domain base = test::dumbbell();
  Vector v = vec(0.7, -1.3, 2.1);
  double lambda = 1.7;
  Domain moved = translate(v, base);
  Domain scaled = scale(lambda, base);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.5, 3.5);
  for (int i = 0; i < 1000; ++i) {
    Vector x = vec(u(rng), u(rng) / 2, u(rng) / 2);
    bool in = contains(base, x);
    CHECK(contains(moved, Vector(x + v)) == in);
    CHECK(contains(scaled, Vector(lambda * x)) == in);
  }
}

TEST_CASE("perturbation examples") {
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.5, 1.5);

  Domain same = perturb(ball, PerturbationField(3, {}));
  for (int i = 0; i < 500; ++i) {
    Vector y = vec(u(rng), u(rng), u(rng));
    CHECK(contains(same, y) == contains(ball, y));
  }

  Vector shift = vec(0.3, -0.1, 0.2);
  Domain moved = perturb(ball, PerturbationField(3, {GaussianBump{vec(0, 0, 0), 1e6, shift}}));
  for (int i = 0; i < 500; ++i) {
    Vector y = vec(u(rng), u(rng), u(rng));
    if (std::abs((y - shift).norm() - 1.0) < 1e-6) continue;
    CHECK(contains(moved, y) == contains(ball, Vector(y - shift)));
  }

  CHECK_THROWS_AS(perturb(ball, PerturbationField(3, {GaussianBump{vec(0, 0, 0), 1.0,
                                                                   vec(0.6, 0, 0)}})),
                  PreconditionError);
}

TEST_CASE("single bump perturbation keeps the volume within 5%") {
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  PerturbationField theta(3, {GaussianBump{vec(1, 0, 0), 0.5, vec(1, 0, 0)}});
  theta = PerturbationField(3, {GaussianBump{vec(1, 0, 0), 0.5, vec(0.1 / theta.c2_norm(), 0, 0)}});
  CHECK(std::abs(theta.c2_norm() - 0.1) < 1e-12);
  Domain pert = perturb(ball, theta);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  const int samples = 200000;
  int in_base = 0, in_pert = 0;
  for (int i = 0; i < samples; ++i) {
    Vector y = vec(u(rng), u(rng), u(rng));
    in_base += contains(ball, y);
    in_pert += contains(pert, y);
  }
  double cube = 27.0;
  double vb = cube * in_base / samples, vp = cube * in_pert / samples;
  CHECK(std::abs(vb / (4 * std::numbers::pi / 3) - 1) < 0.02);
  CHECK(std::abs(vp / (4 * std::numbers::pi / 3) - 1) < 0.05);
}

TEST_CASE("perturbation inversion accuracy") {
  PerturbationField theta(3, {GaussianBump{vec(0.5, 0, 0), 0.7, vec(0.05, 0.02, 0)},
                              GaussianBump{vec(-0.5, 0.3, 0), 0.4, vec(0, 0.01, -0.01)}});
  REQUIRE(theta.c2_norm() <= 0.5);
  double s = 0.1 / theta.c2_norm();
  theta = PerturbationField(3, {GaussianBump{vec(0.5, 0, 0), 0.7, s * vec(0.05, 0.02, 0)},
                                GaussianBump{vec(-0.5, 0.3, 0), 0.4, s * vec(0, 0.01, -0.01)}});
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 1000; ++i) {
    Vector y = vec(u(rng), u(rng), u(rng));
    Vector x = theta.invert(y);
    CHECK((x + theta(x) - y).norm() <= 1e-10);
  }
}

TEST_CASE("components and anchors") {
  CHECK(component_count(Domain(Ball{vec(0, 0, 0), 1.0})) == 1);
  CHECK(component_count(test::two_balls()) == 2);
  CHECK(component_count(test::dumbbell()) == 1);
  auto anchors = component_anchors(test::two_balls());
  REQUIRE(anchors.size() == 2);
  for (const auto& a : anchors) CHECK(std::abs(std::abs(a(0)) - 2.0) < 1e-9);
}

TEST_CASE("holes must sit strictly inside") {
  Domain outer(Ball{vec(0, 0, 0), 1.0});
  Domain holed = subtract(outer, Domain(Ball{vec(0, 0, 0), 0.1}));
  CHECK_FALSE(contains(holed, vec(0, 0, 0)));
  CHECK(contains(holed, vec(0.5, 0, 0)));
  CHECK_THROWS_AS(subtract(outer, Domain(Ball{vec(0.95, 0, 0), 0.1})), PreconditionError);
}

TEST_CASE("domain files round trip") {
  Domain d = test::dumbbell();
  Domain back = domain_from_json(domain_to_json(d));
  CHECK(domain_to_json(back) == domain_to_json(d));
  nlohmann::ordered_json bad = {{"dimension", 3}, {"root", {{"type", "cube"}}}};
  CHECK_THROWS_AS(domain_from_json(bad), PreconditionError);
  nlohmann::ordered_json low = {{"dimension", 2},
                                {"root", {{"type", "ball"}, {"center", {0, 0}}, {"radius", 1}}}};
  CHECK_THROWS_AS(domain_from_json(low), PreconditionError);
  CHECK_THROWS_AS(load_domain("/nonexistent/domain.json"), PreconditionError);
}
