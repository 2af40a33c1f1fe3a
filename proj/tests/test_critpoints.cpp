#include <doctest.h>

#include "psiland/critpoints.hpp"
#include "test_support.hpp"

using namespace psiland;
using psiland::test::vec;

namespace {

QuadratureConfig census_config() {
  QuadratureConfig q = test::fast_config();
  q.target_rel_err = 1e-2;
  return q;
}

void check_point_invariants(const CensusReport& r, const CritConfig& c) {
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    CHECK(r.points[i].grad_norm <= c.newton_tol);
    int negatives = 0;
    for (double e : r.points[i].hess_eigs) negatives += e < 0;
    CHECK(negatives == r.points[i].morse_index);
    CHECK(std::is_sorted(r.points[i].hess_eigs.begin(), r.points[i].hess_eigs.end()));
    for (std::size_t j = 0; j < i; ++j)
      CHECK((r.points[i].location - r.points[j].location).norm() > c.dedupe_radius);
  }
}

}  // namespace

TEST_CASE("classification from a known Hessian") {
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  PsiEvaluation e;
  e.value = 5.0;
  e.gradient = vec(1e-9, 0, 0);
  e.hessian = Matrix::Zero(3, 3);
  e.hessian.diagonal() << 1.0, -2.0, 3.0;
  CriticalPoint p = classify(ball, vec(0.1, 0, 0), e, CritConfig{});
  CHECK(p.morse_index == 1);
  CHECK(std::abs(p.det_ratio - 6.0 / 27.0) < 1e-14);
  CHECK(p.nondegenerate);
  CHECK(p.hess_eigs == std::vector<double>{-2.0, 1.0, 3.0});
  e.hessian(0, 0) = 1e-9;
  CHECK_FALSE(classify(ball, vec(0.1, 0, 0), e, CritConfig{}).nondegenerate);
}

TEST_CASE("crit config validation") {
  CritConfig c;
  c.string_nodes = 7;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = CritConfig{};
  c.newton_tol = 0;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = CritConfig{};
  c.multistart = -1;
  CHECK_THROWS_AS(c.validate(), PreconditionError);
}

TEST_CASE("ball census") {
  CritConfig c;
  CensusReport r = census(Domain(Ball{vec(0, 0, 0), 1.0}), c, test::fast_config());
  REQUIRE(r.points.size() == 1);
  CHECK(r.points[0].location.norm() < 1e-6);
  CHECK(r.points[0].morse_index == 0);
  CHECK(r.points[0].nondegenerate);
  CHECK(r.cat_lower_bound == 1);
  CHECK(r.satisfied);
  check_point_invariants(r, c);
}

TEST_CASE("scaled ball minimum") {
  CritConfig c;
  QuadratureConfig q = test::fast_config();
  auto unit = find_minima(Domain(Ball{vec(0, 0, 0), 1.0}), c, q);
  auto big = find_minima(scale(2.0, Domain(Ball{vec(0, 0, 0), 1.0})), c, q);
  REQUIRE(unit.size() == 1);
  REQUIRE(big.size() == 1);
  CHECK(big[0].location.norm() < 1e-6);
  CHECK(std::abs(big[0].psi_value / unit[0].psi_value - 0.125) < 1e-9);
}

TEST_CASE("two disjoint balls") {
  CritConfig c;
  CensusReport r = census(test::two_balls(), c, test::fast_config());
  CHECK(r.points.size() == 2);
  CHECK(r.cat_lower_bound == 2);
  CHECK(r.satisfied);
  for (const auto& p : r.points) {
    CHECK(p.morse_index == 0);
    // the neighbouring ball pulls each minimum slightly off its center
    CHECK(std::abs(std::abs(p.location(0)) - 2.0) < 1e-2);
    CHECK(p.location.tail(2).norm() < 1e-6);
  }
  CHECK(r.points[0].component != r.points[1].component);
  CHECK(std::abs(r.points[0].location(0) + r.points[1].location(0)) < 1e-6);
  check_point_invariants(r, c);
}

TEST_CASE("asymmetric union orders the minima by ball size") {
  CritConfig c;
  auto m = find_minima(test::asymmetric(), c, test::fast_config());
  REQUIRE(m.size() == 2);
  CHECK((m[0].location - vec(-2, 0, 0)).norm() < 1.0);
  CHECK((m[1].location - vec(2, 0, 0)).norm() < 0.6);
  CHECK(m[0].psi_value < m[1].psi_value);
  for (const auto& p : m) CHECK(p.morse_index == 0);
}

TEST_CASE("translation and scaling equivariance") {
  CritConfig c;
  QuadratureConfig q = test::fast_config();
  Domain base = test::asymmetric();
  auto m = find_minima(base, c, q);
  Vector v = vec(1.5, -0.5, 2.0);
  auto t = find_minima(translate(v, base), c, q);
  REQUIRE(t.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    CHECK((t[i].location - m[i].location - v).norm() < 10 * c.newton_tol);
  auto s = find_minima(scale(1.5, base), c, q);
  REQUIRE(s.size() == m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    CHECK((s[i].location - 1.5 * m[i].location).norm() < 10 * c.newton_tol);
    CHECK(std::abs(s[i].psi_value / m[i].psi_value - std::pow(1.5, -3)) < 1e-3);
  }
}

TEST_CASE("mountain pass rejects degenerate endpoints") {
  CritConfig c;
  QuadratureConfig q = test::fast_config();
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  CHECK_THROWS_AS(mountain_pass(ball, vec(0, 0, 0), vec(0, 0, 0), c, q), PreconditionError);
  CHECK_THROWS_AS(mountain_pass(ball, vec(-0.3, 0, 0), vec(0.3, 0, 0), c, q), ConvergenceError);
}

TEST_CASE("dumbbell census finds the bridge saddle") {
  CritConfig c;
  CensusReport r = census(test::dumbbell(), c, census_config());
  REQUIRE(r.points.size() == 3);
  CHECK(r.cat_lower_bound == 1);
  CHECK(r.satisfied);
  std::vector<int> idx;
  for (const auto& p : r.points) idx.push_back(p.morse_index);
  CHECK(idx == std::vector<int>{0, 0, 1});
  const CriticalPoint& saddle = r.points[2];
  CHECK(std::abs(saddle.location(0)) < 1e-3);
  CHECK(saddle.location.tail(2).norm() < 0.3);
  CHECK(saddle.psi_value > r.points[0].psi_value);
  CHECK(saddle.psi_value > r.points[1].psi_value);
  check_point_invariants(r, c);
}

TEST_CASE("random perturbations") {
  Domain d = test::dumbbell();
  PerturbationField a = random_perturbation(d, 0.05, 17);
  PerturbationField b = random_perturbation(d, 0.05, 17);
  CHECK(std::abs(a.c2_norm() - 0.05) < 1e-12);
  REQUIRE(a.bumps().size() == b.bumps().size());
  for (std::size_t i = 0; i < a.bumps().size(); ++i) {
    CHECK(a.bumps()[i].center == b.bumps()[i].center);
    CHECK(a.bumps()[i].displacement == b.bumps()[i].displacement);
  }
  CHECK(random_perturbation(d, 0.05, 18).bumps()[0].center != a.bumps()[0].center);
  CHECK(random_perturbation(d, 0.0, 17).is_zero());
  CHECK_THROWS_AS(random_perturbation(d, 0.5, 1), PreconditionError);
}

TEST_CASE("Morse audit on the ball") {
  CritConfig c;
  QuadratureConfig q = census_config();
  Domain ball(Ball{vec(0, 0, 0), 1.0});
  MorseAuditReport zero = morse_audit(ball, 0.0, 1, 3, c, q);
  REQUIRE(zero.trials.size() == 1);
  CHECK(zero.trials[0].persisted);
  CHECK(zero.trials[0].point_count == int(zero.base.points.size()));

  MorseAuditReport r = morse_audit(ball, 0.05, 1, 3, c, q);
  CHECK(r.all_nondegenerate);
  CHECK(r.all_persisted);
  for (const auto& t : r.trials) {
    CHECK(t.morse_indices == std::vector<int>{0});
    CHECK(t.min_det_ratio > c.morse_tol);
  }
}

TEST_CASE("census JSON keeps a stable key order") {
  CensusReport r = census(Domain(Ball{vec(0, 0, 0), 1.0}), CritConfig{}, test::fast_config());
  nlohmann::ordered_json j = to_json(r);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"points", "cat_lower_bound", "satisfied", "failed_seeds"});
  std::vector<std::string> pkeys;
  for (auto it = j["points"][0].begin(); it != j["points"][0].end(); ++it) pkeys.push_back(it.key());
  CHECK(pkeys == std::vector<std::string>{"location", "psi", "grad_norm", "hess_eigs",
                                          "morse_index", "nondegenerate", "det_ratio",
                                          "component"});
  CHECK(to_json(r).dump() == j.dump());
}
