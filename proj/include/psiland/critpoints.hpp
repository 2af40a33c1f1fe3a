#pragma once

#include "psiland/landscape.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace psiland {

struct CritConfig {
  int multistart = 4;
  double newton_tol = 1e-6;
  int max_iters = 60;
  double dedupe_radius = 1e-3;
  int string_nodes = 12;
  double morse_tol = 1e-6;

  void validate() const;
};

struct CriticalPoint {
  Vector location;
  double psi_value = 0.0;
  double grad_norm = 0.0;
  std::vector<double> hess_eigs;  // ascending
  int morse_index = 0;
  bool nondegenerate = false;
  double det_ratio = 0.0;  // |det H| / ||H||_op^n
  int component = -1;
};

// Classifies a converged point from its psi evaluation.
CriticalPoint classify(const Domain& domain, const Vector& x, const PsiEvaluation& e,
                       const CritConfig& crit);

// Label of the connected component whose primitive is nearest to x.
int component_of(const Domain& domain, const Vector& x);

struct NewtonOutcome {
  bool converged = false;
  Vector location;
  PsiEvaluation evaluation;
  int iterations = 0;
};

// Noise-aware trust-region Newton. With descent = true steps are regularized
// toward a minimum, otherwise the iteration targets grad psi = 0 directly.
NewtonOutcome newton_solve(const Domain& domain, const Vector& start, bool descent,
                           const CritConfig& crit, const QuadratureConfig& quad);

std::vector<CriticalPoint> find_minima(const Domain& domain, const CritConfig& crit,
                                       const QuadratureConfig& quad);

CriticalPoint mountain_pass(const Domain& domain, const Vector& x1, const Vector& x2,
                            const CritConfig& crit, const QuadratureConfig& quad);

struct CensusReport {
  std::vector<CriticalPoint> points;  // minima first, then saddles
  int cat_lower_bound = 0;
  bool satisfied = false;
  int failed_seeds = 0;
};

CensusReport census(const Domain& domain, const CritConfig& crit, const QuadratureConfig& quad);

struct AuditTrial {
  std::uint64_t seed;
  double rho;
  double theta_c2_norm;
  int point_count;
  std::vector<int> morse_indices;  // sorted
  double min_det_ratio;
  bool nondegenerate;
  bool persisted;  // same count and index multiset as the base domain
};

struct MorseAuditReport {
  CensusReport base;
  std::vector<AuditTrial> trials;
  bool all_nondegenerate = false;
  bool all_persisted = false;
};

// Random field of two Gaussian bumps with C^2 norm rho (empty when rho = 0).
PerturbationField random_perturbation(const Domain& domain, double rho, std::uint64_t seed);

MorseAuditReport morse_audit(const Domain& domain, double rho, int trials, std::uint64_t seed,
                             const CritConfig& crit, const QuadratureConfig& quad);

nlohmann::ordered_json to_json(const CriticalPoint& p);
nlohmann::ordered_json to_json(const CensusReport& r);
nlohmann::ordered_json to_json(const MorseAuditReport& r);

}  // namespace psiland
