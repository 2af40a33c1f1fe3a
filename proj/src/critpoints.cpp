#include "psiland/critpoints.hpp"

#include "psiland/directions.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <limits>
#include <random>

namespace psiland {

namespace {

// Keeps psi_integrals clear of its boundary guard with a factor-2 margin.
bool admissible(const Domain& domain, const Vector& x, const QuadratureConfig& quad) {
  if (!x.allFinite() || !contains(domain, x)) return false;
  double h_min = quad.h_min_factor * bounding_radius(domain, x);
  return -signed_distance_bound(domain, x) >= 2.0 * h_min;
}

Matrix symmetric(const Matrix& h) { return 0.5 * (h + h.transpose()); }

// Applies f(lambda) to the spectrum of a symmetric matrix and multiplies g.
template <class F>
Vector spectral_solve(const Matrix& h, const Vector& g, F f) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric(h));
  Vector coeff = es.eigenvectors().transpose() * g;
  for (int i = 0; i < coeff.size(); ++i) coeff(i) = f(es.eigenvalues()(i)) * coeff(i);
  return es.eigenvectors() * coeff;
}

struct Frame {
  Vector center;
  double radius;
};

// Center of the box around the solid primitives, radius enclosing the domain.
Frame domain_frame(const Domain& domain) {
  const int n = domain.dimension();
  Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const Primitive& p : primitives(domain)) {
    if (p.hole) continue;
    for (const Vector& e : {p.a, p.capsule ? p.b : p.a}) {
      lo = lo.cwiseMin(e - Vector::Constant(n, p.radius));
      hi = hi.cwiseMax(e + Vector::Constant(n, p.radius));
    }
  }
  Vector c = 0.5 * (lo + hi);
  return {c, bounding_radius(domain, c)};
}

Vector uniform_in_ball(const Frame& f, std::mt19937_64& rng) {
  const int n = int(f.center.size());
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = gauss(rng);
  w.normalize();
  return f.center + f.radius * std::pow(unif(rng), 1.0 / n) * w;
}

std::vector<CriticalPoint> minima_impl(const Domain& domain, const CritConfig& crit,
                                       const QuadratureConfig& quad, int* failed) {
  std::vector<Vector> seeds;
  for (const Vector& a : component_anchors(domain))
    if (admissible(domain, a, quad)) seeds.push_back(a);
  // uniform over the union of the primitives' enclosing balls, volume weighted
  std::vector<Frame> pieces;
  std::vector<double> weights;
  for (const Primitive& p : primitives(domain)) {
    if (p.hole) continue;
    double r = p.capsule ? 0.5 * (p.b - p.a).norm() + p.radius : p.radius;
    pieces.push_back({p.capsule ? Vector(0.5 * (p.a + p.b)) : p.a, r});
    weights.push_back(std::pow(r, domain.dimension()));
  }
  for (int i = 0; i < crit.multistart; ++i) {
    std::mt19937_64 rng(stream_seed(quad.seed, 0x5eed0000u + std::uint64_t(i)));
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    for (int tries = 0; tries < 100000; ++tries) {
      Vector x = uniform_in_ball(pieces[pick(rng)], rng);
      if (admissible(domain, x, quad)) {
        seeds.push_back(x);
        break;
      }
    }
  }
  require(!seeds.empty(), "find_minima: no admissible seed inside the domain");
  std::vector<CriticalPoint> found;
  int fails = 0;
  for (const Vector& s : seeds) {
    NewtonOutcome out;
    try {
      out = newton_solve(domain, s, true, crit, quad);
    } catch (const ConvergenceError&) {
      out.converged = false;
    }
    if (!out.converged) {
      ++fails;
      continue;
    }
    CriticalPoint p = classify(domain, out.location, out.evaluation, crit);
    if (p.morse_index != 0) continue;
    bool duplicate = false;
    for (const CriticalPoint& q : found)
      if ((q.location - p.location).norm() <= crit.dedupe_radius) duplicate = true;
    if (!duplicate) found.push_back(p);
  }
  std::stable_sort(found.begin(), found.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    return a.psi_value < b.psi_value;
  });
  if (failed) *failed = fails;
  return found;
}

// Equal arc-length redistribution with fixed endpoints.
std::vector<Vector> reparametrize(const std::vector<Vector>& nodes) {
  const std::size_t m = nodes.size();
  std::vector<double> s(m, 0.0);
  for (std::size_t i = 1; i < m; ++i) s[i] = s[i - 1] + (nodes[i] - nodes[i - 1]).norm();
  std::vector<Vector> out(m);
  out.front() = nodes.front();
  out.back() = nodes.back();
  std::size_t j = 1;
  for (std::size_t i = 1; i + 1 < m; ++i) {
    double target = s.back() * double(i) / double(m - 1);
    while (j + 1 < m && s[j] < target) ++j;
    double span = s[j] - s[j - 1];
    double u = span > 0.0 ? (target - s[j - 1]) / span : 0.0;
    out[i] = nodes[j - 1] + u * (nodes[j] - nodes[j - 1]);
  }
  return out;
}

Vector push_inside(const Domain& domain, Vector x, double depth, const QuadratureConfig& quad) {
  for (int k = 0; k < 8 && !admissible(domain, x, quad); ++k) {
    BoundaryPoint b = boundary_nearest(domain, x);
    x = b.location + depth * b.inner_normal;
    depth *= 2.0;
  }
  if (!admissible(domain, x, quad))
    throw ConvergenceError("mountain_pass: could not place a path node inside the domain");
  return x;
}

}  // namespace

void CritConfig::validate() const {
  require(multistart >= 0, "crit: multistart must be non-negative");
  require(newton_tol > 0.0, "crit: newton_tol must be positive");
  require(max_iters > 0, "crit: max_iters must be positive");
  require(dedupe_radius > 0.0, "crit: dedupe_radius must be positive");
  require(string_nodes >= 8, "crit: string_nodes must be at least 8");
  require(morse_tol > 0.0, "crit: morse_tol must be positive");
}

CriticalPoint classify(const Domain& domain, const Vector& x, const PsiEvaluation& e,
                       const CritConfig& crit) {
  const int n = int(x.size());
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric(e.hessian));
  CriticalPoint p;
  p.location = x;
  p.psi_value = e.value;
  p.grad_norm = e.gradient.norm();
  double op = es.eigenvalues().cwiseAbs().maxCoeff();
  double det = 1.0;
  for (int i = 0; i < n; ++i) {
    double l = es.eigenvalues()(i);
    p.hess_eigs.push_back(l);
    det *= l;
    if (l < 0.0) ++p.morse_index;
  }
  p.det_ratio = op > 0.0 ? std::abs(det) / std::pow(op, n) : 0.0;
  p.nondegenerate = p.det_ratio > crit.morse_tol;
  p.component = component_of(domain, x);
  return p;
}

int component_of(const Domain& domain, const Vector& x) {
  std::vector<Primitive> prims = primitives(domain);
  std::vector<int> labels = component_labels(domain);
  int best = -1;
  double best_gap = std::numeric_limits<double>::infinity();
  std::size_t solid = 0;
  for (const Primitive& p : prims) {
    if (p.hole) continue;
    double dist = p.capsule ? segment_distance(x, p.a, p.b) : (x - p.a).norm();
    double gap = dist - p.radius;
    if (gap < best_gap) {
      best_gap = gap;
      best = labels[solid];
    }
    ++solid;
  }
  return best;
}

NewtonOutcome newton_solve(const Domain& domain, const Vector& start, bool descent,
                           const CritConfig& crit, const QuadratureConfig& quad) {
  crit.validate();
  require(admissible(domain, start, quad), "newton: start point is not inside the guarded domain");
  NewtonOutcome out;
  out.location = start;
  out.evaluation = psi_integrals(domain, start, quad);
  const double scale = bounding_radius(domain, start);
  double radius = 0.25 * scale;
  for (int it = 0; it < crit.max_iters; ++it) {
    out.iterations = it;
    const PsiEvaluation& e = out.evaluation;
    const double gnorm = e.gradient.norm();
    if (gnorm <= crit.newton_tol) {
      out.converged = true;
      return out;
    }
    const Matrix h = symmetric(e.hessian);
    const double hscale = std::max(h.norm(), 1e-300);
    Vector step;
    if (descent) {
      step = -spectral_solve(h, e.gradient, [&](double l) {
        return 1.0 / std::max(std::abs(l), 1e-8 * hscale);
      });
    } else {
      step = -spectral_solve(h, e.gradient, [&](double l) {
        double a = std::max(std::abs(l), 1e-8 * hscale);
        return l < 0.0 ? -1.0 / a : 1.0 / a;
      });
    }
    if (step.norm() > radius) step *= radius / step.norm();
    for (int k = 0; k < 60 && !admissible(domain, out.location + step, quad); ++k) step *= 0.5;
    Vector trial = out.location + step;
    if (!admissible(domain, trial, quad)) break;
    PsiEvaluation et;
    try {
      et = psi_integrals(domain, trial, quad);
    } catch (const ConvergenceError&) {
      radius = 0.25 * step.norm();
      if (radius < 1e-15 * scale) break;
      continue;
    }
    const double predicted = -(e.gradient.dot(step) + 0.5 * step.dot(h * step));
    const double noise = std::sqrt(e.value_error * e.value_error + et.value_error * et.value_error);
    bool accept;
    if (descent && predicted > 3.0 * noise)
      accept = e.value - et.value >= 0.1 * predicted;
    else
      accept = et.gradient.norm() < gnorm;
    if (accept) {
      out.location = trial;
      out.evaluation = std::move(et);
      radius = std::max(radius, 2.0 * step.norm());
    } else {
      radius = 0.25 * step.norm();
      if (radius < 1e-15 * scale) break;
    }
  }
  out.converged = out.evaluation.gradient.norm() <= crit.newton_tol;
  return out;
}

std::vector<CriticalPoint> find_minima(const Domain& domain, const CritConfig& crit,
                                       const QuadratureConfig& quad) {
  crit.validate();
  return minima_impl(domain, crit, quad, nullptr);
}

CriticalPoint mountain_pass(const Domain& domain, const Vector& x1, const Vector& x2,
                            const CritConfig& crit, const QuadratureConfig& quad) {
  crit.validate();
  const int n = domain.dimension();
  require(x1.size() == n && x2.size() == n, "mountain_pass: dimension mismatch");
  const double length = (x2 - x1).norm();
  require(length > crit.dedupe_radius, "mountain_pass: path collapse, the endpoints coincide");
  require(admissible(domain, x1, quad) && admissible(domain, x2, quad),
          "mountain_pass: endpoints must lie inside the guarded domain");
  const int m = crit.string_nodes;
  const double depth = std::max(4.0 * quad.h_min_factor * bounding_radius(domain, x1),
                                0.02 * length);
  std::vector<Vector> nodes(m);
  for (int i = 0; i < m; ++i) {
    nodes[i] = x1 + (x2 - x1) * (double(i) / (m - 1));
    if (i > 0 && i < m - 1) nodes[i] = push_inside(domain, nodes[i], depth, quad);
  }
  nodes = reparametrize(nodes);
  std::vector<PsiEvaluation> evals(m);
  auto evaluate_interior = [&] {
    for (int i = 1; i < m - 1; ++i) evals[i] = psi_integrals(domain, nodes[i], quad);
  };
  for (int it = 0; it < crit.max_iters; ++it) {
    evaluate_interior();
    double seg = 0.0;
    for (int i = 1; i < m; ++i) seg += (nodes[i] - nodes[i - 1]).norm();
    seg /= (m - 1);
    double moved = 0.0;
    std::vector<Vector> next = nodes;
    for (int i = 1; i < m - 1; ++i) {
      Vector tau = (nodes[i + 1] - nodes[i - 1]).normalized();
      Matrix proj = Matrix::Identity(n, n) - tau * tau.transpose();
      Matrix h = proj * symmetric(evals[i].hessian) * proj;
      Vector g = proj * evals[i].gradient;
      const double floor = 1e-3 * std::max(symmetric(evals[i].hessian).norm(), 1e-300);
      Vector step = -proj * spectral_solve(h, g, [&](double l) { return 1.0 / std::max(l, floor); });
      if (step.norm() > 0.25 * seg) step *= 0.25 * seg / step.norm();
      for (int k = 0; k < 60 && !admissible(domain, nodes[i] + step, quad); ++k) step *= 0.5;
      if (!admissible(domain, nodes[i] + step, quad)) step.setZero();
      next[i] = nodes[i] + step;
      moved = std::max(moved, step.norm());
    }
    nodes = reparametrize(next);
    for (int i = 1; i < m - 1; ++i)
      if (!admissible(domain, nodes[i], quad)) nodes[i] = push_inside(domain, nodes[i], depth, quad);
    if (moved < 1e-4 * seg) break;
  }
  evaluate_interior();
  int top = 1;
  for (int i = 2; i < m - 1; ++i)
    if (evals[i].value > evals[top].value) top = i;
  const double end_max = std::max(psi_integrals(domain, x1, quad).value,
                                  psi_integrals(domain, x2, quad).value);
  if (!(evals[top].value > end_max))
    throw ConvergenceError("mountain_pass: path collapse, the endpoints share a basin");
  NewtonOutcome polished = newton_solve(domain, nodes[top], false, crit, quad);
  if (!polished.converged) throw ConvergenceError("mountain_pass: saddle polish did not converge");
  CriticalPoint p = classify(domain, polished.location, polished.evaluation, crit);
  if (p.morse_index < 1)
    throw ConvergenceError("mountain_pass: polish converged to a minimum, the endpoints share a basin");
  return p;
}

CensusReport census(const Domain& domain, const CritConfig& crit, const QuadratureConfig& quad) {
  crit.validate();
  CensusReport r;
  r.points = minima_impl(domain, crit, quad, &r.failed_seeds);
  const std::size_t mins = r.points.size();
  for (std::size_t i = 0; i < mins; ++i) {
    for (std::size_t j = i + 1; j < mins; ++j) {
      if (r.points[i].component != r.points[j].component) continue;
      CriticalPoint s = mountain_pass(domain, r.points[i].location, r.points[j].location, crit, quad);
      bool duplicate = false;
      for (const CriticalPoint& q : r.points)
        if ((q.location - s.location).norm() <= crit.dedupe_radius) duplicate = true;
      if (!duplicate) r.points.push_back(s);
    }
  }
  r.cat_lower_bound = component_count(domain);
  r.satisfied = int(r.points.size()) >= r.cat_lower_bound;
  return r;
}

PerturbationField random_perturbation(const Domain& domain, double rho, std::uint64_t seed) {
  require(rho >= 0.0 && rho < 0.5, "morse_audit: rho must lie in [0, 1/2)");
  const int n = domain.dimension();
  if (rho == 0.0) return PerturbationField(n, {});
  const Frame frame = domain_frame(domain);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  std::vector<GaussianBump> bumps;
  for (int k = 0; k < 2; ++k) {
    GaussianBump b;
    b.center = uniform_in_ball(frame, rng);
    b.width = 0.5 * frame.radius * unif(rng);
    b.displacement = Vector(n);
    for (int i = 0; i < n; ++i) b.displacement(i) = gauss(rng);
    bumps.push_back(b);
  }
  double norm = PerturbationField(n, bumps).c2_norm();
  for (GaussianBump& b : bumps) b.displacement *= rho / norm;
  return PerturbationField(n, bumps);
}

MorseAuditReport morse_audit(const Domain& domain, double rho, int trials, std::uint64_t seed,
                             const CritConfig& crit, const QuadratureConfig& quad) {
  require(rho >= 0.0 && rho < 0.5, "morse_audit: rho must lie in [0, 1/2)");
  require(trials >= 1, "morse_audit: trials must be positive");
  MorseAuditReport rep;
  rep.base = census(domain, crit, quad);
  std::vector<int> base_indices;
  for (const CriticalPoint& p : rep.base.points) base_indices.push_back(p.morse_index);
  std::sort(base_indices.begin(), base_indices.end());
  rep.all_nondegenerate = true;
  rep.all_persisted = true;
  for (int t = 0; t < trials; ++t) {
    AuditTrial trial;
    trial.seed = stream_seed(seed, std::uint64_t(t));
    trial.rho = rho;
    PerturbationField field = random_perturbation(domain, rho, trial.seed);
    trial.theta_c2_norm = field.c2_norm();
    Domain target = field.is_zero() ? domain : perturb(domain, field);
    CensusReport c = census(target, crit, quad);
    trial.point_count = int(c.points.size());
    trial.min_det_ratio = std::numeric_limits<double>::infinity();
    for (const CriticalPoint& p : c.points) {
      trial.morse_indices.push_back(p.morse_index);
      trial.min_det_ratio = std::min(trial.min_det_ratio, p.det_ratio);
    }
    std::sort(trial.morse_indices.begin(), trial.morse_indices.end());
    if (c.points.empty()) trial.min_det_ratio = 0.0;
    trial.nondegenerate = !c.points.empty() && trial.min_det_ratio > crit.morse_tol;
    trial.persisted = trial.morse_indices == base_indices;
    rep.all_nondegenerate = rep.all_nondegenerate && trial.nondegenerate;
    rep.all_persisted = rep.all_persisted && trial.persisted;
    rep.trials.push_back(trial);
  }
  return rep;
}

nlohmann::ordered_json to_json(const CriticalPoint& p) {
  nlohmann::ordered_json j;
  j["location"] = std::vector<double>(p.location.data(), p.location.data() + p.location.size());
  j["psi"] = p.psi_value;
  j["grad_norm"] = p.grad_norm;
  j["hess_eigs"] = p.hess_eigs;
  j["morse_index"] = p.morse_index;
  j["nondegenerate"] = p.nondegenerate;
  j["det_ratio"] = p.det_ratio;
  j["component"] = p.component;
  return j;
}

nlohmann::ordered_json to_json(const CensusReport& r) {
  nlohmann::ordered_json j;
  j["points"] = nlohmann::ordered_json::array();
  for (const CriticalPoint& p : r.points) j["points"].push_back(to_json(p));
  j["cat_lower_bound"] = r.cat_lower_bound;
  j["satisfied"] = r.satisfied;
  j["failed_seeds"] = r.failed_seeds;
  return j;
}

nlohmann::ordered_json to_json(const MorseAuditReport& r) {
  nlohmann::ordered_json j;
  j["base"] = to_json(r.base);
  j["trials"] = nlohmann::ordered_json::array();
  for (const AuditTrial& t : r.trials) {
    nlohmann::ordered_json tj;
    tj["seed"] = t.seed;
    tj["rho"] = t.rho;
    tj["theta_c2_norm"] = t.theta_c2_norm;
    tj["point_count"] = t.point_count;
    tj["morse_indices"] = t.morse_indices;
    tj["min_det_ratio"] = t.min_det_ratio;
    tj["nondegenerate"] = t.nondegenerate;
    tj["persisted"] = t.persisted;
    j["trials"].push_back(tj);
  }
  j["all_nondegenerate"] = r.all_nondegenerate;
  j["all_persisted"] = r.all_persisted;
  return j;
}

}  // namespace psiland
