#include "psiland/quadrature.hpp"

#include "psiland/directions.hpp"
#include "psiland/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <array>
#include <limits>

namespace psiland {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kBatch = 2048;

struct Rule {
  std::vector<double> x, w;  // on [-1, 1]
};

template <int N>
Rule make_rule() {
  using G = boost::math::quadrature::gauss<double, N>;
  Rule r;
  const auto& a = G::abscissa();
  const auto& w = G::weights();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0.0) {
      r.x.push_back(0.0);
      r.w.push_back(w[i]);
    } else {
      r.x.push_back(a[i]);
      r.w.push_back(w[i]);
      r.x.push_back(-a[i]);
      r.w.push_back(w[i]);
    }
  }
  return r;
}

const Rule& rule_fine() {
  static const Rule r = make_rule<20>();
  return r;
}

const Rule& rule_shell() {
  static const Rule r = make_rule<10>();
  return r;
}

template <class H>
double gl_linear(H&& h, double a, double b, const Rule& rule, RadialStats* stats) {
  double mid = 0.5 * (a + b), half = 0.5 * (b - a), s = 0.0;
  for (std::size_t i = 0; i < rule.x.size(); ++i) s += rule.w[i] * h(mid + half * rule.x[i]);
  if (stats) stats->nodes += rule.x.size();
  return s * half;
}

template <class H>
double gl_log(H&& h, double a, double b, const Rule& rule, RadialStats* stats) {
  double L = std::log(b / a), s = 0.0;
  for (std::size_t i = 0; i < rule.x.size(); ++i) {
    double r = a * std::exp(0.5 * L * (1.0 + rule.x[i]));
    s += rule.w[i] * h(r) * r;
  }
  if (stats) stats->nodes += rule.x.size();
  return s * 0.5 * L;
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;
};

Moments replicate_moments(const std::vector<double>& v) {
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= double(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.stddev = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
  return m;
}

RadialPieces ray_pieces(const PolarRegion& where, const Vector& center, const Vector& w,
                        double R) {
  RadialPieces pieces;
  switch (where.region) {
    case Region::whole:
      pieces.push_back({0.0, kInf});
      break;
    case Region::interior:
      for (const Interval& iv : inside_intervals(*where.domain, center, w, R))
        pieces.push_back({iv.lo, iv.hi});
      break;
    case Region::exterior: {
      double prev = 0.0;
      for (const Interval& iv : inside_intervals(*where.domain, center, w, R)) {
        if (iv.lo > prev) pieces.push_back({prev, iv.lo});
        prev = iv.hi;
      }
      pieces.push_back({prev, kInf});
      break;
    }
  }
  if (where.clip) {
    double nw = where.clip->normal.dot(w);
    double room = where.clip->offset - where.clip->normal.dot(center);
    double t_clip = nw > 0.0 ? room / nw : (room > 0.0 ? kInf : 0.0);
    RadialPieces clipped;
    for (const RadialPiece& p : pieces)
      if (p.lo < t_clip) clipped.push_back({p.lo, std::min(p.hi, t_clip)});
    pieces.swap(clipped);
  }
  return pieces;
}

}  // namespace

void QuadratureConfig::validate() const {
  require(near_budget >= 1024, "quadrature: near_budget must be at least 1024");
  require(far_shells >= 16, "quadrature: far_shells must be at least 16");
  require(replicates >= 2, "quadrature: replicates must be at least 2");
  require(target_rel_err > 0.0 && target_rel_err < 1.0,
          "quadrature: target_rel_err must lie in (0, 1)");
  require(h_min_factor > 0.0 && h_min_factor < 1.0, "quadrature: h_min_factor must lie in (0, 1)");
}

std::size_t QuadratureConfig::rays_per_replicate() const {
  std::size_t rays = near_budget / std::size_t(replicates);
  rays += rays % 2;
  return std::max<std::size_t>(rays, 2);
}

// ---------------------------------------------------------------------------
// psi

PsiEvaluation psi_integrals(const Domain& domain, const Vector& xi, const QuadratureConfig& cfg) {
  cfg.validate();
  const int n = domain.dimension();
  require(xi.size() == n, "psi_integrals: dimension mismatch");
  require(contains(domain, xi), "psi_integrals: xi must lie inside the domain");
  const double R = bounding_radius(domain, xi);
  const double h_min = cfg.h_min_factor * R;
  const bool guard_certain = -signed_distance_bound(domain, xi) >= h_min;
  const double S = sphere_area(n);
  const std::size_t rays = cfg.rays_per_replicate();
  const std::size_t batches = (rays + kBatch - 1) / kBatch;

  struct Partial {
    double v = 0.0, s2 = 0.0;
    Vector g;
    Matrix m2;
    double min_start = kInf;
  };

  std::vector<double> values(cfg.replicates);
  std::vector<Vector> grads(cfg.replicates);
  std::vector<Matrix> hessians(cfg.replicates);
  double min_start = kInf;

  const double far_value = S * std::pow(R, -n) / n;
  const double far_hess = 2.0 * S * std::pow(R, -n - 2);

  for (int rep = 0; rep < cfg.replicates; ++rep) {
    auto dirs = sphere_directions(n, cfg.seed, rep, rays);
    auto parts = parallel_map<Partial>(batches, cfg.workers, [&](std::size_t b) {
      Partial p;
      p.g = Vector::Zero(n);
      p.m2 = Matrix::Zero(n, n);
      std::size_t end = std::min(rays, (b + 1) * kBatch);
      Vector w(n);
      for (std::size_t k = b * kBatch; k < end; ++k) {
        w = (*dirs)[k];
        IntervalList iv = inside_intervals(domain, xi, w, R);
        double g0 = 0.0, g1 = 0.0, g2 = 0.0;
        double prev = 0.0;
        auto piece = [&](double a, double c) {
          p.min_start = std::min(p.min_start, a);
          if (a <= 0.0) return;
          double ia = 1.0 / a, ib = 1.0 / c;
          double pa = std::pow(ia, n), pb = std::pow(ib, n);
          g0 += (pa - pb) / n;
          pa *= ia, pb *= ib;
          g1 += (pa - pb) / (n + 1);
          pa *= ia, pb *= ib;
          g2 += (pa - pb) / (n + 2);
        };
        for (const Interval& i : iv) {
          if (i.lo > prev) piece(prev, i.lo);
          prev = i.hi;
        }
        if (prev < R) piece(prev, R);
        p.v += g0;
        p.g += g1 * w;
        p.s2 += g2;
        p.m2.noalias() += g2 * w * w.transpose();
      }
      return p;
    });
    Partial total;
    total.g = Vector::Zero(n);
    total.m2 = Matrix::Zero(n, n);
    for (const Partial& p : parts) {
      total.v += p.v;
      total.g += p.g;
      total.s2 += p.s2;
      total.m2 += p.m2;
      total.min_start = std::min(total.min_start, p.min_start);
    }
    min_start = std::min(min_start, total.min_start);
    const double scale = S / double(rays);
    values[rep] = scale * total.v + far_value;
    grads[rep] = (2.0 * n * scale) * total.g;
    Matrix h = (2.0 * n * scale) * ((2.0 * n + 2.0) * total.m2 -
                                    total.s2 * Matrix::Identity(n, n));
    hessians[rep] = 0.5 * (h + h.transpose()) + far_hess * Matrix::Identity(n, n);
  }

  if (!guard_certain && min_start < h_min)
    throw PreconditionError("psi_integrals: xi is closer to the boundary than h_min");

  PsiEvaluation out;
  Moments mv = replicate_moments(values);
  out.value = mv.mean;
  out.value_error = mv.stddev;
  out.gradient = Vector::Zero(n);
  out.gradient_error = Vector::Zero(n);
  out.hessian = Matrix::Zero(n, n);
  out.hessian_error = Matrix::Zero(n, n);
  std::vector<double> comp(cfg.replicates);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < cfg.replicates; ++r) comp[r] = grads[r](i);
    Moments m = replicate_moments(comp);
    out.gradient(i) = m.mean;
    out.gradient_error(i) = m.stddev;
    for (int j = 0; j <= i; ++j) {
      for (int r = 0; r < cfg.replicates; ++r) comp[r] = hessians[r](i, j);
      Moments mh = replicate_moments(comp);
      out.hessian(i, j) = out.hessian(j, i) = mh.mean;
      out.hessian_error(i, j) = out.hessian_error(j, i) = mh.stddev;
    }
  }
  out.n_evals = rays * std::size_t(cfg.replicates);
  if (out.value_error > cfg.target_rel_err * out.value)
    throw ConvergenceError("psi_integrals: replicate spread exceeds target_rel_err");
  return out;
}

// ---------------------------------------------------------------------------
// radial rules and the polar engine

double integrate_radial(const std::function<double(double)>& h, double a, double b, double scale,
                        int max_shells, RadialStats* stats) {
  if (!(b > a)) return 0.0;
  double total = 0.0;
  if (a < scale) {
    double e = std::min(b, scale);
    total += gl_linear(h, a, e, rule_fine(), stats);
    a = e;
    if (a >= b) return total;
  }
  require(a > 0.0, "integrate_radial: a positive scale is needed for pieces starting at 0");
  if (std::isfinite(b)) {
    int k = std::max(1, int(std::ceil(std::log2(b / a) - 1e-12)));
    double ratio = std::pow(b / a, 1.0 / k), r0 = a;
    for (int i = 0; i < k; ++i) {
      double r1 = i == k - 1 ? b : r0 * ratio;
      total += gl_log(h, r0, r1, rule_shell(), stats);
      r0 = r1;
    }
    return total;
  }
  double r0 = a, last = 0.0, before = 0.0;
  int quiet = 0;
  bool done = false;
  for (int j = 0; j < max_shells; ++j) {
    double m = gl_log(h, r0, 2.0 * r0, rule_shell(), stats);
    total += m;
    before = last;
    last = m;
    r0 *= 2.0;
    if (std::abs(m) <= 1e-17 * std::abs(total)) {
      if (++quiet == 2) {
        done = true;
        break;
      }
    } else {
      quiet = 0;
    }
  }
  if (before != 0.0) {
    double ratio = last / before;
    if (!done && (ratio >= 0.95 || ratio < 0.0) && std::abs(last) > 1e-12 * std::abs(total)) {
      if (stats) stats->tail_not_decaying = true;
    } else if (ratio > 0.0 && ratio < 1.0) {
      total += last * ratio / (1.0 - ratio);
    }
  }
  return total;
}

RayIntegral pointwise_ray(const ScalarField& g, const Vector& center, double scale,
                          int max_shells, std::atomic<bool>* tail_flag) {
  return [g, center, scale, max_shells, tail_flag](const Vector& w, const RadialPieces& pieces) {
    const int n = int(center.size());
    double total = 0.0;
    RadialStats stats;
    Vector x(n);
    auto h = [&](double r) {
      x = center + r * w;
      return g(x) * std::pow(r, n - 1);
    };
    for (const RadialPiece& p : pieces) total += integrate_radial(h, p.lo, p.hi, scale, max_shells, &stats);
    if (stats.tail_not_decaying && tail_flag) *tail_flag = true;
    return total;
  };
}

QuadratureResult polar_integral(const PolarRegion& where, const Vector& center,
                                const RayIntegral& integral, const QuadratureConfig& cfg) {
  cfg.validate();
  const int n = int(center.size());
  require(n >= 3 && n <= kMaxDim, "polar_integral: dimension must be in [3, 8]");
  if (where.region != Region::whole) {
    require(where.domain != nullptr, "polar_integral: region needs a domain");
    require(where.domain->dimension() == n, "polar_integral: dimension mismatch");
  }
  const double R = where.domain ? bounding_radius(*where.domain, center) : 0.0;
  const double S = sphere_area(n);
  const std::size_t rays = cfg.rays_per_replicate();
  const std::size_t batches = (rays + kBatch - 1) / kBatch;
  std::vector<double> estimates(cfg.replicates);
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    auto dirs = sphere_directions(n, cfg.seed, rep, rays);
    auto parts = parallel_map<double>(batches, cfg.workers, [&](std::size_t b) {
      double s = 0.0;
      std::size_t end = std::min(rays, (b + 1) * kBatch);
      Vector w(n);
      for (std::size_t k = b * kBatch; k < end; ++k) {
        w = (*dirs)[k];
        RadialPieces pieces = ray_pieces(where, center, w, R);
        if (!pieces.empty()) s += integral(w, pieces);
      }
      return s;
    });
    double total = 0.0;
    for (double p : parts) total += p;
    estimates[rep] = S * total / double(rays);
  }
  Moments m = replicate_moments(estimates);
  return {m.mean, m.stddev, rays * std::size_t(cfg.replicates)};
}

QuadratureResult exterior_lp_mass(const Domain& domain, const ScalarField& f, double p,
                                  const QuadratureConfig& cfg, const Vector& center,
                                  double scale) {
  require(p >= 1.0, "exterior_lp_mass: p must be at least 1");
  require(center.size() == domain.dimension(), "exterior_lp_mass: dimension mismatch");
  std::atomic<bool> tail{false};
  ScalarField g = [&f, p](const Vector& x) { return std::pow(std::abs(f(x)), p); };
  PolarRegion where{&domain, Region::exterior, std::nullopt};
  QuadratureResult r =
      polar_integral(where, center, pointwise_ray(g, center, scale, cfg.far_shells, &tail), cfg);
  if (tail) throw ConvergenceError("exterior_lp_mass: shell masses do not decay (non-integrable)");
  return r;
}

QuadratureResult exterior_lp_mass(const Domain& domain, const ScalarField& f, double p,
                                  const QuadratureConfig& cfg) {
  Vector center = Vector::Zero(domain.dimension());
  return exterior_lp_mass(domain, f, p, cfg, center, 0.05 * bounding_radius(domain, center));
}

// ---------------------------------------------------------------------------
// bubble moments

double bubble_moment(int n, double power, bool log_weight) {
  require(n >= 3 && n <= kMaxDim, "bubble_moment: dimension must be in [3, 8]");
  require(power * (n - 2) > n, "bubble_moment: power*(n-2) must exceed n");
  const double alpha = bubble_alpha(n);
  const double m = 0.5 * (n - 2);
  const double ln_alpha = std::log(alpha);
  auto h = [&](double r) {
    double lnu = ln_alpha - m * std::log1p(r * r);
    double v = std::exp(power * lnu) * std::pow(r, n - 1);
    return log_weight ? v * lnu : v;
  };
  double inner = gl_linear(h, 0.0, 0.5, rule_fine(), nullptr) +
                 gl_linear(h, 0.5, 1.0, rule_fine(), nullptr);
  double total = inner, last = 0.0, before = 0.0;
  double r0 = 1.0;
  for (int j = 0; j < 4000; ++j) {
    double piece = gl_log(h, r0, 2.0 * r0, rule_fine(), nullptr);
    total += piece;
    before = last;
    last = piece;
    r0 *= 2.0;
    if (j > 4 && std::abs(piece) <= 1e-18 * std::abs(total)) break;
  }
  if (before != 0.0) {
    double ratio = last / before;
    if (ratio > 0.0 && ratio < 1.0) total += last * ratio / (1.0 - ratio);
  }
  return sphere_area(n) * total;
}

}  // namespace psiland
