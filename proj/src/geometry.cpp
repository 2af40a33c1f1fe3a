#include "psiland/geometry.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include <algorithm>
#include <limits>
#include <numeric>

namespace psiland {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_vector(const Vector& v, int dim, const char* what) {
  require(v.size() == dim, std::string(what) + ": dimension mismatch");
  require(v.allFinite(), std::string(what) + ": non-finite coordinate");
}

int checked_dim(const Vector& v) {
  require(v.size() >= 3 && v.size() <= kMaxDim, "dimension must be in [3, 8]");
  require(v.allFinite(), "non-finite coordinate");
  return int(v.size());
}

// ---------------------------------------------------------------------------
// signed distance bounds

struct SdfGrad {
  double value;
  Vector grad;
};

Vector unit_or_axis(const Vector& v) {
  double nv = v.norm();
  if (nv > 1e-300) return v / nv;
  Vector e = Vector::Zero(v.size());
  e(0) = 1.0;
  return e;
}

// Closest point to x on segment [a, b].
Vector segment_closest(const Vector& x, const Vector& a, const Vector& b) {
  Vector ab = b - a;
  double L2 = ab.squaredNorm();
  if (L2 == 0.0) return a;
  double s = std::clamp((x - a).dot(ab) / L2, 0.0, 1.0);
  return a + s * ab;
}

// Unit vector perpendicular to axis u (first coordinate axis preferred).
Vector perpendicular_to(const Vector& u) {
  const int n = int(u.size());
  int best = 0;
  for (int k = 1; k < n; ++k)
    if (std::abs(u(k)) < std::abs(u(best))) best = k;
  Vector e = Vector::Zero(n);
  e(best) = 1.0;
  return (e - e.dot(u) * u).normalized();
}

double sdf(const DomainNode& node, const Vector& x);

SdfGrad sdf_grad(const DomainNode& node, const Vector& x) {
  return std::visit(
      overloaded{
          [&](const Ball& b) -> SdfGrad {
            Vector d = x - b.center;
            return {d.norm() - b.radius, unit_or_axis(d)};
          },
          [&](const Capsule& c) -> SdfGrad {
            Vector q = segment_closest(x, c.a, c.b);
            Vector d = x - q;
            double nd = d.norm();
            if (nd > 1e-300) return {nd - c.radius, d / nd};
            Vector u = c.b - c.a;
            Vector g = u.norm() > 0 ? perpendicular_to(u.normalized()) : unit_or_axis(d);
            return {-c.radius, g};
          },
          [&](const UnionNode& u) -> SdfGrad {
            SdfGrad l = sdf_grad(*u.left, x), r = sdf_grad(*u.right, x);
            return l.value <= r.value ? l : r;
          },
          [&](const DifferenceNode& d) -> SdfGrad {
            SdfGrad l = sdf_grad(*d.left, x), r = sdf_grad(*d.right, x);
            if (l.value >= -r.value) return l;
            return {-r.value, -r.grad};
          },
          [&](const TranslateNode& t) -> SdfGrad { return sdf_grad(*t.inner, x - t.offset); },
          [&](const ScaleNode& s) -> SdfGrad {
            SdfGrad g = sdf_grad(*s.inner, x / s.factor);
            return {s.factor * g.value, g.grad};
          },
          [&](const PerturbedNode& p) -> SdfGrad {
            Vector base = p.field.invert(x, 1e-14);
            SdfGrad g = sdf_grad(*p.inner, base);
            Matrix jt = (Matrix::Identity(x.size(), x.size()) + p.field.jacobian(base)).transpose();
            Vector grad = jt.partialPivLu().solve(g.grad);
            return {(1.0 - p.lipschitz) * g.value, grad};
          },
      },
      node.kind);
}

double sdf(const DomainNode& node, const Vector& x) {
  return std::visit(
      overloaded{
          [&](const Ball& b) { return (x - b.center).norm() - b.radius; },
          [&](const Capsule& c) { return segment_distance(x, c.a, c.b) - c.radius; },
          [&](const UnionNode& u) { return std::min(sdf(*u.left, x), sdf(*u.right, x)); },
          [&](const DifferenceNode& d) { return std::max(sdf(*d.left, x), -sdf(*d.right, x)); },
          [&](const TranslateNode& t) { return sdf(*t.inner, x - t.offset); },
          [&](const ScaleNode& s) { return s.factor * sdf(*s.inner, x / s.factor); },
          [&](const PerturbedNode& p) {
            return (1.0 - p.lipschitz) * sdf(*p.inner, p.field.invert(x));
          },
      },
      node.kind);
}

double bound_radius(const DomainNode& node, const Vector& c) {
  return std::visit(
      overloaded{
          [&](const Ball& b) { return (b.center - c).norm() + b.radius; },
          [&](const Capsule& k) {
            return std::max((k.a - c).norm(), (k.b - c).norm()) + k.radius;
          },
          [&](const UnionNode& u) {
            return std::max(bound_radius(*u.left, c), bound_radius(*u.right, c));
          },
          [&](const DifferenceNode& d) { return bound_radius(*d.left, c); },
          [&](const TranslateNode& t) { return bound_radius(*t.inner, c - t.offset); },
          [&](const ScaleNode& s) { return s.factor * bound_radius(*s.inner, c / s.factor); },
          [&](const PerturbedNode& p) { return bound_radius(*p.inner, c) + p.field.sup_bound(); },
      },
      node.kind);
}

// ---------------------------------------------------------------------------
// ray intervals

void push_clipped(IntervalList& out, double lo, double hi, double t_max) {
  lo = std::max(lo, 0.0);
  hi = std::min(hi, t_max);
  if (lo < hi) out.push_back({lo, hi});
}

void merge_sorted(IntervalList& v) {
  std::sort(v.begin(), v.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  IntervalList out;
  for (const Interval& iv : v) {
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  v.swap(out);
}

IntervalList subtract_intervals(const IntervalList& a, const IntervalList& b) {
  IntervalList out;
  for (Interval iv : a) {
    double lo = iv.lo;
    for (const Interval& cut : b) {
      if (cut.hi <= lo || cut.lo >= iv.hi) continue;
      if (cut.lo > lo) out.push_back({lo, cut.lo});
      lo = std::max(lo, cut.hi);
      if (lo >= iv.hi) break;
    }
    if (lo < iv.hi) out.push_back({lo, iv.hi});
  }
  return out;
}

// Roots of A t^2 + 2 B t + C < 0 with A > 0.
bool quadratic_interval(double A, double B, double C, double& lo, double& hi) {
  double disc = B * B - A * C;
  if (disc <= 0.0) return false;
  double s = std::sqrt(disc);
  double q = -(B + std::copysign(s, B));
  double r1 = q / A;
  double r2 = q != 0.0 ? C / q : -B / A;
  lo = std::min(r1, r2);
  hi = std::max(r1, r2);
  return true;
}

bool ball_chord(const Vector& c, double r, const Vector& o, const Vector& d, double& lo,
                double& hi) {
  Vector oc = o - c;
  return quadratic_interval(d.squaredNorm(), oc.dot(d), oc.squaredNorm() - r * r, lo, hi);
}

bool capsule_chord(const Capsule& k, const Vector& o, const Vector& d, double& lo, double& hi) {
  lo = kInf;
  hi = -kInf;
  double l, h;
  if (ball_chord(k.a, k.radius, o, d, l, h)) lo = std::min(lo, l), hi = std::max(hi, h);
  if (ball_chord(k.b, k.radius, o, d, l, h)) lo = std::min(lo, l), hi = std::max(hi, h);
  Vector ab = k.b - k.a;
  double L = ab.norm();
  if (L > 0.0) {
    Vector u = ab / L;
    Vector w0 = o - k.a;
    double du = d.dot(u), wu = w0.dot(u);
    double A = d.squaredNorm() - du * du;
    double B = w0.dot(d) - wu * du;
    double C = w0.squaredNorm() - wu * wu - k.radius * k.radius;
    double cl = -kInf, ch = kInf;
    bool cyl = true;
    if (A <= 1e-14 * d.squaredNorm())
      cyl = C < 0.0;
    else
      cyl = quadratic_interval(A, B, C, cl, ch);
    if (cyl) {
      double sl, sh;
      if (std::abs(du) <= 1e-300) {
        sl = (wu > 0.0 && wu < L) ? -kInf : kInf;
        sh = (wu > 0.0 && wu < L) ? kInf : -kInf;
      } else {
        sl = std::min(-wu / du, (L - wu) / du);
        sh = std::max(-wu / du, (L - wu) / du);
      }
      double il = std::max(cl, sl), ih = std::min(ch, sh);
      if (il < ih) lo = std::min(lo, il), hi = std::max(hi, ih);
    }
  }
  return lo < hi;
}

void intervals_of(const DomainNode& node, const Vector& o, const Vector& d, double t_max,
                  IntervalList& out);

// Root of t -> inner sdf along the perturbed ray, bracketed by sign change.
double perturbed_crossing(const PerturbedNode& p, const Vector& o, const Vector& d, double ta,
                          double fa, Vector xa, double tb, double fb, double tol) {
  int side = 0;
  for (int it = 0; it < 100 && tb - ta > tol; ++it) {
    double t = (fa * tb - fb * ta) / (fa - fb);
    if (!(t > ta && t < tb)) t = 0.5 * (ta + tb);
    Vector y = o + t * d;
    Vector x = p.field.invert_from(y, xa + (t - ta) * d, 1e-13);
    double f = sdf(*p.inner, x);
    if (f == 0.0) return t;
    if ((f < 0) == (fa < 0)) {
      ta = t, fa = f, xa = x;
      if (side == -1) fb *= 0.5;
      side = -1;
    } else {
      tb = t, fb = f;
      if (side == 1) fa *= 0.5;
      side = 1;
    }
  }
  return 0.5 * (ta + tb);
}

void perturbed_intervals(const PerturbedNode& p, const Vector& o, const Vector& d, double t_max,
                         IntervalList& out) {
  const double dn = d.norm();
  const double h_min = 1e-4 * t_max;
  const double tol = 1e-13 * std::max(1.0, t_max);
  Vector x = p.field.invert(o, 1e-10);
  double s = sdf(*p.inner, x);
  bool inside = s < 0.0;
  double start = 0.0, t = 0.0;
  for (int step_count = 0; t < t_max && step_count < 200000; ++step_count) {
    double step = std::max(0.999 * (1.0 - p.lipschitz) * std::abs(s) / dn, h_min);
    double t1 = std::min(t + step, t_max);
    Vector x1 = p.field.invert_from(o + t1 * d, x + (t1 - t) * d, 1e-10);
    double s1 = sdf(*p.inner, x1);
    if ((s1 < 0.0) != inside) {
      double tc = perturbed_crossing(p, o, d, t, s, x, t1, s1, tol);
      if (inside)
        out.push_back({start, tc});
      else
        start = tc;
      inside = !inside;
    }
    t = t1, x = x1, s = s1;
  }
  if (inside && start < t_max) out.push_back({start, t_max});
}

void intervals_of(const DomainNode& node, const Vector& o, const Vector& d, double t_max,
                  IntervalList& out) {
  std::visit(overloaded{
                 [&](const Ball& b) {
                   double lo, hi;
                   if (ball_chord(b.center, b.radius, o, d, lo, hi)) push_clipped(out, lo, hi, t_max);
                 },
                 [&](const Capsule& k) {
                   double lo, hi;
                   if (capsule_chord(k, o, d, lo, hi)) push_clipped(out, lo, hi, t_max);
                 },
                 [&](const UnionNode& u) {
                   intervals_of(*u.left, o, d, t_max, out);
                   intervals_of(*u.right, o, d, t_max, out);
                   merge_sorted(out);
                 },
                 [&](const DifferenceNode& dn) {
                   IntervalList l, r;
                   intervals_of(*dn.left, o, d, t_max, l);
                   if (l.empty()) return;
                   intervals_of(*dn.right, o, d, t_max, r);
                   for (const Interval& iv : subtract_intervals(l, r)) out.push_back(iv);
                 },
                 [&](const TranslateNode& t) { intervals_of(*t.inner, o - t.offset, d, t_max, out); },
                 [&](const ScaleNode& s) {
                   intervals_of(*s.inner, o / s.factor, d / s.factor, t_max, out);
                 },
                 [&](const PerturbedNode& p) { perturbed_intervals(p, o, d, t_max, out); },
             },
             node.kind);
}

// ---------------------------------------------------------------------------
// leaves and their wrapper chains

struct LeafRef {
  const DomainNode* leaf;
  std::vector<const DomainNode*> chain;  // root first
  bool hole;
};

void collect_leaves(const DomainNode& node, std::vector<const DomainNode*>& chain, bool hole,
                    std::vector<LeafRef>& out) {
  std::visit(overloaded{
                 [&](const Ball&) { out.push_back({&node, chain, hole}); },
                 [&](const Capsule&) { out.push_back({&node, chain, hole}); },
                 [&](const UnionNode& u) {
                   collect_leaves(*u.left, chain, hole, out);
                   collect_leaves(*u.right, chain, hole, out);
                 },
                 [&](const DifferenceNode& d) {
                   collect_leaves(*d.left, chain, hole, out);
                   collect_leaves(*d.right, chain, !hole, out);
                 },
                 [&](const TranslateNode& t) {
                   chain.push_back(&node);
                   collect_leaves(*t.inner, chain, hole, out);
                   chain.pop_back();
                 },
                 [&](const ScaleNode& s) {
                   chain.push_back(&node);
                   collect_leaves(*s.inner, chain, hole, out);
                   chain.pop_back();
                 },
                 [&](const PerturbedNode& p) {
                   chain.push_back(&node);
                   collect_leaves(*p.inner, chain, hole, out);
                   chain.pop_back();
                 },
             },
             node.kind);
}

std::vector<LeafRef> leaves_of(const Domain& domain) {
  std::vector<LeafRef> out;
  std::vector<const DomainNode*> chain;
  collect_leaves(domain.node(), chain, false, out);
  return out;
}

bool chain_is_affine(const LeafRef& leaf) {
  return std::none_of(leaf.chain.begin(), leaf.chain.end(), [](const DomainNode* n) {
    return std::holds_alternative<PerturbedNode>(n->kind);
  });
}

// Maps point and outward normal from leaf coordinates to world coordinates.
void to_world(const LeafRef& leaf, Vector& p, Vector& normal, bool skip_perturbations = false) {
  for (auto it = leaf.chain.rbegin(); it != leaf.chain.rend(); ++it) {
    const DomainNode& n = **it;
    if (auto* t = std::get_if<TranslateNode>(&n.kind)) {
      p += t->offset;
    } else if (auto* s = std::get_if<ScaleNode>(&n.kind)) {
      p *= s->factor;
    } else if (auto* q = std::get_if<PerturbedNode>(&n.kind)) {
      if (skip_perturbations) continue;
      Matrix jt = (Matrix::Identity(p.size(), p.size()) + q->field.jacobian(p)).transpose();
      normal = jt.partialPivLu().solve(normal).normalized();
      p += q->field(p);
    }
  }
}

Primitive world_primitive(const LeafRef& leaf) {
  Primitive prim;
  prim.hole = leaf.hole;
  if (auto* b = std::get_if<Ball>(&leaf.leaf->kind)) {
    prim.capsule = false;
    prim.a = prim.b = b->center;
    prim.radius = b->radius;
  } else {
    const Capsule& c = std::get<Capsule>(leaf.leaf->kind);
    prim.capsule = true;
    prim.a = c.a;
    prim.b = c.b;
    prim.radius = c.radius;
  }
  double factor = 1.0;
  for (auto it = leaf.chain.rbegin(); it != leaf.chain.rend(); ++it) {
    if (auto* t = std::get_if<TranslateNode>(&(*it)->kind)) {
      prim.a += t->offset, prim.b += t->offset;
    } else if (auto* s = std::get_if<ScaleNode>(&(*it)->kind)) {
      prim.a *= s->factor, prim.b *= s->factor;
      factor *= s->factor;
    }
  }
  prim.radius *= factor;
  return prim;
}

// Nearest point on the leaf surface, in world coordinates (affine chains only).
BoundaryPoint leaf_nearest(const Primitive& prim, const Vector& x) {
  Vector q = prim.capsule ? segment_closest(x, prim.a, prim.b) : prim.a;
  Vector d = x - q;
  Vector u;
  if (d.norm() > 1e-14 * (1.0 + prim.radius)) {
    u = d.normalized();
  } else if (prim.capsule && (prim.b - prim.a).norm() > 0) {
    u = perpendicular_to((prim.b - prim.a).normalized());
  } else {
    u = Vector::Zero(x.size());
    u(0) = 1.0;
  }
  return {q + prim.radius * u, u};
}

bool lex_greater(const Vector& a, const Vector& b) {
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) > b(i)) return true;
    if (a(i) < b(i)) return false;
  }
  return false;
}

std::vector<Vector> sphere_sample(int n, int count, std::uint64_t seed) {
  boost::random::mt19937_64 rng(seed);
  boost::random::normal_distribution<double> normal;
  std::vector<Vector> out;
  for (int k = 0; k < n; ++k) {
    Vector e = Vector::Zero(n);
    e(k) = 1.0;
    out.push_back(e);
    out.push_back(-e);
  }
  while (int(out.size()) < count) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
    if (v.norm() > 1e-12) out.push_back(v.normalized());
  }
  return out;
}

// Tangent-space pattern search on the unit sphere.
template <class F>
Vector sphere_pattern_search(const Vector& start, F&& objective, double& best, bool maximize) {
  const int n = int(start.size());
  Vector w = start.normalized();
  best = objective(w);
  auto better = [&](double v) { return maximize ? v > best : v < best; };
  for (double step = 0.2; step > 1e-10;) {
    // orthonormal basis of the tangent space at w
    Matrix basis(n, n - 1);
    int col = 0;
    for (int k = 0; k < n && col < n - 1; ++k) {
      Vector e = Vector::Zero(n);
      e(k) = 1.0;
      e -= e.dot(w) * w;
      for (int j = 0; j < col; ++j) e -= e.dot(basis.col(j)) * basis.col(j);
      if (e.norm() > 1e-6) basis.col(col++) = e.normalized();
    }
    bool moved = false;
    for (int j = 0; j < col && !moved; ++j) {
      for (double sgn : {1.0, -1.0}) {
        Vector cand = (w + sgn * step * basis.col(j)).normalized();
        double v = objective(cand);
        if (better(v)) {
          best = v;
          w = cand;
          moved = true;
          break;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return w;
}

struct RaySpan {
  double first_exit;   // first boundary crossing distance, or inf
  double last_exit;    // last crossing distance, or 0
};

RaySpan ray_span(const Domain& domain, const Vector& x, const Vector& w, double t_max) {
  IntervalList iv = inside_intervals(domain, x, w, t_max);
  RaySpan s{kInf, 0.0};
  if (iv.empty()) return s;
  if (iv.front().lo <= 0.0)
    s.first_exit = iv.front().hi;
  else
    s.first_exit = iv.front().lo;
  s.last_exit = iv.back().hi;
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// PerturbationField

PerturbationField::PerturbationField(int dim, std::vector<GaussianBump> bumps)
    : dim_(dim), bumps_(std::move(bumps)) {
  require(dim >= 3 && dim <= kMaxDim, "perturbation: dimension must be in [3, 8]");
  for (const GaussianBump& b : bumps_) {
    check_vector(b.center, dim, "bump center");
    check_vector(b.displacement, dim, "bump displacement");
    require(std::isfinite(b.width) && b.width > 0.0, "bump width must be positive");
  }
}

bool PerturbationField::is_zero() const {
  return std::all_of(bumps_.begin(), bumps_.end(),
                     [](const GaussianBump& b) { return b.displacement.isZero(0.0); });
}

Vector PerturbationField::operator()(const Vector& x) const {
  Vector out = Vector::Zero(x.size());
  for (const GaussianBump& b : bumps_)
    out += b.displacement * std::exp(-(x - b.center).squaredNorm() / (b.width * b.width));
  return out;
}

Matrix PerturbationField::jacobian(const Vector& x) const {
  Matrix j = Matrix::Zero(x.size(), x.size());
  for (const GaussianBump& b : bumps_) {
    double w2 = b.width * b.width;
    Vector r = x - b.center;
    double g = std::exp(-r.squaredNorm() / w2);
    j += b.displacement * (-2.0 * g / w2 * r).transpose();
  }
  return j;
}

double PerturbationField::c2_norm() const {
  const double d1 = std::sqrt(2.0) * std::exp(-0.5);
  double total = 0.0;
  for (const GaussianBump& b : bumps_) {
    double w = b.width;
    double deriv = std::max({1.0, d1 / w, 2.0 / (w * w)});
    total += b.displacement.cwiseAbs().maxCoeff() * deriv;
  }
  return total;
}

double PerturbationField::lipschitz_bound() const {
  const double d1 = std::sqrt(2.0) * std::exp(-0.5);
  double total = 0.0;
  for (const GaussianBump& b : bumps_) total += b.displacement.norm() * d1 / b.width;
  return total;
}

double PerturbationField::sup_bound() const {
  double total = 0.0;
  for (const GaussianBump& b : bumps_) total += b.displacement.norm();
  return total;
}

Vector PerturbationField::invert(const Vector& y, double tol) const {
  return invert_from(y, y - (*this)(y), tol);
}

Vector PerturbationField::invert_from(const Vector& y, Vector x, double tol) const {
  for (int it = 0; it < 500; ++it) {
    Vector next = y - (*this)(x);
    double step = (next - x).norm();
    x = next;
    if (step <= tol) return x;
  }
  throw ConvergenceError("perturbation inversion did not converge");
}

// ---------------------------------------------------------------------------
// Domain construction

Domain::Domain(Ball ball) {
  dim_ = checked_dim(ball.center);
  require(std::isfinite(ball.radius) && ball.radius > 0.0, "ball radius must be positive");
  root_ = std::make_shared<DomainNode>(DomainNode{std::move(ball)});
}

Domain::Domain(Capsule capsule) {
  dim_ = checked_dim(capsule.a);
  check_vector(capsule.b, dim_, "capsule endpoint");
  require(std::isfinite(capsule.radius) && capsule.radius > 0.0,
          "capsule radius must be positive");
  root_ = std::make_shared<DomainNode>(DomainNode{std::move(capsule)});
}

Domain::Domain(NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {
  require(root_ != nullptr, "empty domain node");
}

Domain unite(const Domain& left, const Domain& right) {
  require(left.dimension() == right.dimension(), "union: dimension mismatch");
  return Domain(std::make_shared<DomainNode>(DomainNode{UnionNode{left.root(), right.root()}}),
                left.dimension());
}

Domain subtract(const Domain& outer, const Domain& hole) {
  require(outer.dimension() == hole.dimension(), "difference: dimension mismatch");
  for (const BoundaryPoint& bp : boundary_samples(hole, 64))
    require(signed_distance_bound(outer, bp.location) < 0.0,
            "difference: hole must lie strictly inside the left operand");
  return Domain(
      std::make_shared<DomainNode>(DomainNode{DifferenceNode{outer.root(), hole.root()}}),
      outer.dimension());
}

Domain translate(const Vector& offset, const Domain& inner) {
  check_vector(offset, inner.dimension(), "translate offset");
  return Domain(std::make_shared<DomainNode>(DomainNode{TranslateNode{offset, inner.root()}}),
                inner.dimension());
}

Domain scale(double factor, const Domain& inner) {
  require(std::isfinite(factor) && factor > 0.0, "scale factor must be positive");
  return Domain(std::make_shared<DomainNode>(DomainNode{ScaleNode{factor, inner.root()}}),
                inner.dimension());
}

Domain perturb(const Domain& base, const PerturbationField& theta) {
  require(theta.dimension() == base.dimension(), "perturb: dimension mismatch");
  require(theta.c2_norm() < 0.5, "perturb: C2 norm of the field must be below 1/2");
  double lip = theta.lipschitz_bound();
  require(lip < 1.0, "perturb: field is not a contraction");
  return Domain(
      std::make_shared<DomainNode>(DomainNode{PerturbedNode{base.root(), theta, lip}}),
      base.dimension());
}

// ---------------------------------------------------------------------------
// queries

double segment_distance(const Vector& x, const Vector& a, const Vector& b) {
  return (x - segment_closest(x, a, b)).norm();
}

bool contains(const Domain& domain, const Vector& x) {
  check_vector(x, domain.dimension(), "contains");
  return sdf(domain.node(), x) < 0.0;
}

double signed_distance_bound(const Domain& domain, const Vector& x) {
  check_vector(x, domain.dimension(), "signed_distance_bound");
  return sdf(domain.node(), x);
}

double bounding_radius(const Domain& domain, const Vector& center) {
  check_vector(center, domain.dimension(), "bounding_radius");
  return bound_radius(domain.node(), center);
}

IntervalList inside_intervals(const Domain& domain, const Vector& origin, const Vector& dir,
                              double t_max) {
  IntervalList out;
  intervals_of(domain.node(), origin, dir, t_max, out);
  return out;
}

Vector inner_normal(const Domain& domain, const Vector& p) {
  check_vector(p, domain.dimension(), "inner_normal");
  SdfGrad g = sdf_grad(domain.node(), p);
  return -unit_or_axis(g.grad);
}

BoundaryPoint boundary_nearest(const Domain& domain, const Vector& x) {
  check_vector(x, domain.dimension(), "boundary_nearest");
  const int n = domain.dimension();
  const double R = bounding_radius(domain, x);
  const double flip = 1e-9 * std::max(1.0, R);
  const bool x_inside = contains(domain, x);

  // exact candidates from leaves with affine wrappers
  bool have_leaf = false;
  BoundaryPoint best_leaf;
  double best_leaf_dist = kInf;
  for (const LeafRef& leaf : leaves_of(domain)) {
    if (!chain_is_affine(leaf)) continue;
    BoundaryPoint c = leaf_nearest(world_primitive(leaf), x);
    bool in_minus = contains(domain, c.location - flip * c.inner_normal);
    bool in_plus = contains(domain, c.location + flip * c.inner_normal);
    if (in_minus == in_plus) continue;
    double dist = (c.location - x).norm();
    c.inner_normal = in_minus ? Vector(-c.inner_normal) : c.inner_normal;
    bool tie = std::abs(dist - best_leaf_dist) <= 1e-12 * std::max(1.0, dist);
    if (!have_leaf || (!tie && dist < best_leaf_dist) ||
        (tie && lex_greater(c.location, best_leaf.location))) {
      best_leaf = c;
      best_leaf_dist = std::min(dist, best_leaf_dist);
      have_leaf = true;
    }
  }

  // ray search for the first crossing
  auto crossing = [&](const Vector& w) {
    return ray_span(domain, x, w, 2.0 * R + 1.0).first_exit;
  };
  Vector best_dir;
  double best_t = kInf;
  for (const Vector& w : sphere_sample(n, 512, 17)) {
    double t = crossing(w);
    if (t < best_t * (1.0 - 1e-12) ||
        (std::abs(t - best_t) <= 1e-12 * best_t && lex_greater(x + t * w, x + best_t * best_dir))) {
      best_t = t;
      best_dir = w;
    }
  }
  if (!std::isfinite(best_t)) throw ConvergenceError("boundary_nearest: no boundary found");
  double refined = best_t;
  best_dir = sphere_pattern_search(best_dir, crossing, refined, false);
  best_t = refined;

  if (have_leaf && best_leaf_dist <= best_t + 1e-9 * std::max(1.0, R)) return best_leaf;

  Vector p = x + best_t * best_dir;
  Vector normal = inner_normal(domain, p);
  Vector toward = x_inside ? Vector(best_dir) : Vector(-best_dir);
  if (best_t > 1e-12 && (normal + toward).norm() > 1e-4)
    throw ConvergenceError(
        "boundary_nearest: nearest-point search did not converge (non-smooth CSG junction)");
  return {p, normal};
}

std::vector<BoundaryPoint> boundary_samples(const Domain& domain, int per_primitive) {
  require(per_primitive >= 1, "boundary_samples: need at least one sample per primitive");
  const int n = domain.dimension();
  std::vector<BoundaryPoint> out;
  std::vector<LeafRef> leaves = leaves_of(domain);
  Vector zero = Vector::Zero(n);
  const double flip = 1e-9 * std::max(1.0, bounding_radius(domain, zero));
  std::uint64_t seed = 1;
  for (const LeafRef& leaf : leaves) {
    std::vector<BoundaryPoint> local;
    if (auto* b = std::get_if<Ball>(&leaf.leaf->kind)) {
      for (const Vector& w : sphere_sample(n, std::max(per_primitive, 2 * n), seed++))
        local.push_back({b->center + b->radius * w, w});
    } else {
      const Capsule& c = std::get<Capsule>(leaf.leaf->kind);
      Vector ab = c.b - c.a;
      double L = ab.norm();
      Vector u = L > 0 ? Vector(ab / L) : perpendicular_to(Vector::Unit(n, 0));
      local.push_back({c.a - c.radius * u, -u});
      local.push_back({c.b + c.radius * u, u});
      boost::random::mt19937_64 rng(seed++);
      boost::random::uniform_real_distribution<double> unif(0.0, 1.0);
      for (const Vector& w : sphere_sample(n, std::max(per_primitive, 2 * n), seed++)) {
        double side = w.dot(u);
        double pick = unif(rng);
        if (pick < 0.5 && L > 0) {
          Vector perp = w - side * u;
          if (perp.norm() < 1e-9) continue;
          perp.normalize();
          double s = unif(rng);
          local.push_back({c.a + s * ab + c.radius * perp, perp});
        } else {
          const Vector& end = side < 0 ? c.a : c.b;
          local.push_back({end + c.radius * w, w});
        }
      }
    }
    for (BoundaryPoint& bp : local) {
      Vector p = bp.location, m = bp.inner_normal;
      to_world(leaf, p, m);
      bool in_minus = contains(domain, p - flip * m);
      bool in_plus = contains(domain, p + flip * m);
      if (in_minus == in_plus) continue;
      out.push_back({p, in_minus ? Vector(-m) : m});
    }
  }
  return out;
}

DiameterPair diameter_pair(const Domain& domain, int samples) {
  require(samples >= 2, "diameter_pair: samples must be at least 2");
  std::vector<BoundaryPoint> pts = boundary_samples(domain, samples);
  if (pts.size() < 2) throw PreconditionError("diameter_pair: degenerate domain");

  std::size_t bi = 0, bj = 1;
  double best = -1.0;
  auto key_hi = [&](std::size_t i, std::size_t j) -> const Vector& {
    return lex_greater(pts[i].location, pts[j].location) ? pts[i].location : pts[j].location;
  };
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      double d = (pts[i].location - pts[j].location).norm();
      bool tie = std::abs(d - best) <= 1e-12 * std::max(1.0, best);
      if ((!tie && d > best) || (tie && lex_greater(key_hi(i, j), key_hi(bi, bj)))) {
        best = std::max(best, d);
        bi = i, bj = j;
      }
    }
  }
  if (best <= 0.0) throw PreconditionError("diameter_pair: degenerate domain");
  const double sample_max = best;

  const double R = bounding_radius(domain, Vector::Zero(domain.dimension()));
  auto farthest_from = [&](const Vector& q, const Vector& guess) {
    auto reach = [&](const Vector& w) { return ray_span(domain, q, w, 4.0 * R + 1.0).last_exit; };
    double t = 0.0;
    Vector w = sphere_pattern_search((guess - q).normalized(), reach, t, true);
    return Vector(q + t * w);
  };
  Vector e1 = pts[bi].location, e2 = pts[bj].location;
  double dist = best;
  for (int it = 0; it < 50; ++it) {
    Vector n2 = farthest_from(e1, e2);
    if ((n2 - e1).norm() > (e2 - e1).norm()) e2 = n2;
    Vector n1 = farthest_from(e2, e1);
    if ((n1 - e2).norm() > (e1 - e2).norm()) e1 = n1;
    double nd = (e1 - e2).norm();
    if (nd <= dist * (1.0 + 1e-15)) {
      dist = std::max(dist, nd);
      break;
    }
    dist = nd;
  }
  if (lex_greater(e1, e2)) std::swap(e1, e2);
  DiameterPair out;
  out.first = {e1, inner_normal(domain, e1)};
  out.second = {e2, inner_normal(domain, e2)};
  out.distance = (e1 - e2).norm();
  out.sample_max = sample_max;
  Vector axis = (e2 - e1) / out.distance;
  out.normals_aligned = out.first.inner_normal.dot(axis) > 1.0 - 1e-6 &&
                        out.second.inner_normal.dot(-axis) > 1.0 - 1e-6;
  return out;
}

std::vector<Primitive> primitives(const Domain& domain) {
  std::vector<Primitive> out;
  for (const LeafRef& leaf : leaves_of(domain)) out.push_back(world_primitive(leaf));
  return out;
}

namespace {

double segment_segment_distance(const Vector& p1, const Vector& q1, const Vector& p2,
                                const Vector& q2) {
  Vector d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  double a = d1.squaredNorm(), e = d2.squaredNorm(), f = d2.dot(r);
  double s = 0.0, t = 0.0;
  if (a <= 1e-300 && e <= 1e-300) return r.norm();
  if (a <= 1e-300) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    double c = d1.dot(r);
    if (e <= 1e-300) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      double b = d1.dot(d2);
      double denom = a * e - b * b;
      s = denom > 1e-300 ? std::clamp((b * f - c * e) / denom, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0.0) {
        t = 0.0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1.0) {
        t = 1.0;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return ((p1 + s * d1) - (p2 + t * d2)).norm();
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) i = parent[i] = parent[parent[i]];
  return i;
}

}  // namespace

std::vector<int> component_labels(const Domain& domain) {
  std::vector<Primitive> all = primitives(domain);
  std::vector<Primitive> solid;
  for (const Primitive& p : all)
    if (!p.hole) solid.push_back(p);
  std::vector<int> parent(solid.size());
  std::iota(parent.begin(), parent.end(), 0);
  for (std::size_t i = 0; i < solid.size(); ++i)
    for (std::size_t j = i + 1; j < solid.size(); ++j) {
      double gap = segment_segment_distance(solid[i].a, solid[i].b, solid[j].a, solid[j].b);
      if (gap < solid[i].radius + solid[j].radius) {
        int ri = find_root(parent, int(i)), rj = find_root(parent, int(j));
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
    }
  std::vector<int> labels(solid.size()), root_label(solid.size(), -1);
  int next = 0;
  for (std::size_t i = 0; i < solid.size(); ++i) {
    int r = find_root(parent, int(i));
    if (root_label[r] < 0) root_label[r] = next++;
    labels[i] = root_label[r];
  }
  return labels;
}

int component_count(const Domain& domain) {
  std::vector<int> labels = component_labels(domain);
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

std::vector<Vector> component_anchors(const Domain& domain) {
  std::vector<LeafRef> leaves = leaves_of(domain);
  std::vector<LeafRef> solid;
  for (const LeafRef& l : leaves)
    if (!l.hole) solid.push_back(l);
  std::vector<int> labels = component_labels(domain);
  int k = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<Vector> best(k);
  std::vector<double> depth(k, kInf);
  for (std::size_t i = 0; i < solid.size(); ++i) {
    std::vector<Vector> cands;
    if (auto* b = std::get_if<Ball>(&solid[i].leaf->kind)) {
      cands.push_back(b->center);
    } else {
      const Capsule& c = std::get<Capsule>(solid[i].leaf->kind);
      cands.push_back(c.a);
      cands.push_back(0.5 * (c.a + c.b));
      cands.push_back(c.b);
    }
    for (Vector p : cands) {
      Vector m = Vector::Zero(p.size());
      to_world(solid[i], p, m);
      double s = signed_distance_bound(domain, p);
      if (s < depth[labels[i]]) {
        depth[labels[i]] = s;
        best[labels[i]] = p;
      }
    }
  }
  std::vector<Vector> out;
  for (int c = 0; c < k; ++c)
    if (depth[c] < 0.0) out.push_back(best[c]);
  return out;
}

}  // namespace psiland
