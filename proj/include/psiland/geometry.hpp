#pragma once

#include "psiland/types.hpp"

#include <boost/container/small_vector.hpp>

#include <memory>
#include <variant>
#include <vector>

namespace psiland {

struct Interval {
  double lo;
  double hi;
};
using IntervalList = boost::container::small_vector<Interval, 8>;

struct GaussianBump {
  Vector center;
  double width;
  Vector displacement;
};

// theta(x) = sum_k D_k exp(-|x - c_k|^2 / w_k^2)
class PerturbationField {
 public:
  PerturbationField() = default;
  PerturbationField(int dim, std::vector<GaussianBump> bumps);

  int dimension() const { return dim_; }
  const std::vector<GaussianBump>& bumps() const { return bumps_; }
  bool is_zero() const;

  Vector operator()(const Vector& x) const;
  Matrix jacobian(const Vector& x) const;

  // Sum of per-bump bounds on sup |d^l theta_i|, |l| <= 2.
  double c2_norm() const;
  // Bound on sup ||D theta||_op.
  double lipschitz_bound() const;
  // Bound on sup |theta|.
  double sup_bound() const;

  // Solves x + theta(x) = y by fixed-point iteration.
  Vector invert(const Vector& y, double tol = 1e-12) const;
  Vector invert_from(const Vector& y, Vector x, double tol) const;

 private:
  int dim_ = 0;
  std::vector<GaussianBump> bumps_;
};

struct Ball {
  Vector center;
  double radius;
};

struct Capsule {
  Vector a;
  Vector b;
  double radius;
};

struct DomainNode;
using NodePtr = std::shared_ptr<const DomainNode>;

struct UnionNode {
  NodePtr left, right;
};
struct DifferenceNode {
  NodePtr left, right;
};
struct TranslateNode {
  Vector offset;
  NodePtr inner;
};
struct ScaleNode {
  double factor;
  NodePtr inner;
};
struct PerturbedNode {
  NodePtr inner;
  PerturbationField field;
  double lipschitz;
};

struct DomainNode {
  std::variant<Ball, Capsule, UnionNode, DifferenceNode, TranslateNode, ScaleNode, PerturbedNode>
      kind;
};

// Immutable handle to a CSG tree. Copies share structure.
class Domain {
 public:
  Domain(Ball ball);
  Domain(Capsule capsule);
  Domain(NodePtr root, int dim);

  int dimension() const { return dim_; }
  const DomainNode& node() const { return *root_; }
  const NodePtr& root() const { return root_; }

 private:
  NodePtr root_;
  int dim_;
};

Domain unite(const Domain& left, const Domain& right);
// Removes the closure of `hole`, which must lie strictly inside `outer`.
Domain subtract(const Domain& outer, const Domain& hole);
Domain translate(const Vector& offset, const Domain& inner);
Domain scale(double factor, const Domain& inner);
Domain perturb(const Domain& base, const PerturbationField& theta);

bool contains(const Domain& domain, const Vector& x);
// Negative inside, positive outside, |value| <= distance to the boundary.
double signed_distance_bound(const Domain& domain, const Vector& x);
double bounding_radius(const Domain& domain, const Vector& center);

// Parameter intervals t in [0, t_max] with origin + t*dir inside the domain,
// sorted and disjoint.
IntervalList inside_intervals(const Domain& domain, const Vector& origin, const Vector& dir,
                              double t_max);

struct BoundaryPoint {
  Vector location;
  Vector inner_normal;
};

Vector inner_normal(const Domain& domain, const Vector& p);
BoundaryPoint boundary_nearest(const Domain& domain, const Vector& x);

struct DiameterPair {
  BoundaryPoint first;
  BoundaryPoint second;
  double distance;
  double sample_max;
  bool normals_aligned;
};
DiameterPair diameter_pair(const Domain& domain, int samples);

// Points on the boundary, about `per_primitive` per leaf before filtering.
std::vector<BoundaryPoint> boundary_samples(const Domain& domain, int per_primitive);

struct Primitive {
  bool capsule;
  Vector a;
  Vector b;
  double radius;
  bool hole;
};
// Leaves with translations and scalings applied. Perturbations are skipped,
// they do not change topology.
std::vector<Primitive> primitives(const Domain& domain);
// Component label per non-hole primitive, labels 0..k-1 ordered by first leaf.
std::vector<int> component_labels(const Domain& domain);
int component_count(const Domain& domain);

// Deepest interior point of each connected component, by signed distance.
std::vector<Vector> component_anchors(const Domain& domain);

double segment_distance(const Vector& x, const Vector& a, const Vector& b);

}  // namespace psiland
