#pragma once

#include "psiland/geometry.hpp"
#include "psiland/quadrature.hpp"

#include <initializer_list>

namespace psiland::test {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(int(xs.size()));
  int i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

inline Vector vec(double a, double b, double c) { return vec({a, b, c}); }

inline Vector axis(int n, double x) {
  Vector v = Vector::Zero(n);
  v(0) = x;
  return v;
}

inline Domain two_balls(int n = 3) {
  return unite(Domain(Ball{axis(n, -2), 1.0}), Domain(Ball{axis(n, 2), 1.0}));
}

inline Domain asymmetric(int n = 3) {
  return unite(Domain(Ball{axis(n, -2), 1.0}), Domain(Ball{axis(n, 2), 0.6}));
}

inline Domain dumbbell(int n = 3) {
  return unite(two_balls(n), Domain(Capsule{axis(n, -2), axis(n, 2), 0.3}));
}

inline QuadratureConfig fast_config(std::size_t budget = std::size_t(1) << 16) {
  QuadratureConfig q;
  q.near_budget = budget;
  return q;
}

}  // namespace psiland::test
