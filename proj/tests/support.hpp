#pragma once

#include <doctest.h>

#include <algorithm>
#include <functional>

#include "xview/numcore.hpp"

namespace xview::test {

inline Matrix random_matrix(Index rows, Index cols, Rng& rng, double stddev = 1.0) {
  return random_normal(rows, cols, stddev, rng);
}

inline Matrix random_unit_rows(Index rows, Index cols, Rng& rng) {
  return l2_normalize_rows(random_normal(rows, cols, 1.0, rng));
}

inline Vector random_unit(Index dim, Rng& rng) {
  return random_unit_rows(1, dim, rng).row(0).transpose();
}

// Central differences of f at x with step h.
inline Vector numeric_gradient(const std::function<double(const Vector&)>& f, Vector x,
                               double h = 1e-5) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + h;
    const double up = f(x);
    x(i) = orig - h;
    const double down = f(x);
    x(i) = orig;
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& analytic, const Vector& numeric) {
  const double scale = std::max({analytic.norm(), numeric.norm(), 1e-8});
  return (analytic - numeric).norm() / scale;
}

}  // namespace xview::test
