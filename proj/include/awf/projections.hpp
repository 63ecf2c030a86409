#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "awf/problem.hpp"

namespace awf {

/// Raised by bisect_root when the interval does not bracket a sign change.
class BracketError : public Error {
 public:
  BracketError(double lo, double hi, double f_lo, double f_hi);

  double lo, hi, f_lo, f_hi;
};

struct SimplexSpec {
  double budget = 1.0;  // target sum b >= 0
};

/// Euclidean projection onto {x >= 0 : sum x = b} by sort-and-threshold.
/// b == 0 yields the zero vector. Throws std::invalid_argument on non-finite
/// input, negative b, or empty v.
std::vector<double> project_simplex(std::span<const double> v, SimplexSpec spec);

/// Elementwise max(v, 0).
std::vector<double> project_orthant(std::span<const double> v);

struct Root {
  double x = 0.0;
  std::size_t iterations = 0;
};

/// Deterministic midpoint bisection for a continuous monotone f on [lo, hi].
/// Stops when |f(x)| <= tol or the bracket width is <= tol * max(1, |x|), or
/// when the bracket can no longer be split in floating point.
Root bisect_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol);

}  // namespace awf
