#include "awf/projections.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace awf {

namespace {

std::string bracket_message(double lo, double hi, double f_lo, double f_hi) {
  std::ostringstream os;
  os.precision(17);
  os << "bisect_root: no sign change on [" << lo << ", " << hi << "]: f(lo) = "
     << f_lo << ", f(hi) = " << f_hi;
  return os.str();
}

}  // namespace

BracketError::BracketError(double lo_, double hi_, double f_lo_, double f_hi_)
    : Error(bracket_message(lo_, hi_, f_lo_, f_hi_)),
      lo(lo_),
      hi(hi_),
      f_lo(f_lo_),
      f_hi(f_hi_) {}

std::vector<double> project_simplex(std::span<const double> v,
                                    SimplexSpec spec) {
  const double b = spec.budget;
  if (v.empty()) throw std::invalid_argument("project_simplex: empty input");
  if (!(b >= 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument("project_simplex: budget must be >= 0");
  }
  if (std::any_of(v.begin(), v.end(),
                  [](double x) { return !std::isfinite(x); })) {
    throw std::invalid_argument("project_simplex: non-finite input");
  }
  std::vector<double> x(v.size(), 0.0);
  if (b == 0.0) return x;

  std::vector<double> u(v.begin(), v.end());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    cumsum += u[j];
    const double t = (cumsum - b) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) tau = t;
  }
  // One correction pass on the active set removes accumulated roundoff in
  // the running sum.
  double sum = 0.0;
  std::size_t active = 0;
  for (double vi : v) {
    if (vi > tau) {
      sum += vi - tau;
      ++active;
    }
  }
  if (active > 0) tau += (sum - b) / static_cast<double>(active);
  for (std::size_t i = 0; i < v.size(); ++i) x[i] = std::max(v[i] - tau, 0.0);
  return x;
}

std::vector<double> project_orthant(std::span<const double> v) {
  std::vector<double> x(v.size());
  std::transform(v.begin(), v.end(), x.begin(),
                 [](double a) { return std::max(a, 0.0); });
  return x;
}

Root bisect_root(const std::function<double(double)>& f, double lo, double hi,
                 double tol) {
  if (lo > hi) std::swap(lo, hi);
  const double f_lo = f(lo);
  if (f_lo == 0.0) return {lo, 0};
  const double f_hi = f(hi);
  if (f_hi == 0.0) return {hi, 0};
  if ((f_lo < 0.0) == (f_hi < 0.0) || std::isnan(f_lo) || std::isnan(f_hi)) {
    throw BracketError(lo, hi, f_lo, f_hi);
  }
  const bool increasing = f_lo < 0.0;
  Root r;
  while (true) {
    const double mid = 0.5 * (lo + hi);
    ++r.iterations;
    if (mid <= lo || mid >= hi) {
      r.x = mid;
      return r;
    }
    const double fm = f(mid);
    if (std::abs(fm) <= tol) {
      r.x = mid;
      return r;
    }
    if ((fm < 0.0) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= tol * std::max(1.0, std::abs(0.5 * (lo + hi)))) {
      r.x = 0.5 * (lo + hi);
      return r;
    }
  }
}

}  // namespace awf
