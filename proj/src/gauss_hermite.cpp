#include "gauss_hermite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <tuple>
#include <utility>

namespace awf::detail {

namespace {

// Number of eigenvalues below x of the Jacobi matrix of the Hermite
// polynomials (zero diagonal, off-diagonal sqrt(k/2)), by Sturm sequence.
std::size_t count_below(std::size_t n, double x) {
  std::size_t count = 0;
  double q = -x;
  for (std::size_t k = 0;; ++k) {
    if (q == 0.0) q = -1e-300;
    if (q < 0.0) ++count;
    if (k + 1 == n) break;
    q = -x - (0.5 * static_cast<double>(k + 1)) / q;
  }
  return count;
}

// Orthonormal recurrence for h_j(x) exp(-x^2/2), which stays in range for
// large orders. Returns (h_n, h_{n-1}) times the common factor.
std::pair<double, double> scaled_hermite(std::size_t n, double z) {
  double p1 = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * z * z);
  double p2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double p3 = p2;
    p2 = p1;
    const double dj = static_cast<double>(j);
    p1 = z * std::sqrt(2.0 / (dj + 1.0)) * p2 - std::sqrt(dj / (dj + 1.0)) * p3;
  }
  return {p1, p2};
}

// Nodes by bisection on the Sturm count, then one Newton correction;
// weights 2 exp(-x^2) / h_n'(x)^2.
GaussHermiteRule compute_rule(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: order must be >= 1");
  GaussHermiteRule rule;
  rule.node.assign(n, 0.0);
  rule.weight.assign(n, 0.0);
  auto& x = rule.node;
  auto& w = rule.weight;
  const double dn = static_cast<double>(n);
  const double bound = std::sqrt(2.0 * dn + 1.0) + 1.0;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    // x[i] is the (i+1)-th largest eigenvalue: n - 1 - i of them lie below.
    const std::size_t below = n - 1 - i;
    double lo = 0.0;
    double hi = bound;
    while (true) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      if (count_below(n, mid) > below) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    double z = 0.5 * (lo + hi);
    auto [p1, p2] = scaled_hermite(n, z);
    double pp = std::sqrt(2.0 * dn) * p2;
    if (pp != 0.0) {
      z -= p1 / pp;
      std::tie(p1, p2) = scaled_hermite(n, z);
      pp = std::sqrt(2.0 * dn) * p2;
    }
    x[n - 1 - i] = z;
    x[i] = -z;
    const double wi =
        pp == 0.0 ? 0.0
                  : std::exp(std::log(2.0) - z * z - 2.0 * std::log(std::abs(pp))) /
                        std::sqrt(std::numbers::pi);
    w[i] = wi;
    w[n - 1 - i] = wi;
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += w[i];
    if (i > 0 && !(x[i] > x[i - 1])) {
      throw std::runtime_error("gauss_hermite: nodes not distinct");
    }
  }
  if (std::abs(total - 1.0) > 1e-10) {
    throw std::runtime_error("gauss_hermite: weights do not sum to one");
  }
  return rule;
}

GaussHermiteRule compute_legendre(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  GaussHermiteRule rule;
  rule.node.assign(n, 0.0);
  rule.weight.assign(n, 0.0);
  const double dn = static_cast<double>(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (dn + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (std::size_t k = 2; k <= n; ++k) {
        const double dk = static_cast<double>(k);
        const double p2 = ((2.0 * dk - 1.0) * z * p1 - (dk - 1.0) * p0) / dk;
        p0 = p1;
        p1 = p2;
      }
      dp = dn * (z * p1 - p0) / (z * z - 1.0);
      const double step = p1 / dp;
      z -= step;
      if (std::abs(step) <= 1e-16) break;
    }
    rule.node[n - 1 - i] = z;
    rule.node[i] = -z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.weight[i] = w;
    rule.weight[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.node[n / 2] = 0.0;
  return rule;
}

// n nodes for N(0, 1/2) on [-7.5, 7.5]: 16-point Gauss-Legendre panels
// (a single panel below 16 nodes) weighted by the density.
GaussHermiteRule compute_composite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("noise_rule: order must be >= 1");
  const std::size_t per = std::min<std::size_t>(n, 16);
  const std::size_t panels = n / per;
  const auto base = compute_legendre(per);
  const double T = 7.5;
  const double h = 2.0 * T / static_cast<double>(panels);
  GaussHermiteRule rule;
  for (std::size_t k = 0; k < panels; ++k) {
    const double mid = -T + h * (static_cast<double>(k) + 0.5);
    for (std::size_t q = 0; q < per; ++q) {
      const double t = mid + 0.5 * h * base.node[q];
      rule.node.push_back(t);
      rule.weight.push_back(0.5 * h * base.weight[q] * std::exp(-t * t) /
                            std::sqrt(std::numbers::pi));
    }
  }
  return rule;
}

const GaussHermiteRule& cached(std::size_t order, int kind) {
  static std::mutex mutex;
  static std::map<std::pair<int, std::size_t>, std::unique_ptr<GaussHermiteRule>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[{kind, order}];
  if (!slot) {
    slot = std::make_unique<GaussHermiteRule>(
        kind == 0 ? compute_rule(order)
                  : kind == 1 ? compute_legendre(order) : compute_composite(order));
  }
  return *slot;
}

}  // namespace

const GaussHermiteRule& gauss_hermite(std::size_t order) { return cached(order, 0); }

const GaussHermiteRule& gauss_legendre(std::size_t order) { return cached(order, 1); }

const GaussHermiteRule& noise_rule(std::size_t order) { return cached(order, 2); }

}  // namespace awf::detail
