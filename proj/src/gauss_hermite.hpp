#pragma once

#include <cstddef>
#include <vector>

namespace awf::detail {

/// Quadrature nodes in ascending order with their weights.
struct GaussHermiteRule {
  std::vector<double> node;
  std::vector<double> weight;
};

/// Rules are computed once per order and cached; references stay valid for
/// the life of the process. Thread-safe.

/// E[f(Z)], Z ~ N(0, 1/2): physicists' Gauss-Hermite with weights / sqrt(pi).
const GaussHermiteRule& gauss_hermite(std::size_t order);
/// Integral over [-1, 1].
const GaussHermiteRule& gauss_legendre(std::size_t order);
/// E[f(Z)], Z ~ N(0, 1/2), by composite Gauss-Legendre; converges on the
/// sharp posterior transitions that appear at high SNR.
const GaussHermiteRule& noise_rule(std::size_t order);

}  // namespace awf::detail
