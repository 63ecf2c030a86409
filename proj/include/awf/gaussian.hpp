#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "awf/config.hpp"
#include "awf/problem.hpp"

namespace awf {

/// Transmit water level nu and the channels with p_i > 0.
struct WaterLevel {
  double nu = 0.0;
  std::vector<std::size_t> active_set;
};

/// Interference dual mu (< 0 whenever the budget binds) and the channels
/// with n_i > 0.
struct InterferenceLevel {
  double mu = 0.0;
  std::vector<std::size_t> active_set;
};

struct WaterFill {
  std::vector<double> p;
  WaterLevel level;
};

struct InterferenceFill {
  std::vector<double> n;
  InterferenceLevel level;
};

/// p_i = max(nu - (sigma_i + n_i) / beta_i, 0) with sum p = P.
WaterFill waterfill_p(const ChannelParams& channels, std::span<const double> n,
                      double P);

/// Worst-case interference against fixed p:
/// n_i = max(-a_i/2 + sqrt(a_i^2 - 4 a_i / mu)/2 - sigma_i, 0), a_i = beta_i p_i,
/// with mu < 0 chosen so that sum n = N. Throws Error if N > 0 and p == 0.
InterferenceFill adversarial_n(const ChannelParams& channels,
                               std::span<const double> p, double N);

/// Saddle pair of one channel for given transmit level nu and interference
/// level c = -mu > 0 (both players at their per-channel optimum).
struct ChannelSaddle {
  double p = 0.0;
  double n = 0.0;
};
ChannelSaddle channel_saddle(double beta, double sigma, double nu, double c);

/// Gaussian frequency-domain AWF (unconstrained, all channels Gaussian).
/// Finds the dual levels (nu, c) by nested bisection on the monotone budget
/// equations, then certifies the result with one best-response round
/// (waterfill_p against n, adversarial_n against the new p). Converged when
/// that round moves the allocation by <= config.tol in sup-norm.
SolveReport solve_frequency_awf(const AwfInstance& instance,
                                const SolverConfig& config);

struct Theorem1Residual {
  double active = 0.0;    // max |mu - (1/(beta nu) - 1/(sigma + n))|
  double inactive = 0.0;  // max n_i over channels with p_i <= act_tol
  std::size_t active_count = 0;

  double max() const { return active > inactive ? active : inactive; }
};

Theorem1Residual check_theorem1(const ChannelParams& channels,
                                std::span<const double> p,
                                std::span<const double> n, double nu, double mu,
                                double act_tol);

/// 1e-7 * budget / m.
double gaussian_act_tol(double budget, std::size_t m);

}  // namespace awf
