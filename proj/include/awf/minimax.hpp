#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awf/config.hpp"
#include "awf/modulation.hpp"
#include "awf/problem.hpp"

namespace awf {

/// Raised when an iterate leaves the 1e8 * budget ball or becomes non-finite.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> residual_trace)
      : Error(what), trace(std::move(residual_trace)) {}
  std::vector<double> trace;  // recent stationarity residuals
};

/// z = (p, n, theta); theta is empty for unconstrained instances.
struct SaddleState {
  std::vector<double> p;
  std::vector<double> n;
  std::vector<double> theta;
};

/// Ascent direction of the Lagrangian in (p, theta) and its n-gradient:
/// g_p = I'(gamma) beta / (sigma + n) - A^T theta,
/// g_n = -I'(gamma) beta p / (sigma + n)^2, g_theta = A p - p_hat.
/// The field used by the solvers is G = (g_p, -g_n, g_theta).
struct SaddleField {
  std::vector<double> g_p;
  std::vector<double> g_n;
  std::vector<double> g_theta;
};

SaddleField saddle_field(const AwfInstance& instance, const SaddleState& state,
                         const ModelRefs& models);

/// L(p, n, theta) = sum_i I_i(gamma_i) - theta^T (A p - p_hat).
double lagrangian(const AwfInstance& instance, const SaddleState& state,
                  const ModelRefs& models);

/// p = P/m, n = N/m, theta = 0.
SaddleState uniform_state(const AwfInstance& instance);

/// Stopping residual: the largest of KKT_p, KKT_n, the inequality violation,
/// the complementary slackness max_s |theta_s (A p - p_hat)_s| and the
/// positive part of u_i - nu over inactive channels.
double stationarity_residual(const AwfInstance& instance, const SaddleState& state,
                             const ModelRefs& models);

/// Gradient Lipschitz estimate from the field at `samples` random feasible
/// states: secants between state pairs, per-channel secants of small local
/// perturbations, and the coupling norm sqrt(||A||_1 ||A||_inf).
double estimate_lipschitz(const AwfInstance& instance, const ModelRefs& models,
                          std::uint64_t seed, std::size_t samples = 8);

/// Uniform stepsize 0.5 / L_hat.
StepSizes default_steps(const AwfInstance& instance, const ModelRefs& models,
                        std::uint64_t seed);

/// One Mirror-Prox step with scalar stepsize eta.
SaddleState mirror_prox_step(const AwfInstance& instance, const ModelRefs& models,
                             const SaddleState& z, double eta);

/// One iteration of the diagonal-stepsize extragradient skeleton: half step,
/// corrected gradients at the half-step SINR, full step, then the simplex
/// projections of p and n and the orthant projection of theta.
SaddleState extragrad_iteration(const AwfInstance& instance, const ModelRefs& models,
                                const SaddleState& z, const StepSizes& steps);

/// Solvers. `start` defaults to uniform_state. On non-convergence the
/// iterate with the smallest checked residual is returned, flagged.
SolveReport mirror_prox(const AwfInstance& instance, const SolverConfig& config,
                        const ModelRefs& models,
                        std::optional<SaddleState> start = std::nullopt);

SolveReport extragrad_learnedskeleton(const AwfInstance& instance,
                                      const SolverConfig& config,
                                      const ModelRefs& models,
                                      std::optional<SaddleState> start = std::nullopt);

/// Root of p + tau f'(p) = v with f(p) = -ln(1 + beta p / s), clamped at 0.
double prox_gaussian(double v, double tau, double beta, double sigma_plus_n);

/// Root of p - tau (beta / s) mmse(beta p / s) = v on p >= 0 by bisection.
double prox_mercury(double v, double tau, double beta, double sigma_plus_n,
                    const ModulationModel& model);

/// PDHG on the transmitter problem for fixed interference n:
///   nu    <- nu + alpha (sum p - P)
///   theta <- max(theta + alpha (A p - p_hat), 0)
///   p_i   <- prox_i(p_i - tau (nu + (A^T theta)_i))
/// nu here is the marginal-utility price; for Gaussian channels the classical
/// water level of waterfill_p is 1 / nu. The report's allocation carries
/// nu (this price), theta and the fixed n.
SolveReport pdhg(const AwfInstance& instance, const SolverConfig& config,
                 const ModelRefs& models, std::span<const double> n_fixed);

/// Step sizes used by pdhg when none are configured.
PdhgSteps default_pdhg_steps(const AwfInstance& instance, const ModelRefs& models,
                             std::span<const double> n_fixed);

}  // namespace awf
