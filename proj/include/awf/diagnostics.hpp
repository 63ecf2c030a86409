#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "awf/modulation.hpp"
#include "awf/problem.hpp"

namespace awf {

/// 1e-6 * budget / m, the activity threshold used by the KKT residuals.
double default_act_tol(double budget, std::size_t m);

/// Mean mutual information over all m channels, in nats.
double objective_J(const AwfInstance& instance, std::span<const double> p,
                   std::span<const double> n, const ModelRefs& models);

/// ||max(A p - p_hat, 0)||_2; zero for unconstrained instances.
double ineq_violation(const AwfInstance& instance, std::span<const double> p);

struct KktResult {
  double residual = 0.0;
  std::optional<double> level;  // fitted nu or mu; empty when nothing is active
  std::size_t active = 0;
};

/// Transmitter stationarity: u_i = mmse_i beta_i / (sigma_i + n_i) - (A^T theta)_i
/// on {p_i > act_tol}, residual = mean |u_i - median(u)|. An empty theta is
/// read as zero.
KktResult kkt_p_residual(const AwfInstance& instance, std::span<const double> p,
                         std::span<const double> n, std::span<const double> theta,
                         const ModelRefs& models, double act_tol);

/// Adversary stationarity: w_i = mmse_i beta_i p_i / (sigma_i + n_i)^2 on
/// {n_i > act_tol}, mu = -median(w), residual = mean |w_i + mu|.
KktResult kkt_n_residual(const AwfInstance& instance, std::span<const double> p,
                         std::span<const double> n, const ModelRefs& models,
                         double act_tol);

/// Relative gap estimate from a few projected gradient probes:
/// (J(p_up, n) - J(p, n_down)) / (|J(p, n)| + 1e-8). Requires steps >= 1 and
/// stepsize > 0.
double gap_surrogate(const AwfInstance& instance, std::span<const double> p,
                     std::span<const double> n, const ModelRefs& models,
                     std::size_t steps, double stepsize);

struct Metrics {
  double J = 0.0;
  double ineq = 0.0;
  double kkt_p = 0.0;
  double kkt_n = 0.0;
  double gap = 0.0;
  std::optional<double> nu_hat;  // fitted marginal price, A^T theta removed
  std::size_t active_count = 0;
};

/// All metrics with the default activity thresholds (P-based for p,
/// N-based for n).
Metrics compute_metrics(const AwfInstance& instance, const Allocation& allocation,
                        const ModelRefs& models, std::size_t probe_steps,
                        double probe_stepsize);

/// Fills J, inequality violation and both KKT residuals of a report from its
/// allocation.
SolveReport make_report(const AwfInstance& instance, const ModelRefs& models,
                        Allocation allocation, std::string method,
                        std::size_t iterations, double wall_time, bool converged,
                        double residual);

/// Models for an all-Gaussian instance of size m (no table lookups).
ModelRefs gaussian_models(std::size_t m);

}  // namespace awf
