#include "awf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "awf/projections.hpp"

namespace awf {

namespace {

void check_sizes(const AwfInstance& inst, std::span<const double> p,
                 std::span<const double> n, const ModelRefs& models) {
  const std::size_t m = inst.size();
  if (p.size() != m || n.size() != m || models.size() != m) {
    throw std::invalid_argument("diagnostics: dimension mismatch");
  }
}

double median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
  return med;
}

std::vector<double> constraint_prices(const AwfInstance& inst,
                                      std::span<const double> theta) {
  const std::size_t m = inst.size();
  if (!inst.constrained() || theta.empty()) return std::vector<double>(m, 0.0);
  return sparse_rmatvec(*inst.constraints, theta);
}

}  // namespace

double default_act_tol(double budget, std::size_t m) {
  return 1e-6 * budget / static_cast<double>(std::max<std::size_t>(m, 1));
}

ModelRefs gaussian_models(std::size_t m) {
  static const ModulationModel model = ModulationModel::gaussian();
  return ModelRefs(m, &model);
}

double objective_J(const AwfInstance& inst, std::span<const double> p,
                   std::span<const double> n, const ModelRefs& models) {
  check_sizes(inst, p, n, models);
  const auto& ch = inst.channels;
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gamma = ch.beta[i] * std::max(p[i], 0.0) /
                         (ch.sigma[i] + std::max(n[i], 0.0));
    total += models[i]->mi(gamma);
  }
  return total / static_cast<double>(p.size());
}

double ineq_violation(const AwfInstance& inst, std::span<const double> p) {
  if (!inst.constrained()) return 0.0;
  const auto& lc = *inst.constraints;
  const auto ap = sparse_matvec(lc, p);
  double s = 0.0;
  for (std::size_t k = 0; k < ap.size(); ++k) {
    const double v = std::max(ap[k] - lc.p_hat()[k], 0.0);
    s += v * v;
  }
  return std::sqrt(s);
}

KktResult kkt_p_residual(const AwfInstance& inst, std::span<const double> p,
                         std::span<const double> n, std::span<const double> theta,
                         const ModelRefs& models, double act_tol) {
  check_sizes(inst, p, n, models);
  const auto& ch = inst.channels;
  const auto price = constraint_prices(inst, theta);
  std::vector<double> u;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= act_tol) continue;
    const double s = ch.sigma[i] + n[i];
    u.push_back(models[i]->mmse(ch.beta[i] * p[i] / s) * ch.beta[i] / s - price[i]);
  }
  KktResult r;
  r.active = u.size();
  if (u.empty()) return r;
  const double nu = median(u);
  for (double x : u) r.residual += std::abs(x - nu);
  r.residual /= static_cast<double>(u.size());
  r.level = nu;
  return r;
}

KktResult kkt_n_residual(const AwfInstance& inst, std::span<const double> p,
                         std::span<const double> n, const ModelRefs& models,
                         double act_tol) {
  check_sizes(inst, p, n, models);
  const auto& ch = inst.channels;
  std::vector<double> w;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (n[i] <= act_tol) continue;
    const double s = ch.sigma[i] + n[i];
    w.push_back(models[i]->mmse(ch.beta[i] * p[i] / s) * ch.beta[i] * p[i] / (s * s));
  }
  KktResult r;
  r.active = w.size();
  if (w.empty()) return r;
  const double med = median(w);
  for (double x : w) r.residual += std::abs(x - med);
  r.residual /= static_cast<double>(w.size());
  r.level = -med;
  return r;
}

double gap_surrogate(const AwfInstance& inst, std::span<const double> p,
                     std::span<const double> n, const ModelRefs& models,
                     std::size_t steps, double stepsize) {
  check_sizes(inst, p, n, models);
  if (steps == 0 || !(stepsize > 0.0)) {
    throw std::invalid_argument("gap_surrogate: need steps >= 1 and stepsize > 0");
  }
  const auto& ch = inst.channels;
  const std::size_t m = p.size();
  std::vector<double> up(p.begin(), p.end());
  std::vector<double> down(n.begin(), n.end());
  std::vector<double> step(m);
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = ch.sigma[i] + n[i];
      step[i] = up[i] + stepsize * models[i]->mmse(ch.beta[i] * up[i] / s) *
                            ch.beta[i] / s;
    }
    up = project_simplex(step, {inst.budgets.P});
  }
  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = ch.sigma[i] + down[i];
      step[i] = down[i] + stepsize * models[i]->mmse(ch.beta[i] * p[i] / s) *
                              ch.beta[i] * p[i] / (s * s);
    }
    down = project_simplex(step, {inst.budgets.N});
  }
  const double j0 = objective_J(inst, p, n, models);
  return (objective_J(inst, up, n, models) - objective_J(inst, p, down, models)) /
         (std::abs(j0) + 1e-8);
}

Metrics compute_metrics(const AwfInstance& inst, const Allocation& allocation,
                        const ModelRefs& models, std::size_t probe_steps,
                        double probe_stepsize) {
  const auto& p = allocation.p;
  const auto& n = allocation.n;
  Metrics out;
  out.J = objective_J(inst, p, n, models);
  out.ineq = ineq_violation(inst, p);
  const auto kp = kkt_p_residual(inst, p, n, allocation.theta, models,
                                 default_act_tol(inst.budgets.P, inst.size()));
  out.kkt_p = kp.residual;
  out.nu_hat = kp.level;
  out.active_count = kp.active;
  out.kkt_n = kkt_n_residual(inst, p, n, models,
                             default_act_tol(inst.budgets.N, inst.size()))
                  .residual;
  out.gap = gap_surrogate(inst, p, n, models, probe_steps, probe_stepsize);
  return out;
}

SolveReport make_report(const AwfInstance& inst, const ModelRefs& models,
                        Allocation allocation, std::string method,
                        std::size_t iterations, double wall_time, bool converged,
                        double residual) {
  SolveReport r;
  const double act = default_act_tol(inst.budgets.P, inst.size());
  r.objective_J = objective_J(inst, allocation.p, allocation.n, models);
  r.ineq_violation = ineq_violation(inst, allocation.p);
  r.kkt_p = kkt_p_residual(inst, allocation.p, allocation.n, allocation.theta,
                           models, act)
                .residual;
  r.kkt_n = kkt_n_residual(inst, allocation.p, allocation.n, models,
                           default_act_tol(inst.budgets.N, inst.size()))
                .residual;
  r.allocation = std::move(allocation);
  r.method = std::move(method);
  r.iterations = iterations;
  r.wall_time = wall_time;
  r.converged = converged;
  r.residual = residual;
  return r;
}

}  // namespace awf
