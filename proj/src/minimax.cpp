#include "awf/minimax.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "awf/diagnostics.hpp"
#include "awf/projections.hpp"
#include "awf/random.hpp"

namespace awf {

namespace {

void check_state(const AwfInstance& inst, const SaddleState& z,
                 const ModelRefs& models) {
  const std::size_t m = inst.size();
  const std::size_t s = inst.constraint_rows();
  if (z.p.size() != m || z.n.size() != m || models.size() != m) {
    throw std::invalid_argument("saddle state: dimension mismatch");
  }
  if (z.theta.size() != s) {
    throw std::invalid_argument("saddle state: theta must have one entry per row");
  }
}

double sup_distance(const SaddleState& a, const SaddleState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.p.size(); ++i) d = std::max(d, std::abs(a.p[i] - b.p[i]));
  for (std::size_t i = 0; i < a.n.size(); ++i) d = std::max(d, std::abs(a.n[i] - b.n[i]));
  for (std::size_t i = 0; i < a.theta.size(); ++i) {
    d = std::max(d, std::abs(a.theta[i] - b.theta[i]));
  }
  return d;
}

std::vector<double> prices(const AwfInstance& inst, const std::vector<double>& theta) {
  if (!inst.constrained()) return std::vector<double>(inst.size(), 0.0);
  return sparse_rmatvec(*inst.constraints, theta);
}

double median(std::vector<double> v) {
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
  return med;
}

// Guards every solver loop against runaway iterates.
class DivergenceGuard {
 public:
  explicit DivergenceGuard(const AwfInstance& inst)
      : limit_(1e8 * std::max({1.0, inst.budgets.P, inst.budgets.N})) {}

  void record(double residual) {
    trace_.push_back(residual);
    if (trace_.size() > 16) trace_.pop_front();
  }

  void check(const SaddleState& z, std::size_t iteration, const char* method) const {
    double norm = 0.0;
    bool finite = true;
    for (const auto* v : {&z.p, &z.n, &z.theta}) {
      for (double x : *v) {
        finite = finite && std::isfinite(x);
        norm = std::max(norm, std::abs(x));
      }
    }
    if (finite && norm <= limit_) return;
    std::ostringstream os;
    os << method << " diverged at iteration " << iteration << ": |z|_inf = " << norm
       << " exceeds " << limit_ << "; recent residuals:";
    for (double r : trace_) os << ' ' << r;
    throw DivergenceError(os.str(), {trace_.begin(), trace_.end()});
  }

 private:
  double limit_;
  std::deque<double> trace_;
};

// z + D G(at) with the projections applied block by block.
SaddleState projected_step(const AwfInstance& inst, const SaddleState& z,
                           const SaddleField& g, double a_p, double a_n, double a_t) {
  const std::size_t m = z.p.size();
  std::vector<double> p(m);
  std::vector<double> n(m);
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = z.p[i] + a_p * g.g_p[i];
    n[i] = z.n[i] - a_n * g.g_n[i];
  }
  SaddleState out;
  out.p = project_simplex(p, {inst.budgets.P});
  out.n = project_simplex(n, {inst.budgets.N});
  out.theta.resize(z.theta.size());
  for (std::size_t k = 0; k < z.theta.size(); ++k) {
    out.theta[k] = std::max(z.theta[k] + a_t * g.g_theta[k], 0.0);
  }
  return out;
}

using StepFn = SaddleState (*)(const AwfInstance&, const ModelRefs&,
                               const SaddleState&, const StepSizes&);

SaddleState mirror_prox_adapter(const AwfInstance& inst, const ModelRefs& models,
                                const SaddleState& z, const StepSizes& steps) {
  return mirror_prox_step(inst, models, z, steps.alpha_p);
}

SolveReport run_extragradient(const AwfInstance& inst, const SolverConfig& config,
                              const ModelRefs& models,
                              std::optional<SaddleState> start, StepFn step,
                              const char* method) {
  config.validate();
  require_valid(inst);
  const auto t0 = std::chrono::steady_clock::now();
  const StepSizes steps = config.steps ? *config.steps
                                       : default_steps(inst, models, config.seed);
  steps.validate();

  SaddleState z = start ? std::move(*start) : uniform_state(inst);
  check_state(inst, z, models);

  DivergenceGuard guard(inst);
  SaddleState best = z;
  double best_residual = std::numeric_limits<double>::infinity();
  bool converged = false;
  std::size_t iterations = 0;
  double displacement = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= config.max_iter; ++k) {
    SaddleState next = step(inst, models, z, steps);
    iterations = k;
    guard.check(next, k, method);
    if (k % config.check_every == 0 || k == config.max_iter) {
      displacement = sup_distance(next, z);
    }
    z = std::move(next);
    if (k % config.check_every != 0 && k != config.max_iter) continue;
    const double r = stationarity_residual(inst, z, models);
    guard.record(r);
    if (r < best_residual) {
      best_residual = r;
      best = z;
    }
    if (r <= config.tol &&
        (config.displacement_tol <= 0.0 || displacement <= config.displacement_tol)) {
      converged = true;
      break;
    }
  }
  SaddleState& out = converged ? z : best;
  const double residual = converged ? stationarity_residual(inst, z, models)
                                    : best_residual;
  Allocation alloc;
  alloc.p = std::move(out.p);
  alloc.n = std::move(out.n);
  alloc.theta = std::move(out.theta);
  const auto kp = kkt_p_residual(inst, alloc.p, alloc.n, alloc.theta, models,
                                 default_act_tol(inst.budgets.P, inst.size()));
  const auto kn = kkt_n_residual(inst, alloc.p, alloc.n, models,
                                 default_act_tol(inst.budgets.N, inst.size()));
  alloc.nu = kp.level;
  alloc.mu = kn.level;
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return make_report(inst, models, std::move(alloc), method, iterations, elapsed,
                     converged, residual);
}

}  // namespace

SaddleField saddle_field(const AwfInstance& inst, const SaddleState& z,
                         const ModelRefs& models) {
  check_state(inst, z, models);
  const auto& ch = inst.channels;
  const std::size_t m = inst.size();
  const auto price = prices(inst, z.theta);
  SaddleField g;
  g.g_p.resize(m);
  g.g_n.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = ch.sigma[i] + z.n[i];
    const double mmse = models[i]->mmse(ch.beta[i] * z.p[i] / s);
    g.g_p[i] = mmse * ch.beta[i] / s - price[i];
    g.g_n[i] = -mmse * ch.beta[i] * z.p[i] / (s * s);
  }
  if (inst.constrained()) {
    g.g_theta = sparse_matvec(*inst.constraints, z.p);
    const auto& p_hat = inst.constraints->p_hat();
    for (std::size_t k = 0; k < g.g_theta.size(); ++k) g.g_theta[k] -= p_hat[k];
  }
  return g;
}

double lagrangian(const AwfInstance& inst, const SaddleState& z,
                  const ModelRefs& models) {
  check_state(inst, z, models);
  const auto& ch = inst.channels;
  double total = 0.0;
  for (std::size_t i = 0; i < inst.size(); ++i) {
    total += models[i]->mi(ch.beta[i] * z.p[i] / (ch.sigma[i] + z.n[i]));
  }
  if (inst.constrained()) {
    const auto ap = sparse_matvec(*inst.constraints, z.p);
    const auto& p_hat = inst.constraints->p_hat();
    for (std::size_t k = 0; k < ap.size(); ++k) total -= z.theta[k] * (ap[k] - p_hat[k]);
  }
  return total;
}

SaddleState uniform_state(const AwfInstance& inst) {
  const std::size_t m = inst.size();
  const double md = static_cast<double>(m);
  SaddleState z;
  z.p.assign(m, inst.budgets.P / md);
  z.n.assign(m, inst.budgets.N / md);
  z.theta.assign(inst.constraint_rows(), 0.0);
  return z;
}

double stationarity_residual(const AwfInstance& inst, const SaddleState& z,
                             const ModelRefs& models) {
  check_state(inst, z, models);
  const std::size_t m = inst.size();
  const double act_p = default_act_tol(inst.budgets.P, m);
  const double act_n = default_act_tol(inst.budgets.N, m);
  const auto kp = kkt_p_residual(inst, z.p, z.n, z.theta, models, act_p);
  const auto kn = kkt_n_residual(inst, z.p, z.n, models, act_n);
  double r = std::max({kp.residual, kn.residual, ineq_violation(inst, z.p)});

  // Sign conditions on the inactive coordinates, which the equalization
  // residuals above do not see.
  const auto& ch = inst.channels;
  const auto price = prices(inst, z.theta);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = ch.sigma[i] + z.n[i];
    const double mmse = models[i]->mmse(ch.beta[i] * z.p[i] / s);
    if (kp.level && z.p[i] <= act_p) {
      r = std::max(r, mmse * ch.beta[i] / s - price[i] - *kp.level);
    }
    if (kn.level && z.n[i] <= act_n && z.p[i] > act_p) {
      r = std::max(r, mmse * ch.beta[i] * z.p[i] / (s * s) + *kn.level);
    }
  }
  if (inst.constrained()) {
    const auto ap = sparse_matvec(*inst.constraints, z.p);
    const auto& p_hat = inst.constraints->p_hat();
    for (std::size_t k = 0; k < ap.size(); ++k) {
      r = std::max(r, std::abs(z.theta[k] * (ap[k] - p_hat[k])));
    }
  }
  return r;
}

double estimate_lipschitz(const AwfInstance& inst, const ModelRefs& models,
                          std::uint64_t seed, std::size_t samples) {
  require_valid(inst);
  if (samples < 2) throw std::invalid_argument("estimate_lipschitz: need >= 2 samples");
  const std::size_t m = inst.size();
  const std::size_t rows = inst.constraint_rows();
  const auto& ch = inst.channels;
  auto rng = make_engine(seed, 0x115c);

  double theta_scale = 0.0;
  for (std::size_t i = 0; i < m; ++i) theta_scale += ch.beta[i] / ch.sigma[i];
  theta_scale /= static_cast<double>(m);

  auto random_simplex = [&](double budget) {
    std::vector<double> x(m);
    double s = 0.0;
    for (auto& v : x) {
      v = -std::log1p(-uniform01(rng));
      s += v;
    }
    for (auto& v : x) v *= budget / s;
    return x;
  };

  std::vector<SaddleState> states(samples);
  std::vector<SaddleField> fields(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    states[k].p = random_simplex(inst.budgets.P);
    states[k].n = random_simplex(inst.budgets.N);
    states[k].theta.resize(rows);
    for (auto& t : states[k].theta) t = theta_scale * uniform01(rng);
    fields[k] = saddle_field(inst, states[k], models);
  }

  auto sq = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  double L = 0.0;
  for (std::size_t a = 0; a < samples; ++a) {
    for (std::size_t b = a + 1; b < samples; ++b) {
      const double dz = sq(states[a].p, states[b].p) + sq(states[a].n, states[b].n) +
                        sq(states[a].theta, states[b].theta);
      const double dg = sq(fields[a].g_p, fields[b].g_p) +
                        sq(fields[a].g_n, fields[b].g_n) +
                        sq(fields[a].g_theta, fields[b].g_theta);
      if (dz > 0.0) L = std::max(L, std::sqrt(dg / dz));
    }
  }

  // Local secants resolve the curvature of individual channels, which the
  // pairwise secants average out.
  const double eps = 1e-4;
  const double p_unit = inst.budgets.P / static_cast<double>(m);
  const double n_unit = inst.budgets.N / static_cast<double>(m);
  for (std::size_t k = 0; k < samples; ++k) {
    SaddleState near = states[k];
    for (std::size_t i = 0; i < m; ++i) {
      near.p[i] = std::max(near.p[i] + eps * (near.p[i] + p_unit) *
                                           (2.0 * uniform01(rng) - 1.0),
                           0.0);
      near.n[i] = std::max(near.n[i] + eps * (near.n[i] + n_unit) *
                                           (2.0 * uniform01(rng) - 1.0),
                           0.0);
    }
    const SaddleField g = saddle_field(inst, near, models);
    for (std::size_t i = 0; i < m; ++i) {
      const double dp = near.p[i] - states[k].p[i];
      const double dn = near.n[i] - states[k].n[i];
      const double dz = dp * dp + dn * dn;
      if (dz == 0.0) continue;
      const double gp = g.g_p[i] - fields[k].g_p[i];
      const double gn = g.g_n[i] - fields[k].g_n[i];
      L = std::max(L, std::sqrt((gp * gp + gn * gn) / dz));
    }
  }

  if (inst.constrained()) {
    const auto& lc = *inst.constraints;
    std::vector<double> row_sum(lc.rows(), 0.0);
    std::vector<double> col_sum(lc.cols(), 0.0);
    for (const auto& t : lc.entries()) {
      row_sum[t.row] += std::abs(t.val);
      col_sum[t.col] += std::abs(t.val);
    }
    const double r = *std::max_element(row_sum.begin(), row_sum.end());
    const double c = *std::max_element(col_sum.begin(), col_sum.end());
    L = std::max(L, std::sqrt(r * c));
  }
  if (!(L > 0.0) || !std::isfinite(L)) L = 1.0;
  return L;
}

StepSizes default_steps(const AwfInstance& inst, const ModelRefs& models,
                        std::uint64_t seed) {
  const double eta = 0.5 / estimate_lipschitz(inst, models, seed);
  StepSizes s = StepSizes::uniform(std::clamp(eta, StepSizes{}.clamp_lo,
                                              StepSizes{}.clamp_hi));
  return s;
}

SaddleState mirror_prox_step(const AwfInstance& inst, const ModelRefs& models,
                             const SaddleState& z, double eta) {
  const SaddleField g = saddle_field(inst, z, models);
  const SaddleState half = projected_step(inst, z, g, eta, eta, eta);
  const SaddleField g_half = saddle_field(inst, half, models);
  return projected_step(inst, z, g_half, eta, eta, eta);
}

SaddleState extragrad_iteration(const AwfInstance& inst, const ModelRefs& models,
                                const SaddleState& z, const StepSizes& steps) {
  const std::size_t m = inst.size();
  const std::size_t rows = z.theta.size();
  const double a_p = steps.alpha_p;
  const double a_n = steps.alpha_n;
  const double a_t = steps.alpha_theta;

  // SINR and gradients at z.
  const SaddleField g = saddle_field(inst, z, models);

  // Half step.
  const SaddleState half = projected_step(inst, z, g, a_p, a_n, a_t);

  // Corrected SINR and gradients at the half step.
  const SaddleField gc = saddle_field(inst, half, models);

  // Full step from z.
  SaddleState full;
  full.p.resize(m);
  full.n.resize(m);
  full.theta.resize(rows);
  for (std::size_t i = 0; i < m; ++i) {
    full.p[i] = z.p[i] + a_p * gc.g_p[i];
    full.n[i] = z.n[i] - a_n * gc.g_n[i];
  }
  for (std::size_t k = 0; k < rows; ++k) full.theta[k] = z.theta[k] + a_t * gc.g_theta[k];

  // Budget projections, then the dual orthant.
  full.p = project_simplex(full.p, {inst.budgets.P});
  full.n = project_simplex(full.n, {inst.budgets.N});
  full.theta = project_orthant(full.theta);
  return full;
}

SolveReport mirror_prox(const AwfInstance& inst, const SolverConfig& config,
                        const ModelRefs& models, std::optional<SaddleState> start) {
  return run_extragradient(inst, config, models, std::move(start),
                           &mirror_prox_adapter, "mirror-prox");
}

SolveReport extragrad_learnedskeleton(const AwfInstance& inst,
                                      const SolverConfig& config,
                                      const ModelRefs& models,
                                      std::optional<SaddleState> start) {
  return run_extragradient(inst, config, models, std::move(start),
                           &extragrad_iteration, "extragrad");
}

double prox_gaussian(double v, double tau, double beta, double s) {
  if (!(tau > 0.0) || !(beta > 0.0) || !(s > 0.0)) {
    throw std::invalid_argument("prox_gaussian: tau, beta, sigma+n must be positive");
  }
  // Positive root of beta p^2 + b p - c = 0 with b = s - beta v,
  // c = v s + tau beta.
  const double b = s - beta * v;
  const double c = v * s + tau * beta;
  if (c <= 0.0) return 0.0;
  const double disc = std::sqrt(b * b + 4.0 * beta * c);
  if (b >= 0.0) return 2.0 * c / (b + disc);
  return (disc - b) / (2.0 * beta);
}

double prox_mercury(double v, double tau, double beta, double s,
                    const ModulationModel& model) {
  if (!(tau > 0.0) || !(beta > 0.0) || !(s > 0.0)) {
    throw std::invalid_argument("prox_mercury: tau, beta, sigma+n must be positive");
  }
  const double k = tau * beta / s;
  // phi is strictly increasing because the MMSE is nonincreasing.
  auto phi = [&](double p) { return p - k * model.mmse(beta * p / s) - v; };
  if (phi(0.0) >= 0.0) return 0.0;
  const double hi = std::max(v, 0.0) + k;
  if (phi(hi) <= 0.0) return hi;
  return bisect_root(phi, 0.0, hi, 0.0).x;
}

PdhgSteps default_pdhg_steps(const AwfInstance& inst, const ModelRefs& models,
                             std::span<const double> n_fixed) {
  const std::size_t m = inst.size();
  const auto& ch = inst.channels;
  const double p0 = inst.budgets.P / static_cast<double>(m);
  // tau ~ inverse curvature of a typical channel, so one prox step moves p
  // most of the way to its best response.
  std::vector<double> inv_curv(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double s = ch.sigma[i] + n_fixed[i];
    const double q = (s + ch.beta[i] * p0) / ch.beta[i];
    (void)models;
    inv_curv[i] = q * q;
  }
  PdhgSteps st;
  st.tau = median(inv_curv);
  double coupling = static_cast<double>(m);
  if (inst.constrained()) {
    const auto& lc = *inst.constraints;
    std::vector<double> row_sum(lc.rows(), 0.0);
    std::vector<double> col_sum(lc.cols(), 0.0);
    for (const auto& t : lc.entries()) {
      row_sum[t.row] += std::abs(t.val);
      col_sum[t.col] += std::abs(t.val);
    }
    coupling += *std::max_element(row_sum.begin(), row_sum.end()) *
                *std::max_element(col_sum.begin(), col_sum.end());
  }
  st.alpha = 1.8 / (st.tau * coupling);
  return st;
}

SolveReport pdhg(const AwfInstance& inst, const SolverConfig& config,
                 const ModelRefs& models, std::span<const double> n_fixed) {
  config.validate();
  require_valid(inst);
  const std::size_t m = inst.size();
  if (n_fixed.size() != m || models.size() != m) {
    throw std::invalid_argument("pdhg: dimension mismatch");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const auto& ch = inst.channels;
  const double P = inst.budgets.P;
  const PdhgSteps st = config.pdhg_steps ? *config.pdhg_steps
                                         : default_pdhg_steps(inst, models, n_fixed);
  st.validate();

  std::vector<double> s(m);
  for (std::size_t i = 0; i < m; ++i) s[i] = ch.sigma[i] + n_fixed[i];
  auto prox = [&](std::size_t i, double v) {
    return models[i]->is_gaussian() ? prox_gaussian(v, st.tau, ch.beta[i], s[i])
                                    : prox_mercury(v, st.tau, ch.beta[i], s[i],
                                                   *models[i]);
  };

  SaddleState z;
  z.p.assign(m, P / static_cast<double>(m));
  z.n.assign(n_fixed.begin(), n_fixed.end());
  z.theta.assign(inst.constraint_rows(), 0.0);
  double nu = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    nu += models[i]->mmse(ch.beta[i] * z.p[i] / s[i]) * ch.beta[i] / s[i];
  }
  nu /= static_cast<double>(m);

  DivergenceGuard guard(inst);
  bool converged = false;
  double residual = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::vector<double> ap;
  for (std::size_t k = 1; k <= config.max_iter; ++k) {
    iterations = k;
    double sum_p = 0.0;
    for (double x : z.p) sum_p += x;
    const double nu_next = nu + st.alpha * (sum_p - P);
    std::vector<double> theta_next(z.theta.size());
    if (inst.constrained()) {
      ap = sparse_matvec(*inst.constraints, z.p);
      const auto& p_hat = inst.constraints->p_hat();
      for (std::size_t r = 0; r < ap.size(); ++r) {
        theta_next[r] = std::max(z.theta[r] + st.alpha * (ap[r] - p_hat[r]), 0.0);
      }
    }
    const auto price = prices(inst, theta_next);
    std::vector<double> p_next(m);
    double move = std::abs(nu_next - nu);
    for (std::size_t i = 0; i < m; ++i) {
      p_next[i] = prox(i, z.p[i] - st.tau * (nu_next + price[i]));
      move = std::max(move, std::abs(p_next[i] - z.p[i]));
    }
    for (std::size_t r = 0; r < theta_next.size(); ++r) {
      move = std::max(move, std::abs(theta_next[r] - z.theta[r]));
    }
    nu = nu_next;
    z.theta = std::move(theta_next);
    z.p = std::move(p_next);
    guard.check(z, k, "pdhg");

    if (k % config.check_every != 0 && k != config.max_iter) continue;
    double total = 0.0;
    for (double x : z.p) total += x;
    double r = std::max(move, std::abs(total - P));
    r = std::max(r, ineq_violation(inst, z.p));
    if (inst.constrained()) {
      ap = sparse_matvec(*inst.constraints, z.p);
      const auto& p_hat = inst.constraints->p_hat();
      for (std::size_t q = 0; q < ap.size(); ++q) {
        r = std::max(r, std::abs(z.theta[q] * (ap[q] - p_hat[q])));
      }
    }
    residual = r;
    guard.record(r);
    if (r <= config.tol) {
      converged = true;
      break;
    }
  }

  Allocation alloc;
  alloc.p = project_simplex(z.p, {P});
  alloc.n = std::move(z.n);
  alloc.theta = std::move(z.theta);
  alloc.nu = nu;
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return make_report(inst, models, std::move(alloc), "pdhg", iterations, elapsed,
                     converged, residual);
}

}  // namespace awf
