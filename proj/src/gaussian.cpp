#include "awf/gaussian.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "awf/diagnostics.hpp"
#include "awf/projections.hpp"

namespace awf {

namespace {

void check_budget(double b, const char* what) {
  if (!(b >= 0.0) || !std::isfinite(b)) {
    throw std::invalid_argument(std::string(what) + " must be nonnegative");
  }
}

// Best-response interference of one channel for c = -mu > 0, in the
// cancellation-free form 2(a/c) / (sqrt(a^2 + 4a/c) + a) - sigma.
double interference(double a, double sigma, double c) {
  if (a <= 0.0) return 0.0;
  const double q = a / c;
  const double root = 2.0 * q / (std::sqrt(a * a + 4.0 * q) + a);
  return std::max(root - sigma, 0.0);
}

std::vector<std::size_t> positive_indices(const std::vector<double>& x) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0) idx.push_back(i);
  }
  return idx;
}

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

struct Levels {
  double nu = 0.0;
  double c = 0.0;
  std::size_t outer_iterations = 0;
};

// Smallest water level nu with sum_i p_i(nu, c) = P.
double level_for_power(const ChannelParams& ch, double c, double P) {
  const std::size_t m = ch.size();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) lo = std::min(lo, ch.sigma[i] / ch.beta[i]);
  auto total = [&](double nu) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      s += channel_saddle(ch.beta[i], ch.sigma[i], nu, c).p;
    }
    return s - P;
  };
  double hi = lo + P + 1.0;
  while (total(hi) < 0.0) hi = lo + 2.0 * (hi - lo);
  return bisect_root(total, lo, hi, 0.0).x;
}

Levels solve_levels(const ChannelParams& ch, double P, double N) {
  const std::size_t m = ch.size();
  double beta_max = 0.0;
  double sigma_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    beta_max = std::max(beta_max, ch.beta[i]);
    sigma_min = std::min(sigma_min, ch.sigma[i]);
  }
  Levels out;
  // Total interference at the matching water level; decreasing in c.
  auto excess = [&](double log_c) {
    ++out.outer_iterations;
    const double c = std::exp(log_c);
    const double nu = level_for_power(ch, c, P);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      s += channel_saddle(ch.beta[i], ch.sigma[i], nu, c).n;
    }
    return s - N;
  };
  // For c >= beta_max P / sigma_min^2 no channel can absorb interference.
  double hi = std::log(beta_max * P / (sigma_min * sigma_min)) + 1.0;
  double lo = hi - 30.0;
  while (excess(lo) <= 0.0) {
    lo -= 30.0;
    if (lo < hi - 600.0) throw Error("interference level search failed");
  }
  const double log_c = bisect_root(excess, lo, hi, 0.0).x;
  out.c = std::exp(log_c);
  out.nu = level_for_power(ch, out.c, P);
  return out;
}

}  // namespace

double gaussian_act_tol(double budget, std::size_t m) {
  return 1e-7 * budget / static_cast<double>(std::max<std::size_t>(m, 1));
}

ChannelSaddle channel_saddle(double beta, double sigma, double nu, double c) {
  ChannelSaddle s;
  if (nu * beta <= sigma) return s;
  // At the joint optimum a = beta p satisfies sigma + n + a = beta nu, so the
  // adversary's response is n = beta nu / (1 + beta nu c) - sigma.
  const double bn = beta * nu;
  s.n = std::max(bn / (1.0 + bn * c) - sigma, 0.0);
  s.p = std::max(nu - (sigma + s.n) / beta, 0.0);
  return s;
}

WaterFill waterfill_p(const ChannelParams& ch, std::span<const double> n,
                      double P) {
  const std::size_t m = ch.size();
  if (m == 0 || n.size() != m) {
    throw std::invalid_argument("waterfill_p: dimension mismatch");
  }
  check_budget(P, "P");
  std::vector<double> base(m);
  for (std::size_t i = 0; i < m; ++i) base[i] = (ch.sigma[i] + n[i]) / ch.beta[i];

  WaterFill out;
  out.p.assign(m, 0.0);
  const double lo = *std::min_element(base.begin(), base.end());
  if (P == 0.0) {
    out.level.nu = lo;
    return out;
  }
  auto excess = [&](double nu) {
    double s = 0.0;
    for (double b : base) s += std::max(nu - b, 0.0);
    return s - P;
  };
  // lo + P fills the best channel alone; nudge up past rounding.
  double hi = lo + P;
  while (excess(hi) < 0.0) hi += std::max(std::abs(hi), P) * 1e-12;
  double nu = bisect_root(excess, lo, hi, 0.0).x;

  // With the active set fixed the level has a closed form; use it when it
  // reproduces the same active set.
  double sum_base = 0.0;
  std::size_t k = 0;
  for (double b : base) {
    if (b < nu) {
      sum_base += b;
      ++k;
    }
  }
  if (k > 0) {
    const double exact = (P + sum_base) / static_cast<double>(k);
    bool same = true;
    for (double b : base) same = same && ((b < nu) == (b < exact));
    if (same) nu = exact;
  }
  for (std::size_t i = 0; i < m; ++i) out.p[i] = std::max(nu - base[i], 0.0);
  out.level.nu = nu;
  out.level.active_set = positive_indices(out.p);
  return out;
}

InterferenceFill adversarial_n(const ChannelParams& ch, std::span<const double> p,
                               double N) {
  const std::size_t m = ch.size();
  if (m == 0 || p.size() != m) {
    throw std::invalid_argument("adversarial_n: dimension mismatch");
  }
  check_budget(N, "N");
  InterferenceFill out;
  out.n.assign(m, 0.0);
  std::vector<double> a(m);
  double a_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    a[i] = ch.beta[i] * std::max(p[i], 0.0);
    a_sum += a[i];
  }
  if (N == 0.0) {
    // Largest marginal damage d/dn log(1 + a/(sigma+n)) at n = 0.
    double best = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      best = std::max(best, a[i] / (ch.sigma[i] * (ch.sigma[i] + a[i])));
    }
    out.level.mu = -best;
    return out;
  }
  if (a_sum == 0.0) throw Error("adversary has no target: p is identically zero");

  double sigma_min = std::numeric_limits<double>::infinity();
  double beta_max = 0.0;
  double p_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sigma_min = std::min(sigma_min, ch.sigma[i]);
    beta_max = std::max(beta_max, ch.beta[i]);
    p_sum += std::max(p[i], 0.0);
  }
  // mu in [-beta_max sum(p) / sigma_min^2, -1e-12], searched in log(-mu).
  auto excess = [&](double log_c) {
    const double c = std::exp(log_c);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += interference(a[i], ch.sigma[i], c);
    return s - N;
  };
  double lo = std::log(1e-12);
  const double hi = std::log(beta_max * p_sum / (sigma_min * sigma_min));
  // Budgets beyond what c = 1e-12 absorbs need a smaller level.
  while (excess(lo) < 0.0 && lo > -700.0) lo -= 30.0;
  const double c = std::exp(bisect_root(excess, lo, std::max(hi, lo + 1.0), 0.0).x);
  for (std::size_t i = 0; i < m; ++i) out.n[i] = interference(a[i], ch.sigma[i], c);
  out.level.mu = -c;
  out.level.active_set = positive_indices(out.n);
  return out;
}

SolveReport solve_frequency_awf(const AwfInstance& instance,
                                const SolverConfig& config) {
  config.validate();
  require_valid(instance);
  if (instance.constrained()) {
    throw DataError("method requires unconstrained instance");
  }
  for (const auto& mod : instance.channels.modulation) {
    if (mod != "gaussian") {
      throw DataError("method requires Gaussian channels, got '" +
                      mod + "'");
    }
  }
  const auto start = std::chrono::steady_clock::now();
  const ChannelParams& ch = instance.channels;
  const std::size_t m = ch.size();
  const double P = instance.budgets.P;
  const double N = instance.budgets.N;

  std::vector<double> p(m, 0.0);
  std::vector<double> n(m, 0.0);
  std::size_t iterations = 0;
  if (P == 0.0) {
    // Every interference allocation is optimal; spread it evenly.
    n.assign(m, N / static_cast<double>(m));
  } else if (N == 0.0) {
    p = waterfill_p(ch, n, P).p;
  } else {
    const Levels lv = solve_levels(ch, P, N);
    iterations = lv.outer_iterations;
    for (std::size_t i = 0; i < m; ++i) {
      const auto s = channel_saddle(ch.beta[i], ch.sigma[i], lv.nu, lv.c);
      p[i] = s.p;
      n[i] = s.n;
    }
  }

  Allocation alloc;
  double displacement = 0.0;
  if (P > 0.0) {
    WaterFill wf = waterfill_p(ch, n, P);
    InterferenceFill af = adversarial_n(ch, wf.p, N);
    displacement = std::max(sup_distance(wf.p, p), sup_distance(af.n, n));
    alloc.p = std::move(wf.p);
    alloc.n = std::move(af.n);
    alloc.nu = wf.level.nu;
    alloc.mu = af.level.mu;
  } else {
    alloc.p = std::move(p);
    alloc.n = std::move(n);
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return make_report(instance, gaussian_models(m), std::move(alloc), "alt-br",
                     iterations, elapsed, displacement <= config.tol, displacement);
}

Theorem1Residual check_theorem1(const ChannelParams& ch, std::span<const double> p,
                                std::span<const double> n, double nu, double mu,
                                double act_tol) {
  const std::size_t m = ch.size();
  if (p.size() != m || n.size() != m) {
    throw std::invalid_argument("check_theorem1: dimension mismatch");
  }
  Theorem1Residual r;
  for (std::size_t i = 0; i < m; ++i) {
    if (p[i] > act_tol) {
      ++r.active_count;
      if (n[i] > act_tol) {
        const double law = 1.0 / (ch.beta[i] * nu) - 1.0 / (ch.sigma[i] + n[i]);
        r.active = std::max(r.active, std::abs(mu - law));
      }
    } else {
      r.inactive = std::max(r.inactive, n[i]);
    }
  }
  return r;
}

}  // namespace awf
