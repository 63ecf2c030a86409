// Acceptance checks, one PASS/FAIL line per criterion. Optional arguments
// select criteria by number, e.g. `awf_acceptance 3 5`.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "awf/bench.hpp"
#include "awf/diagnostics.hpp"
#include "awf/gaussian.hpp"
#include "awf/instances.hpp"
#include "awf/minimax.hpp"
#include "awf/projections.hpp"
#include "oracles.hpp"

using namespace awf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string sci(double x) { return fmt("%.2e", x); }

AwfInstance generated(std::size_t m, std::uint64_t seed, Family family,
                      const std::string& mix = "gaussian") {
  GeneratorSpec spec;
  spec.m = m;
  spec.seed = seed;
  spec.family = family;
  spec.modulation_mix = parse_modulation_mix(mix);
  return sample_instance(spec);
}

const Family kConstrained[] = {Family::Sparse, Family::Group, Family::Prefix, Family::Dense};

SaddleState state_of(const Allocation& a) { return {a.p, a.n, a.theta}; }

double sup_dist(const SaddleState& a, const SaddleState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.p.size(); ++i) d = std::max(d, std::abs(a.p[i] - b.p[i]));
  for (std::size_t i = 0; i < a.n.size(); ++i) d = std::max(d, std::abs(a.n[i] - b.n[i]));
  for (std::size_t i = 0; i < a.theta.size(); ++i) {
    d = std::max(d, std::abs(a.theta[i] - b.theta[i]));
  }
  return d;
}

double l2_dist(const SaddleState& a, const SaddleState& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.p.size(); ++i) d += (a.p[i] - b.p[i]) * (a.p[i] - b.p[i]);
  for (std::size_t i = 0; i < a.n.size(); ++i) d += (a.n[i] - b.n[i]) * (a.n[i] - b.n[i]);
  for (std::size_t i = 0; i < a.theta.size(); ++i) {
    d += (a.theta[i] - b.theta[i]) * (a.theta[i] - b.theta[i]);
  }
  return std::sqrt(d);
}

// 1. Brute-force minimax equivalence on two-channel Gaussian instances.
Outcome criterion1() {
  Timer t;
  double worst_br = 0.0, worst_mp = 0.0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    const auto inst = generated(2, 1000 + k, Family::None);
    const auto& c = inst.channels;
    const double ref = oracle::grid_saddle_m2(gaussian_mi, gaussian_mi, c.beta[0], c.beta[1],
                                              c.sigma[0], c.sigma[1], inst.budgets.P,
                                              inst.budgets.N);
    const auto br = solve_frequency_awf(inst, {});
    const auto mp = mirror_prox(inst, {}, gaussian_models(2));
    worst_br = std::max(worst_br, std::abs(br.objective_J - ref));
    worst_mp = std::max(worst_mp, std::abs(mp.objective_J - ref));
  }
  const double secs = t.seconds();
  return {worst_br <= 2e-3 && worst_mp <= 2e-3 && secs < 30.0,
          "max |J - grid| alt-br " + sci(worst_br) + ", mirror-prox " + sci(worst_mp) +
              " (limit 2e-3), " + fmt("%.1f", secs) + " s (limit 30 s)"};
}

// 2. Frequency-domain saddle identities.
Outcome criterion2() {
  double worst_inactive = 0.0, worst_active = 0.0;
  std::size_t unconverged = 0, inactive_channels = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    const auto inst = generated(2 + k % 31, 2000 + k, Family::None);
    const auto r = solve_frequency_awf(inst, {});
    if (!r.converged) ++unconverged;
    const auto& a = r.allocation;
    const double tol = gaussian_act_tol(inst.budgets.P, inst.size());
    const auto res = check_theorem1(inst.channels, a.p, a.n, *a.nu, *a.mu, tol);
    worst_active = std::max(worst_active, res.active);
    for (std::size_t i = 0; i < inst.size(); ++i) {
      if (a.p[i] <= tol) {
        ++inactive_channels;
        worst_inactive = std::max(worst_inactive, a.n[i]);
      }
    }
  }
  return {unconverged == 0 && worst_inactive <= 1e-9 && worst_active <= 1e-6,
          std::to_string(unconverged) + " unconverged; max n on " +
              std::to_string(inactive_channels) + " inactive channels " + sci(worst_inactive) +
              " (limit 1e-9); max identity residual " + sci(worst_active) + " (limit 1e-6)"};
}

// 3. Shifted water-level law and complementary slackness.
Outcome criterion3() {
  const std::size_t sizes[] = {8, 16, 32, 64};
  double worst_law = 0.0, worst_cs = 0.0;
  std::size_t unconverged = 0, binding_rows = 0;
  for (std::uint64_t k = 0; k < 50; ++k) {
    GeneratorSpec spec;
    spec.m = sizes[k % 4];
    spec.seed = 3000 + k;
    spec.family = kConstrained[(k / 4) % 4];
    spec.overrides.slack_lo = 0.002;
    spec.overrides.slack_hi = 0.05;
    const auto inst = sample_instance(spec);
    const auto models = gaussian_models(spec.m);
    SolverConfig cfg;
    cfg.tol = 1e-10;
    cfg.max_iter = 400000;
    const auto r = mirror_prox(inst, cfg, models);
    if (!r.converged) ++unconverged;
    const auto& a = r.allocation;
    const double act = default_act_tol(inst.budgets.P, spec.m);
    const auto kkt = kkt_p_residual(inst, a.p, a.n, a.theta, models, act);
    const auto at = sparse_rmatvec(*inst.constraints, a.theta);
    const auto& c = inst.channels;
    for (std::size_t i = 0; i < spec.m; ++i) {
      if (a.p[i] <= act) continue;
      const double law = 1.0 / (*kkt.level + at[i]) - (c.sigma[i] + a.n[i]) / c.beta[i];
      worst_law = std::max(worst_law, std::abs(law - a.p[i]));
    }
    const auto ap = sparse_matvec(*inst.constraints, a.p);
    const auto ph = inst.constraints->p_hat();
    for (std::size_t s = 0; s < ap.size(); ++s) {
      worst_cs = std::max(worst_cs, std::abs(a.theta[s] * (ap[s] - ph[s])));
      binding_rows += a.theta[s] > 0.0;
    }
  }
  return {unconverged == 0 && worst_law <= 1e-5 && worst_cs <= 1e-6,
          std::to_string(unconverged) + " unconverged; max law residual " + sci(worst_law) +
              " (limit 1e-5); max |theta (Ap - p_hat)| " + sci(worst_cs) + " (limit 1e-6); " +
              std::to_string(binding_rows) + " rows with theta > 0"};
}

// 4. Fixed point of the extragradient map.
Outcome criterion4() {
  double worst = 0.0;
  std::size_t unconverged = 0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Family f = k % 5 == 0 ? Family::None : kConstrained[k % 4];
    const std::string mix = k % 2 ? "mixed-qam" : "gaussian";
    const auto inst = generated(k % 3 == 0 ? 32 : 16, 4000 + k, f, mix);
    const auto models = ModelLibrary::shared().resolve(inst.channels);
    SolverConfig cfg;
    cfg.tol = 1e-11;
    cfg.max_iter = 400000;
    const auto r = mirror_prox(inst, cfg, models);
    if (!r.converged) ++unconverged;
    const auto z = state_of(r.allocation);
    const auto steps = default_steps(inst, models, cfg.seed);
    worst = std::max(worst, sup_dist(z, extragrad_iteration(inst, models, z, steps)));
  }
  return {unconverged == 0 && worst <= 1e-9,
          std::to_string(unconverged) + " unconverged; max one-step move " + sci(worst) +
              " (limit 1e-9)"};
}

// 5. I-MMSE consistency, Gaussian table and 16-QAM saturation.
Outcome criterion5() {
  std::mt19937_64 g(5);
  double worst_fd = 0.0;
  for (const std::string id : {"16qam", "64qam", "256qam"}) {
    const auto& m = *ModelLibrary::shared().get(id);
    const auto& t = m.table();
    std::uniform_real_distribution<double> u(std::log(t.snr.front() * 1.01),
                                             std::log(t.snr.back() / 1.01));
    for (int k = 0; k < 100; ++k) {
      const double gamma = std::exp(u(g));
      const double fd = oracle::central_diff([&](double x) { return eval_mi(m, x); }, gamma,
                                             gamma * 1e-3);
      worst_fd = std::max(worst_fd, std::abs(fd - eval_mmse(m, gamma)));
    }
  }
  const auto gauss = build_table("gaussian-table", gaussian_mmse, -10.0, 30.0, 96);
  double worst_gauss = 0.0;
  for (std::size_t j = 0; j < gauss.table().snr.size(); ++j) {
    worst_gauss = std::max(worst_gauss,
                           std::abs(gauss.table().mi[j] - std::log1p(gauss.table().snr[j])));
  }
  std::uniform_real_distribution<double> db(-10.0, 30.0);
  for (int k = 0; k < 1000; ++k) {
    const double gamma = std::pow(10.0, db(g) / 10.0);
    worst_gauss = std::max(worst_gauss, std::abs(eval_mi(gauss, gamma) - std::log1p(gamma)));
  }
  const double sat =
      std::abs(eval_mi(*ModelLibrary::shared().get("16qam"), 1e3) - 4.0 * std::log(2.0));
  return {worst_fd <= 5e-3 && worst_gauss <= 1e-4 && sat <= 1e-3,
          "max |dI/dgamma - mmse| " + sci(worst_fd) + " (limit 5e-3); Gaussian table error " +
              sci(worst_gauss) + " (limit 1e-4); |I16(1e3) - 4 ln 2| " + sci(sat) +
              " (limit 1e-3)"};
}

// 6. Proximal equivalence.
Outcome criterion6() {
  std::mt19937_64 g(6);
  std::uniform_real_distribution<double> v(-5.0, 5.0), tau(1e-3, 10.0), pos(0.1, 10.0);
  const auto gauss = ModulationModel::gaussian();
  double worst_diff = 0.0, worst_res = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double vv = v(g), t = tau(g), b = pos(g), s = pos(g);
    const double pg = prox_gaussian(vv, t, b, s);
    const double pm = prox_mercury(vv, t, b, s, gauss);
    worst_diff = std::max(worst_diff, std::abs(pg - pm));
    for (double p : {pg, pm}) {
      // At p = 0 the defining equation becomes the boundary inequality.
      const double r = p > 0.0 ? std::abs(p - t * (b / s) * gaussian_mmse(b * p / s) - vv)
                               : std::max(vv + t * b / s, 0.0);
      worst_res = std::max(worst_res, r);
    }
  }
  return {worst_diff <= 1e-8 && worst_res <= 1e-9,
          "max |prox_mercury - prox_gaussian| " + sci(worst_diff) +
              " (limit 1e-8); max equation residual " + sci(worst_res) + " (limit 1e-9)"};
}

// 7. Field against central differences of the Lagrangian.
Outcome criterion7() {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u(0.05, 2.0), th(0.0, 1.0);
  double worst = 0.0;
  std::size_t components = 0;
  for (const std::string mix : {"gaussian", "16qam"}) {
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto inst = generated(8, 7000 + k, kConstrained[k % 4], mix);
      const auto models = ModelLibrary::shared().resolve(inst.channels);
      SaddleState z{std::vector<double>(8), std::vector<double>(8),
                    std::vector<double>(inst.constraint_rows())};
      for (auto& x : z.p) x = u(g);
      for (auto& x : z.n) x = u(g);
      for (auto& x : z.theta) x = th(g);
      const auto field = saddle_field(inst, z, models);
      auto check = [&](std::vector<double>& block, const std::vector<double>& grad,
                       double sign) {
        for (std::size_t i = 0; i < block.size(); ++i) {
          const double x0 = block[i];
          const double fd = oracle::central_diff(
              [&](double x) {
                block[i] = x;
                const double val = lagrangian(inst, z, models);
                block[i] = x0;
                return val;
              },
              x0, 1e-6 * std::max(1.0, std::abs(x0)));
          const double gv = sign * grad[i];
          // Relative error, with magnitudes below 1e-3 measured against 1e-3.
          worst = std::max(worst, std::abs(fd - gv) / std::max(std::abs(gv), 1e-3));
          ++components;
        }
      };
      check(z.p, field.g_p, 1.0);
      check(z.n, field.g_n, 1.0);
      check(z.theta, field.g_theta, -1.0);
    }
  }
  return {worst <= 1e-5, "max relative error " + sci(worst) + " over " +
                             std::to_string(components) + " components (limit 1e-5)"};
}

struct SweepStats {
  double mean_J = 0.0;
  double max_ineq = 0.0, max_kkt_p = 0.0, max_kkt_n = 0.0;
  double worst_feas = 0.0;
  std::size_t unconverged = 0;
};

SweepStats mixed_qam_sweep(std::size_t m, std::size_t count, std::uint64_t seed0) {
  SweepStats s;
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto inst = generated(m, seed0 + k, Family::Sparse, "mixed-qam");
    const auto models = ModelLibrary::shared().resolve(inst.channels);
    const auto r = mirror_prox(inst, {}, models);
    const auto& a = r.allocation;
    s.mean_J += r.objective_J / static_cast<double>(count);
    s.max_ineq = std::max(s.max_ineq, r.ineq_violation);
    s.max_kkt_p = std::max(s.max_kkt_p, r.kkt_p);
    s.max_kkt_n = std::max(s.max_kkt_n, r.kkt_n);
    s.unconverged += !r.converged;
    const double P = inst.budgets.P, N = inst.budgets.N;
    double feas = std::max(
        std::abs(std::accumulate(a.p.begin(), a.p.end(), 0.0) - P) / std::max(1.0, P),
        std::abs(std::accumulate(a.n.begin(), a.n.end(), 0.0) - N) / std::max(1.0, N));
    for (const auto* v : {&a.p, &a.n, &a.theta}) {
      for (double x : *v) feas = std::max(feas, -x);
    }
    s.worst_feas = std::max(s.worst_feas, feas);
  }
  return s;
}

std::string residual_summary(const SweepStats& s) {
  return "max InEq " + sci(s.max_ineq) + " (limit 1e-2), max KKT_p " + sci(s.max_kkt_p) +
         " (limit 1e-2), max KKT_n " + sci(s.max_kkt_n) + " (limit 1e-1)";
}

bool residuals_ok(const SweepStats& s) {
  return s.max_ineq <= 1e-2 && s.max_kkt_p <= 1e-2 && s.max_kkt_n <= 1e-1;
}

// 8. Mixed-QAM m=64 value range and residuals.
Outcome criterion8() {
  Timer t;
  const auto s = mixed_qam_sweep(64, 20, 8000);
  const double secs = t.seconds();
  const bool j_ok = s.mean_J >= 0.40 && s.mean_J <= 0.65;
  return {j_ok && residuals_ok(s) && secs < 300.0,
          "mean J " + fmt("%.4f", s.mean_J) + (j_ok ? " in" : " OUTSIDE") +
              " [0.40, 0.65]; " + residual_summary(s) + "; " +
              std::to_string(s.unconverged) + " flagged; " + fmt("%.1f", secs) +
              " s (limit 300 s)"};
}

// 9. Scale run at m=1024.
Outcome criterion9() {
  Timer t;
  const auto s = mixed_qam_sweep(1024, 3, 9000);
  return {s.worst_feas <= 1e-9 && residuals_ok(s),
          "feasibility error " + sci(s.worst_feas) + " (limit 1e-9); " + residual_summary(s) +
              "; " + std::to_string(s.unconverged) + " flagged; " + fmt("%.1f", t.seconds()) +
              " s"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AWF_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 10. Bitwise replay of benchmark rows.
Outcome criterion10() {
  ModelLibrary& lib = ModelLibrary::shared();
  BenchOptions opt;
  opt.m_list = {16, 32};
  opt.methods = {Method::MirrorProx, Method::Extragrad, Method::Pdhg, Method::AltBr};
  opt.families = {Family::None, Family::Sparse, Family::Dense};
  opt.modulations = {"gaussian", "mixed-qam"};
  opt.cells = 2;
  opt.warmup = 1;
  const auto rows = run_bench(opt, lib);
  std::size_t checked = 0, mismatched = 0;
  for (const auto& row : rows) {
    if (row.is_summary()) continue;
    // Through the CSV text, as a replay from a file would see it.
    const auto parsed = parse_csv_row(format_csv_row(row));
    SolverConfig cfg = opt.config;
    cfg.method = parse_method(parsed.method);
    const auto again = replay_row(parsed, cfg, lib);
    ++checked;
    mismatched += !same_result(parsed, again);
  }
  const auto dir = std::filesystem::temp_directory_path() / "awf_acceptance_replay";
  std::filesystem::create_directories(dir);
  const auto csv = (dir / "bench.csv").string();
  const int gen = run_cli("bench --m 16,64 --methods mirror-prox,pdhg,extragrad --families "
                          "none,sparse --modulation mixed-qam --cells 2 --out " + csv);
  const int replay = run_cli("bench --replay " + csv);
  return {mismatched == 0 && checked > 0 && gen == 0 && replay == 0,
          std::to_string(mismatched) + " of " + std::to_string(checked) +
              " in-process rows mismatched; CLI bench exit " + std::to_string(gen) +
              ", CLI replay exit " + std::to_string(replay)};
}

// 11. Local contraction from a perturbed saddle.
Outcome criterion11() {
  std::mt19937_64 g(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::size_t non_monotone = 0;
  double worst_ratio = 0.0;
  for (std::uint64_t k = 0; k < 20; ++k) {
    const Family f = k < 10 ? Family::None : kConstrained[k % 4];
    const auto inst = generated(4 + k % 5 * 7, 11000 + k, f);
    const auto models = gaussian_models(inst.size());
    SaddleState star;
    if (f == Family::None) {
      star = state_of(solve_frequency_awf(inst, {}).allocation);
    } else {
      SolverConfig cfg;
      cfg.tol = 1e-13;
      cfg.max_iter = 1000000;
      star = state_of(mirror_prox(inst, cfg, models).allocation);
    }
    // Perturbation of Euclidean size 1e-3, then back onto the feasible set.
    SaddleState z = star;
    double norm = 0.0;
    std::vector<double> dir;
    for (std::size_t i = 0; i < z.p.size() + z.n.size() + z.theta.size(); ++i) {
      dir.push_back(nd(g));
      norm += dir.back() * dir.back();
    }
    norm = std::sqrt(norm);
    std::size_t j = 0;
    for (auto* v : {&z.p, &z.n, &z.theta}) {
      for (auto& x : *v) x += 1e-3 * dir[j++] / norm;
    }
    z.p = project_simplex(z.p, {inst.budgets.P});
    z.n = project_simplex(z.n, {inst.budgets.N});
    z.theta = project_orthant(z.theta);
    const double eta = default_steps(inst, models, 0).alpha_p;
    const double d0 = l2_dist(z, star);
    double prev = d0;
    std::size_t used = 0;
    // Below 1e-12 the distance is at the accuracy of the reference point.
    while (used < 50 && prev > 1e-12) {
      z = mirror_prox_step(inst, models, z, eta);
      const double d = l2_dist(z, star);
      if (!(d < prev)) ++non_monotone;
      prev = d;
      ++used;
    }
    const double ratio = std::pow(prev / d0, 1.0 / static_cast<double>(std::max<std::size_t>(used, 1)));
    worst_ratio = std::max(worst_ratio, ratio);
  }
  return {non_monotone == 0 && worst_ratio < 1.0,
          std::to_string(non_monotone) + " non-decreasing steps; worst empirical ratio " +
              fmt("%.4f", worst_ratio) + " (limit < 1)"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"brute-force minimax equivalence (Gaussian, m=2)", criterion1},
      {"frequency-domain saddle identities", criterion2},
      {"constrained water-level law and complementary slackness", criterion3},
      {"extragradient fixed point", criterion4},
      {"I-MMSE consistency of MMSE tables", criterion5},
      {"proximal equivalence", criterion6},
      {"field matches finite differences", criterion7},
      {"mixed-QAM m=64 value range and residuals", criterion8},
      {"m=1024 feasibility and residuals", criterion9},
      {"bitwise benchmark replay", criterion10},
      {"local linear-rate probe", criterion11},
  };
  std::set<std::size_t> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoul(argv[i]));

  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!selected.empty() && !selected.count(k + 1)) continue;
    Timer t;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (k + 1) << ": "
              << criteria[k].first << ": " << o.detail << " [" << fmt("%.1f", t.seconds())
              << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
