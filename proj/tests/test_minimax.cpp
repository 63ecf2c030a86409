#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "awf/diagnostics.hpp"
#include "awf/gaussian.hpp"
#include "awf/instances.hpp"
#include "awf/minimax.hpp"
#include "awf/projections.hpp"
#include "oracles.hpp"

using namespace awf;

namespace {

AwfInstance symmetric_instance() {
  AwfInstance inst;
  inst.channels.beta = {1.0, 1.0};
  inst.channels.sigma = {1.0, 1.0};
  inst.channels.modulation = {"gaussian", "gaussian"};
  inst.budgets = {2.0, 2.0};
  return inst;
}

AwfInstance generated(std::size_t m, std::uint64_t seed, Family family,
                      const std::string& mix = "gaussian") {
  GeneratorSpec spec;
  spec.m = m;
  spec.seed = seed;
  spec.family = family;
  spec.modulation_mix = parse_modulation_mix(mix);
  return sample_instance(spec);
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

double max_abs_diff(const SaddleState& a, const SaddleState& b) {
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

SaddleState state_of(const Allocation& a) { return {a.p, a.n, a.theta}; }

}  // namespace

TEST_CASE("saddle_field examples") {
  AwfInstance one;
  one.channels.beta = {1.0};
  one.channels.sigma = {1.0};
  one.channels.modulation = {"gaussian"};
  one.budgets = {1.0, 1.0};
  const auto models = gaussian_models(1);
  auto g = saddle_field(one, {{1.0}, {0.0}, {}}, models);
  CHECK(g.g_p[0] == 0.5);
  CHECK(g.g_n[0] == -0.5);

  const auto inst = generated(8, 1, Family::Sparse);
  SaddleState z = uniform_state(inst);
  std::fill(z.p.begin(), z.p.end(), 0.0);
  g = saddle_field(inst, z, gaussian_models(8));
  for (double x : g.g_n) CHECK(x == 0.0);
}

TEST_CASE("saddle_field matches finite differences of the Lagrangian") {
  std::mt19937_64 g(31);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (const std::string mix : {"gaussian", "16qam"}) {
    const auto inst = generated(6, 3, Family::Sparse, mix);
    const auto models = ModelLibrary::shared().resolve(inst.channels);
    for (int trial = 0; trial < 10; ++trial) {
      SaddleState z{std::vector<double>(6), std::vector<double>(6),
                    std::vector<double>(inst.constraint_rows())};
      for (auto& x : z.p) x = u(g);
      for (auto& x : z.n) x = u(g);
      for (auto& x : z.theta) x = u(g);
      const auto field = saddle_field(inst, z, models);
      auto check_block = [&](std::vector<double>& block, const std::vector<double>& grad,
                             double sign) {
        for (std::size_t i = 0; i < block.size(); ++i) {
          const double x0 = block[i];
          const double h = 1e-6 * std::max(1.0, x0);
          const double fd = oracle::central_diff(
              [&](double x) {
                block[i] = x;
                const double v = lagrangian(inst, z, models);
                block[i] = x0;
                return v;
              },
              x0, h);
          const double gv = sign * grad[i];
          CHECK(std::abs(fd - gv) <= 1e-5 * std::max(std::abs(gv), 1e-3));
        }
      };
      check_block(z.p, field.g_p, 1.0);
      check_block(z.n, field.g_n, 1.0);
      check_block(z.theta, field.g_theta, -1.0);
    }
  }
}

TEST_CASE("mirror_prox reaches the symmetric saddle") {
  const auto inst = symmetric_instance();
  SolverConfig cfg;
  cfg.max_iter = 5000;
  cfg.tol = 1e-10;
  const auto r = mirror_prox(inst, cfg, gaussian_models(2));
  CHECK(r.iterations <= 5000);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(std::abs(r.allocation.p[i] - 1.0) <= 1e-6);
    CHECK(std::abs(r.allocation.n[i] - 1.0) <= 1e-6);
  }
  CHECK(r.objective_J == doctest::Approx(std::log(1.5)).epsilon(1e-8));
}

TEST_CASE("mirror_prox agrees with the frequency-domain solver") {
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = generated(16, 60 + trial, Family::None);
    SolverConfig cfg;
    cfg.tol = 1e-9;
    cfg.max_iter = 100000;
    const auto a = mirror_prox(inst, cfg, gaussian_models(16));
    const auto b = solve_frequency_awf(inst, {});
    CHECK(a.converged);
    CHECK(std::abs(a.objective_J - b.objective_J) <= 1e-6);
    CHECK(stationarity_residual(inst, state_of(b.allocation), gaussian_models(16)) <= 1e-8);
  }
}

TEST_CASE("mirror_prox on a constrained m=64 Gaussian instance") {
  const auto inst = generated(64, 7, Family::Sparse);
  const auto r = mirror_prox(inst, {}, gaussian_models(64));
  CHECK(r.converged);
  CHECK(r.ineq_violation <= 5e-3);
  CHECK(r.kkt_p <= 5e-3);
}

TEST_CASE("mirror_prox on a two-channel 16-QAM instance matches the grid oracle") {
  for (int trial = 0; trial < 4; ++trial) {
    const auto inst = generated(2, 70 + trial, Family::None, "16qam");
    const auto models = ModelLibrary::shared().resolve(inst.channels);
    const auto r = mirror_prox(inst, {}, models);
    const auto& c = inst.channels;
    const auto mi = [&](double g) { return eval_mi(*models[0], g); };
    const double ref = oracle::grid_saddle_m2(mi, mi, c.beta[0], c.beta[1], c.sigma[0],
                                              c.sigma[1], inst.budgets.P, inst.budgets.N);
    CHECK(std::abs(r.objective_J - ref) <= 2e-3);
  }
}

TEST_CASE("extragrad with equal stepsizes reproduces mirror_prox") {
  for (Family f : {Family::None, Family::Sparse, Family::Dense}) {
    const auto inst = generated(12, 80, f, "mixed-qam");
    const auto models = ModelLibrary::shared().resolve(inst.channels);
    SolverConfig cfg;
    cfg.steps = default_steps(inst, models, 0);
    cfg.max_iter = 500;
    const auto a = mirror_prox(inst, cfg, models);
    const auto b = extragrad_learnedskeleton(inst, cfg, models);
    CHECK(a.iterations == b.iterations);
    CHECK(max_abs_diff(state_of(a.allocation), state_of(b.allocation)) <= 1e-10);
  }
}

TEST_CASE("a converged point is a fixed point of the extragradient map") {
  for (Family f : {Family::None, Family::Group}) {
    const auto inst = generated(16, 90, f);
    const auto models = gaussian_models(16);
    SolverConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_iter = 200000;
    const auto r = mirror_prox(inst, cfg, models);
    const auto steps = default_steps(inst, models, 0);
    const auto z = state_of(r.allocation);
    CHECK(max_abs_diff(z, extragrad_iteration(inst, models, z, steps)) <= 1e-9);
  }
}

TEST_CASE("stepsize validation") {
  CHECK_THROWS_AS(StepSizes::uniform(0.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS((StepSizes{1.0, 0.0, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS(StepSizes::uniform(1e5).validate(), std::invalid_argument);
  CHECK_NOTHROW(StepSizes::uniform(0.1).validate());
  SolverConfig cfg;
  cfg.steps = StepSizes::uniform(0.0);
  CHECK_THROWS_AS(mirror_prox(symmetric_instance(), cfg, gaussian_models(2)),
                  std::invalid_argument);
  CHECK_THROWS_AS((PdhgSteps{0.0, 1.0}).validate(), std::invalid_argument);
  CHECK_THROWS_AS((PdhgSteps{1.0, 0.0}).validate(), std::invalid_argument);
}

TEST_CASE("iterates stay feasible after every iteration") {
  for (Family f : {Family::Sparse, Family::Prefix, Family::Dense}) {
    const auto inst = generated(24, 95, f, "mixed-qam");
    const auto models = ModelLibrary::shared().resolve(inst.channels);
    const auto steps = default_steps(inst, models, 0);
    SaddleState z = uniform_state(inst);
    const double P = inst.budgets.P, N = inst.budgets.N;
    for (int k = 0; k < 300; ++k) {
      z = (k % 2) ? mirror_prox_step(inst, models, z, steps.alpha_p)
                  : extragrad_iteration(inst, models, z, steps);
      CHECK(std::abs(sum(z.p) - P) <= 1e-9 * std::max(1.0, P));
      CHECK(std::abs(sum(z.n) - N) <= 1e-9 * std::max(1.0, N));
      CHECK(*std::min_element(z.p.begin(), z.p.end()) >= 0.0);
      CHECK(*std::min_element(z.n.begin(), z.n.end()) >= 0.0);
      CHECK(*std::min_element(z.theta.begin(), z.theta.end()) >= 0.0);
    }
  }
}

TEST_CASE("divergence is reported with a trace") {
  const auto inst = generated(8, 5, Family::Sparse);
  auto start = uniform_state(inst);
  std::fill(start.theta.begin(), start.theta.end(), 1e12);
  SolverConfig cfg;
  cfg.check_every = 1;
  CHECK_THROWS_AS(mirror_prox(inst, cfg, gaussian_models(8), start), DivergenceError);
}

TEST_CASE("shifted water-level law on constrained Gaussian solves") {
  for (int trial = 0; trial < 4; ++trial) {
    const Family f = trial % 2 ? Family::Sparse : Family::Group;
    const auto inst = generated(16, 110 + trial, f);
    const auto models = gaussian_models(16);
    SolverConfig cfg;
    cfg.tol = 1e-10;
    cfg.max_iter = 200000;
    const auto r = mirror_prox(inst, cfg, models);
    REQUIRE(r.converged);
    const auto& a = r.allocation;
    const auto kkt = kkt_p_residual(inst, a.p, a.n, a.theta, models,
                                    default_act_tol(inst.budgets.P, 16));
    REQUIRE(kkt.level.has_value());
    const auto at = sparse_rmatvec(*inst.constraints, a.theta);
    const auto& c = inst.channels;
    for (std::size_t i = 0; i < 16; ++i) {
      if (a.p[i] <= default_act_tol(inst.budgets.P, 16)) continue;
      const double law = 1.0 / (*kkt.level + at[i]) - (c.sigma[i] + a.n[i]) / c.beta[i];
      CHECK(std::abs(law - a.p[i]) <= 1e-5);
    }
    const auto ap = sparse_matvec(*inst.constraints, a.p);
    const auto ph = inst.constraints->p_hat();
    for (std::size_t s = 0; s < ap.size(); ++s) {
      CHECK(std::abs(a.theta[s] * (ap[s] - ph[s])) <= 1e-6);
    }
  }
}

TEST_CASE("mercury water-level residual is the reported KKT_p") {
  const auto inst = generated(32, 120, Family::Sparse, "mixed-qam");
  const auto models = ModelLibrary::shared().resolve(inst.channels);
  const auto r = mirror_prox(inst, {}, models);
  const auto& a = r.allocation;
  const auto field = saddle_field(inst, state_of(a), models);
  const double tol = default_act_tol(inst.budgets.P, 32);
  std::vector<double> u;
  for (std::size_t i = 0; i < 32; ++i) {
    if (a.p[i] > tol) u.push_back(field.g_p[i]);
  }
  REQUIRE(!u.empty());
  const double nu = median(u);
  double mean = 0.0;
  for (double x : u) mean += std::abs(x - nu);
  mean /= static_cast<double>(u.size());
  CHECK(mean == doctest::Approx(r.kkt_p).epsilon(1e-10));
}

TEST_CASE("local convergence from a perturbed saddle") {
  std::mt19937_64 g(33);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    const auto inst = generated(8, 130 + trial, Family::None);
    const auto models = gaussian_models(8);
    const auto star = solve_frequency_awf(inst, {}).allocation;
    SaddleState z = state_of(star);
    for (auto& x : z.p) x += 1e-3 * nd(g);
    for (auto& x : z.n) x += 1e-3 * nd(g);
    z.p = project_simplex(z.p, {inst.budgets.P});
    z.n = project_simplex(z.n, {inst.budgets.N});
    const double eta = default_steps(inst, models, 0).alpha_p;
    double prev = l2_dist(z, state_of(star));
    const double first = prev;
    for (int k = 0; k < 50; ++k) {
      z = mirror_prox_step(inst, models, z, eta);
      const double d = l2_dist(z, state_of(star));
      CHECK(d <= prev * (1.0 + 1e-9));
      prev = d;
    }
    CHECK(prev < first);
  }
}

TEST_CASE("Lipschitz estimate is deterministic and positive") {
  const auto inst = generated(16, 140, Family::Sparse, "mixed-qam");
  const auto models = ModelLibrary::shared().resolve(inst.channels);
  const double a = estimate_lipschitz(inst, models, 5);
  CHECK(a > 0.0);
  CHECK(a == estimate_lipschitz(inst, models, 5));
}

TEST_CASE("prox_gaussian") {
  CHECK(prox_gaussian(0.0, 1.0, 1.0, 1.0) == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0).epsilon(1e-14));
  CHECK(prox_gaussian(0.7, 1e-14, 2.0, 1.0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(prox_gaussian(-0.7, 1e-14, 2.0, 1.0) == 0.0);
  std::mt19937_64 g(34);
  std::uniform_real_distribution<double> v(-5.0, 5.0), pos(0.01, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double vv = v(g), tau = pos(g), beta = pos(g), s = pos(g);
    const double p = prox_gaussian(vv, tau, beta, s);
    CHECK(p >= 0.0);
    if (p > 0.0) CHECK(std::abs(p - tau * beta / (s + beta * p) - vv) <= 1e-10);
    else CHECK(vv + tau * beta / s <= 1e-12);
  }
  CHECK_THROWS_AS(prox_gaussian(0.0, 0.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("prox_mercury") {
  const auto gauss = ModulationModel::gaussian();
  std::mt19937_64 g(35);
  std::uniform_real_distribution<double> v(-5.0, 5.0), pos(0.01, 10.0);
  for (int k = 0; k < 1000; ++k) {
    const double vv = v(g), tau = pos(g), beta = pos(g), s = pos(g);
    CHECK(std::abs(prox_mercury(vv, tau, beta, s, gauss) - prox_gaussian(vv, tau, beta, s)) <=
          1e-8);
  }
  const auto& q16 = *ModelLibrary::shared().get("16qam");
  CHECK(prox_mercury(0.4, 1e-14, 1.0, 1.0, q16) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(prox_mercury(-0.4, 1e-14, 1.0, 1.0, q16) == 0.0);
  const double big = 5000.0;
  const double tau = 0.5;
  const double bound = tau * 1.0 * q16.table().mmse.back();
  CHECK(std::abs(prox_mercury(big, tau, 1.0, 1.0, q16) - big) <= bound);
}

TEST_CASE("pdhg reproduces water-filling for fixed interference") {
  for (int trial = 0; trial < 5; ++trial) {
    const auto inst = generated(16, 150 + trial, Family::None);
    const auto models = gaussian_models(16);
    const std::vector<double> n0(16, 0.0);
    SolverConfig cfg;
    cfg.method = Method::Pdhg;
    cfg.tol = 1e-11;
    cfg.max_iter = 200000;
    const auto r = pdhg(inst, cfg, models, n0);
    const auto w = waterfill_p(inst.channels, n0, inst.budgets.P);
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(r.allocation.p[i] - w.p[i]) <= 1e-6);
    REQUIRE(r.allocation.nu.has_value());
    CHECK(1.0 / *r.allocation.nu == doctest::Approx(w.level.nu).epsilon(1e-6));
  }
}

TEST_CASE("pdhg caps a constrained channel") {
  AwfInstance inst;
  inst.channels.beta = {1.0, 1.0};
  inst.channels.sigma = {1.0, 1.0};
  inst.channels.modulation = {"gaussian", "gaussian"};
  inst.budgets = {2.0, 0.0};
  inst.constraints = LinearConstraints(2, {{0, 0, 1.0}}, {0.5});
  SolverConfig cfg;
  cfg.method = Method::Pdhg;
  cfg.tol = 1e-11;
  cfg.max_iter = 200000;
  const auto r = pdhg(inst, cfg, gaussian_models(2), std::vector<double>{0.0, 0.0});
  const auto& a = r.allocation;
  CHECK(a.p[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(a.p[1] == doctest::Approx(1.5).epsilon(1e-6));
  REQUIRE(a.theta.size() == 1);
  CHECK(a.theta[0] > 0.0);
  CHECK(a.theta[0] == doctest::Approx(1.0 / 1.5 - 1.0 / 2.5).epsilon(1e-5));
  CHECK(std::abs(a.theta[0] * (a.p[0] - 0.5)) <= 1e-6);

  cfg.pdhg_steps = PdhgSteps{0.0, 1.0};
  CHECK_THROWS_AS(pdhg(inst, cfg, gaussian_models(2), std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);
}
