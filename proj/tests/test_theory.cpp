#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fsdp/init.hpp"
#include "fsdp/solvers.hpp"
#include "fsdp/theory.hpp"
#include "helpers.hpp"

using namespace fsdp;
using namespace fsdp::testing;
using doctest::Approx;

namespace {

const double kS2m1 = std::sqrt(2.0) - 1.0;

RegionStats stats(double calB, double B0, double B1) { return RegionStats{calB, B0, B1, 1}; }

// Rank-2 optimum with sigma = (4, 1).
SymMatrix rank2_xstar() { return SymMatrix::diag({4.0, 1.0, 0.0, 0.0}); }

}  // namespace

TEST_CASE("gamma0 at kappa = 1") {
  const ConvergenceConstants c = compute_constants(1.0, 1.0, rank2_xstar(), 2, stats(5, 1, 1));
  CHECK(c.gamma0 == Approx(2.0 * kS2m1 / 3.0).epsilon(1e-15));
  CHECK(c.gamma0 == Approx(0.27614).epsilon(1e-5));
}

TEST_CASE("exact rank: gamma bounds in closed form") {
  for (const double kappa : {1.0, 2.5}) {
    const ConvergenceConstants c = compute_constants(kappa, 1.0, rank2_xstar(), 2, stats(5, 1, 1));
    REQUIRE(c.complete());
    const double s = c.sigma_r_Xr;
    CHECK(s == Approx(1.0));
    CHECK(std::fabs(*c.gamma_l_tilde) <= 1e-15);
    CHECK(*c.gamma_u == Approx((2.0 + std::sqrt(3.0)) * kS2m1 * c.xi * s / (3.0 * kappa)).epsilon(1e-13));
    CHECK(*c.gamma_l == Approx((2.0 - std::sqrt(3.0)) * kS2m1 * c.xi * s / (3.0 * kappa)).epsilon(1e-12));
    CHECK(*c.gamma_l > 0.0);
    CHECK(c.approx_err == 0.0);
    CHECK(c.assumption2.holds_approx_error);
  }
}

TEST_CASE("constant invariants over random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 6, r = 1 + rng.index(3);
    std::vector<double> d(p);
    for (std::size_t i = 0; i < p; ++i) d[i] = 0.5 + 3.0 * rng.uniform01();
    // Small tail so the approximation assumption holds.
    for (std::size_t i = r; i < p; ++i) d[i] = 1e-6 * rng.uniform01();
    const SymMatrix xs = SymMatrix::diag(d);
    const double mu = 0.2 + rng.uniform01(), L = mu * (1.0 + 4.0 * rng.uniform01());
    const ConvergenceConstants c =
        compute_constants(L, mu, xs, r, stats(10 * rng.uniform01() + 1, rng.uniform01(), rng.uniform01()),
                          rng.uniform01() * 0.1);
    CAPTURE(trial);
    REQUIRE(c.complete());
    CHECK(c.gamma0 > 0.0);
    CHECK(c.gamma0 <= 2.0 * kS2m1 / 3.0 + 1e-15);
    CHECK(c.xi > 0.0);
    CHECK(c.xi <= 0.5);
    CHECK(*c.gamma_l_tilde < *c.gamma_l);
    CHECK(*c.gamma_l < *c.gamma_u);
    CHECK(*c.gamma_u < *c.gamma_u_tilde);
    CHECK(*c.gamma_u_tilde <= c.gamma0 * c.sigma_r_Xr);
    CHECK(*c.gamma_l + *c.gamma_u ==
          Approx(4.0 * kS2m1 * c.xi * c.sigma_r_Xr / (3.0 * c.kappa)).epsilon(1e-12));
    CHECK(c.theta == Approx(c.theta_alt).epsilon(1e-8));
    CHECK(c.zeta1 == Approx(c.zeta1_alt).epsilon(1e-12));
    CHECK(c.eta_max > 0.0);
    CHECK(c.eta_max <= 1.0 / (2.0 * c.theta));
    CHECK(c.eta_bar_max <= c.eta_max);
    for (const double frac : {1e-3, 0.3, 0.999}) {
      const double eta = frac * c.eta_max;
      CHECK(c.rho(eta) > 0.0);
      CHECK(c.rho(eta) < 1.0);
      CHECK(c.rho_tilde(eta, 50) > 0.0);
      CHECK(c.rho_tilde(eta, 50) < 1.0);
      // Both forms of rho.
      CHECK(c.rho(eta) == Approx(1.0 - eta * kS2m1 * kS2m1 * c.xi * c.mu * c.sigma_r_Xr * c.sigma_r_Xr /
                                            (18.0 * c.kappa * c.delta)).epsilon(1e-12));
    }
  }
}

TEST_CASE("rho_tilde increases with eta * theta at fixed rho^m") {
  const ConvergenceConstants c = compute_constants(2.0, 1.0, rank2_xstar(), 2, stats(5, 1, 1));
  for (int i = 1; i <= 10; ++i) {
    const double eta = 0.09 * i * c.eta_max;
    const double rm = std::pow(c.rho(eta), 3.0);
    CHECK(c.rho_tilde(eta, 3) == Approx(rm + (1.0 - rm) * eta * c.theta).epsilon(1e-14));
    // d rho_tilde / d(eta theta) = 1 - rho^m > 0
    CHECK(1.0 - rm > 0.0);
  }
}

TEST_CASE("approximation assumption") {
  SUBCASE("exact rank holds with zero lhs") {
    const AssumptionReport a = check_assumption2(rank2_xstar(), 2, 3.0, 0.2);
    CHECK(a.lhs == 0.0);
    CHECK(a.holds_approx_error);
    CHECK(a.margin > 0.0);
  }
  SUBCASE("identity with r = p - 1 fails") {
    const AssumptionReport a = check_assumption2(SymMatrix::identity(5), 4, 1.0, 0.5);
    CHECK(a.lhs == Approx(1.0).epsilon(1e-12));
    CHECK(a.rhs < 1.0);
    CHECK_FALSE(a.holds_approx_error);
    const ConvergenceConstants c = compute_constants(1.0, 1.0, SymMatrix::identity(5), 4, stats(5, 1, 1));
    CHECK_FALSE(c.assumption2.holds_approx_error);
    CHECK_FALSE(c.complete());
    CHECK(std::isnan(c.theta));
    CHECK_THROWS_AS(require_complete(c), AssumptionViolated);
    CHECK_THROWS_AS(theorem1_rate(c, {1e-3}, 10, 3, 0.1), HypothesisError);
  }
  SUBCASE("power-law spectrum") {
    const std::size_t p = 12, r = 3;
    std::vector<double> d(p);
    for (std::size_t i = 0; i < p; ++i) d[i] = std::pow(static_cast<double>(i + 1), -3.0);
    Rng rng(2);
    const Factor q = random_orthogonal(p, rng);
    // Q diag(d) Q^T
    Factor qd = q;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) qd(i, j) *= d[j];
    const SymMatrix xs(p, matmul(qd, q.transpose()).entries());
    double tail = 0.0;
    for (std::size_t i = r; i < p; ++i) tail += d[i] * d[i];
    const double kappa = 1.7, xi = 0.31;
    const AssumptionReport a = check_assumption2(xs, r, kappa, xi);
    CHECK(a.lhs == Approx(std::sqrt(tail)).epsilon(1e-9));
    CHECK(a.rhs == Approx(kS2m1 / std::sqrt(3.0) * std::sqrt(xi) / kappa / 27.0).epsilon(1e-9));
    CHECK(a.holds_approx_error == (std::sqrt(tail) < a.rhs));
  }
}

TEST_CASE("sbb inner count bound") {
  CHECK(sbb_inner_count_bound(1.0, 0.0, 0.01) == 101);
  CHECK(sbb_inner_count_bound(0.5, 0.5, 0.02) == 51);
  CHECK(sbb_inner_count_bound(1.0, 0.0, 0.3) == 5);
  CHECK_THROWS_AS(sbb_inner_count_bound(0.0, 0.0, 0.1), InvalidArgument);
}

TEST_CASE("sbb steps stay below eta_max with the bounding inner count") {
  const SensingProblem prob = sensing_generate(4, 1, 40, 3, 1.0);
  const CurvatureRange cr = sensing_curvature(prob);
  const ConvergenceConstants c = constants_for(prob, cr.lmax, cr.lmin, *prob.xstar, 1, 100, 4);
  REQUIRE(c.complete());
  const double eps = 0.02 * cr.lmax;
  const std::size_t m = sbb_inner_count_bound(cr.lmin, eps, c.eta_max);
  REQUIRE(m < 1000000);
  SolverConfig cfg;
  cfg.schedule = StepSchedule::sbb(eps, m, 0.5 * c.eta_max);
  cfg.m = m;
  cfg.epochs = 4;
  cfg.seed = 1;
  const Factor u0 = init_perturbed_optimum(*prob.ustar, 0.5 * std::sqrt(*c.gamma_u), 2);
  const RunRecord rec = run_svrg(prob, cfg, u0);
  for (const RunRow& row : rec.rows)
    if (row.epoch >= 1) CHECK(row.eta < c.eta_max);
}

TEST_CASE("theorem bound") {
  const ConvergenceConstants c = compute_constants(2.0, 1.0, rank2_xstar(), 2, stats(5, 1, 1));
  const double init = 0.5 * (*c.gamma_l + *c.gamma_u);
  const double eta = 0.5 * c.eta_max;
  SUBCASE("k = 0 is the initial error") {
    const std::vector<double> b = theorem1_rate(c, {eta}, 10, 0, init);
    REQUIRE(b.size() == 1);
    CHECK(b[0] == init);
  }
  SUBCASE("recursion matches the closed form and decreases") {
    const std::vector<double> b = theorem1_rate(c, {eta}, 10, 50, init);
    for (std::size_t k = 0; k <= 50; ++k) {
      CHECK(b[k] == Approx(theorem1_closed_form(c, eta, 10, k, init)).epsilon(1e-12));
      if (k) CHECK(b[k] <= b[k - 1]);
      CHECK(b[k] >= *c.gamma_l_tilde / (1.0 - c.theta * eta) - 1e-15);
    }
  }
  SUBCASE("per-iteration steps") {
    const std::vector<double> steps{0.2 * c.eta_max, 0.9 * c.eta_max, 0.5 * c.eta_max};
    const std::vector<double> b = theorem1_rate(c, steps, 7, 3, init);
    double x = init;
    for (double e : steps) x = c.rho_tilde(e, 7) * x + (1.0 - std::pow(c.rho(e), 7.0)) * *c.gamma_l_tilde;
    CHECK(b[3] == Approx(x).epsilon(1e-14));
  }
  SUBCASE("hypotheses") {
    CHECK_THROWS_AS(theorem1_rate(c, {c.eta_max}, 10, 3, init), HypothesisError);
    CHECK_THROWS_AS(theorem1_rate(c, {0.0}, 10, 3, init), HypothesisError);
    CHECK_THROWS_AS(theorem1_rate(c, {eta}, 10, 3, *c.gamma_u), HypothesisError);
    CHECK_THROWS_AS(theorem1_rate(c, {eta}, 10, 3, 0.5 * *c.gamma_l), HypothesisError);
    CHECK_THROWS_AS(theorem1_rate(c, {eta, eta}, 10, 3, init), HypothesisError);
  }
}

TEST_CASE("region statistics") {
  const SensingProblem prob = sensing_generate(5, 2, 30, 8, 0.7);
  const Factor& us = *prob.ustar;
  SUBCASE("zero radius is the center") {
    const RegionStats st = estimate_region_stats(prob, us, 0.0, 5, 1);
    CHECK(st.samples == 6);
    CHECK(st.calB == Approx(frob_norm(*prob.xstar)));
    CHECK(std::fabs(st.B1) <= 1e-20);
    CHECK(std::fabs(st.B0) <= 1e-20);
  }
  SUBCASE("positive radius") {
    const RegionStats a = estimate_region_stats(prob, us, 0.1, 50, 1);
    const RegionStats b = estimate_region_stats(prob, us, 0.1, 50, 1);
    CHECK(a.calB == b.calB);
    CHECK(a.B0 == b.B0);
    CHECK(a.calB >= frob_norm(*prob.xstar));
    CHECK(a.B1 > 0.0);
    CHECK(a.B0 > 0.0);
  }
  SUBCASE("sensing sample-gradient norm matches the materialized gradient") {
    Rng rng(1);
    const SymMatrix x = gram(random_factor(5, 2, rng));
    for (std::size_t i = 0; i < 5; ++i) {
      const double n = frob_norm(prob.grad_sample(i, x));
      CHECK(prob.grad_sample_norm_sq(i, x) == Approx(n * n).epsilon(1e-12));
    }
  }
}

TEST_CASE("constants report") {
  const ConvergenceConstants c = compute_constants(2.0, 1.0, rank2_xstar(), 2, stats(5, 1, 1));
  std::ostringstream os;
  write_constants_csv(os, c);
  const std::string s = os.str();
  CHECK(s.rfind("name,value\n", 0) == 0);
  CHECK(s.find("\neta_max,") != std::string::npos);
  CHECK(s.find("\ntheta_alt,") != std::string::npos);
  CHECK(s.find("\nassumption2_holds,1\n") != std::string::npos);
}

// ---------------------------------------------------------------- lemmas

TEST_CASE("distance bounds") {
  Rng rng(5);
  SUBCASE("equal factors") {
    const Factor u = random_factor(6, 2, rng);
    const DistBoundsReport r = lemma_dist_bounds(u, u);
    CHECK(r.upper_ok);
    CHECK(r.lower_ok);
    CHECK(r.applicable);
    CHECK(r.lhs == 0.0);
  }
  SUBCASE("rotations are distance zero") {
    const Factor ur = random_factor(6, 3, rng);
    const Factor u = matmul(ur, random_orthogonal(3, rng));
    const DistBoundsReport r = lemma_dist_bounds(u, ur);
    CHECK(r.dist <= 1e-10);
    CHECK(r.lower_ok);
  }
  SUBCASE("random pairs") {
    std::size_t applicable = 0;
    for (int t = 0; t < 500; ++t) {
      const std::size_t p = 3 + rng.index(5), r = 1 + rng.index(p);
      const Factor ur = random_factor(p, r, rng);
      const Factor u = ur + random_factor(p, r, rng, 0.3 * rng.uniform01());
      const DistBoundsReport rep = lemma_dist_bounds(u, ur);
      CHECK(rep.upper_ok);
      CHECK(rep.lower_ok);
      applicable += rep.applicable;
    }
    CHECK(applicable > 50);
  }
}

TEST_CASE("spectral bounds") {
  Rng rng(6);
  SUBCASE("equal factors") {
    const Factor u = random_factor(5, 2, rng);
    const SpectralBoundsReport r = lemma_spectral_bounds(u, u, 1e-9);
    CHECK(r.x_dist_ok);
    CHECK(r.sigma_ok);
    CHECK(r.weyl_ok);
  }
  SUBCASE("precondition") {
    const Factor ur = Factor::from_rows({{1, 0}, {0, 1}, {0, 0}});
    const Factor u = Factor::from_rows({{1, 0}, {0, 1}, {0, 0.5}});
    CHECK_THROWS_AS(lemma_spectral_bounds(u, ur, 0.4), NotApplicable);
    CHECK_THROWS_AS(lemma_spectral_bounds(u, ur, 1.0), NotApplicable);
    CHECK_NOTHROW(lemma_spectral_bounds(u, ur, 0.5));
  }
  SUBCASE("random pairs under the precondition") {
    for (int t = 0; t < 500; ++t) {
      const std::size_t p = 3 + rng.index(5), r = 1 + rng.index(p);
      const Factor ur = random_factor(p, r, rng);
      const double sr = singular_values(ur)[r - 1];
      const double gamma = 0.05 + 0.9 * rng.uniform01();
      Factor e = random_factor(p, r, rng);
      e *= gamma * sr * rng.uniform01() / frob_norm(e);
      const SpectralBoundsReport rep = lemma_spectral_bounds(ur + e, ur, gamma);
      CHECK(rep.x_dist_ok);
      CHECK(rep.sigma_ok);
      CHECK(rep.weyl_ok);
    }
  }
}

TEST_CASE("feasibility") {
  SUBCASE("zero gradient leaves X unchanged") {
    const LinearObjective zero = zero_objective(4);
    Rng rng(1);
    const Factor ur = random_factor(4, 2, rng);
    const FeasibilityReport r = lemma_feasibility(ur, ur, zero, 0.5, 1.0, 0.2);
    CHECK(r.grad_norm == 0.0);
    CHECK(r.grad_bound_ok);
    CHECK(r.xbar_psd_ok);
    CHECK(r.range_ok);
  }
  SUBCASE("same column space") {
    const SensingProblem prob = sensing_generate(5, 2, 40, 3, 0.7);
    Rng rng(2);
    const Factor u = matmul(*prob.ustar, random_orthogonal(2, rng));
    const FeasibilityReport r = lemma_feasibility(*prob.ustar, *prob.ustar, prob, 0.5, 10.0, 0.2);
    CHECK(r.range_ok);
    CHECK(r.range_residual <= 1e-12);
    CHECK(lemma_feasibility(u, u, prob, 0.5, 10.0, 0.2).range_ok);
  }
  SUBCASE("a nearby factor off the optimum's column space leaves a residual") {
    // X*_r = e1 e1^T, U = (1, 0.1): P_U does not fix e1.
    const Factor ur = Factor::from_rows({{1.0}, {0.0}});
    const Factor u = Factor::from_rows({{1.0}, {0.1}});
    const LinearObjective zero = zero_objective(2);
    const FeasibilityReport r = lemma_feasibility(u, ur, zero, 0.5, 1.0, 0.2);
    CHECK_FALSE(r.range_ok);
    CHECK(r.range_residual == Approx(0.1 / 1.01 * std::sqrt(1.0 + 0.01)).epsilon(1e-12));
  }
  SUBCASE("precondition") {
    const Factor ur = Factor::from_rows({{1.0}, {0.0}});
    const Factor u = Factor::from_rows({{1.0}, {0.5}});
    CHECK_THROWS_AS(lemma_feasibility(u, ur, zero_objective(2), 0.5, 1.0, 0.2), NotApplicable);
  }
  SUBCASE("gradient bound and feasible step on sensing instances") {
    Rng rng(9);
    for (int t = 0; t < 30; ++t) {
      const SensingProblem prob = sensing_generate(5, 2, 60, 100 + t, 0.7);
      const CurvatureRange cr = sensing_curvature(prob);
      const ConvergenceConstants c =
          compute_constants(cr.lmax, cr.lmin, *prob.xstar, 2, stats(1, 1, 1), 0.0);
      const Factor& us = *prob.ustar;
      const double sr = singular_values(us)[1];
      Factor e = random_factor(5, 2, rng);
      e *= std::sqrt(c.gamma0) * sr * 0.99 * rng.uniform01() / frob_norm(e);
      const FeasibilityReport r = lemma_feasibility(us + e, us, prob, c.eta_bar, c.L, c.gamma0);
      CHECK(r.grad_bound_ok);
      CHECK(r.xbar_psd_ok);
    }
  }
}

TEST_CASE("trace inequality") {
  Rng rng(4);
  for (int t = 0; t < 300; ++t) {
    const std::size_t p = 2 + rng.index(6);
    const Factor fa = random_factor(p, p, rng);
    SymMatrix a = gram(fa);
    a += 1e-3 * SymMatrix::identity(p);
    const SymMatrix b = gram(random_factor(p, 1 + rng.index(p), rng));
    CHECK(lemma_trace(a, b));
  }
  CHECK_THROWS_AS(lemma_trace(SymMatrix::diag({1.0, 0.0}), SymMatrix::identity(2)), NotApplicable);
  CHECK_THROWS_AS(lemma_trace(SymMatrix::identity(2), SymMatrix::diag({1.0, -1.0})), NotApplicable);
}
