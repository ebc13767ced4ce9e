#include <cmath>

#include "doctest.h"
#include "fsdp/errors.hpp"
#include "fsdp/objective.hpp"
#include "helpers.hpp"

using namespace fsdp;
using namespace fsdp::testing;
using doctest::Approx;

namespace {

SymMatrix random_psd(std::size_t p, std::size_t r, Rng& rng) { return gram(random_factor(p, r, rng)); }

std::vector<Triplet> random_triplets(std::size_t p, std::size_t n, Rng& rng) {
  std::vector<Triplet> t;
  while (t.size() < n) {
    const auto i = static_cast<std::uint32_t>(rng.index(p));
    const auto j = static_cast<std::uint32_t>(rng.index(p));
    const auto k = static_cast<std::uint32_t>(rng.index(p));
    if (i != j && i != k && j != k) t.push_back({i, j, k});
  }
  return t;
}

}  // namespace

TEST_CASE("sensing_generate is deterministic and noiseless") {
  const SensingProblem a = sensing_generate(2, 1, 3, 7);
  const SensingProblem b = sensing_generate(2, 1, 3, 7);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(a.measurement_matrix(i) == b.measurement_matrix(i));
    CHECK(a.target(i) == b.target(i));
  }
  CHECK(*a.xstar == *b.xstar);
  CHECK(a.eval_full(*a.xstar) <= 1e-18 * 3);

  const SensingProblem c = sensing_generate(20, 3, 200, 1);
  CHECK(frob_norm(c.grad_full(*c.xstar)) <= 1e-9);
  CHECK(c.eval_full(*c.xstar) <= 1e-18 * 200);
}

TEST_CASE("sensing per-sample gradient examples") {
  const SensingProblem prob({SymMatrix::identity(2)}, {0.0});
  CHECK(prob.grad_sample(0, SymMatrix::identity(2)) == 2.0 * SymMatrix::identity(2));
  CHECK_THROWS_AS(prob.grad_sample(1, SymMatrix::identity(2)), InvalidArgument);

  const SensingProblem gen = sensing_generate(6, 2, 30, 3);
  for (std::size_t i = 0; i < gen.size(); ++i) CHECK(frob_norm(gen.grad_sample(i, *gen.xstar)) <= 1e-12);
}

TEST_CASE("sensing gradient matches finite differences") {
  const SensingProblem prob = sensing_generate(5, 2, 20, 4);
  Rng rng(40);
  for (int t = 0; t < 5; ++t) {
    const SymMatrix x = random_sym(5, rng);
    const std::size_t i = rng.index(prob.size());
    const SymMatrix fd = fd_gradient([&](const SymMatrix& y) { return prob.eval_sample(i, y); }, x);
    CHECK(rel_err(fd, prob.grad_sample(i, x)) <= 1e-6);
  }
}

TEST_CASE("sensing oracles are consistent averages") {
  const SensingProblem prob = sensing_generate(5, 2, 40, 5);
  Rng rng(41);
  const SymMatrix x = random_sym(5, rng);
  double f = 0.0;
  SymMatrix g(5);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    f += prob.eval_sample(i, x);
    g += prob.grad_sample(i, x);
  }
  f /= 40;
  g *= 1.0 / 40;
  CHECK(std::fabs(prob.eval_full(x) - f) <= 1e-10 * (1 + std::fabs(f)));
  CHECK(frob_norm(prob.grad_full(x) - g) <= 1e-10);
}

TEST_CASE("sensing materialized and product-form factored gradients agree") {
  const SensingProblem prob = sensing_generate(9, 3, 25, 6);
  Rng rng(42);
  for (int t = 0; t < 10; ++t) {
    const Factor u = random_factor(9, 3, rng);
    const std::size_t i = rng.index(prob.size());
    const Factor materialized = mul(prob.grad_sample(i, gram(u)), u);
    CHECK(max_abs_diff(factored_gradient(prob, i, u), materialized) <= 1e-12 * (1 + max_abs(materialized)));
    CHECK(max_abs_diff(prob.grad_sample_times_factor(i, gram(u), u), materialized) == 0.0);
  }
}

TEST_CASE("factored gradient of g(U) = f(UU^T) is 2 grad f(X) U") {
  const SensingProblem prob = sensing_generate(6, 2, 30, 7);
  Rng rng(43);
  const Factor u = random_factor(6, 2, rng);
  const Factor fd = fd_gradient([&](const Factor& v) { return prob.eval_full(gram(v)); }, u);
  CHECK(rel_err(fd, g_gradient(prob, u)) <= 1e-6);

  const LinearObjective zero = zero_objective(4);
  CHECK(frob_norm(factored_gradient(zero, FULL, random_factor(4, 2, rng))) == 0.0);
}

TEST_CASE("sensing convexity probe") {
  const SensingProblem prob = sensing_generate(6, 2, 30, 8);
  Rng rng(44);
  for (int t = 0; t < 50; ++t) {
    const SymMatrix x = random_psd(6, 3, rng), y = random_psd(6, 3, rng);
    CHECK(frob_dot(prob.grad_full(x) - prob.grad_full(y), x - y) >= 0.0);
  }
}

TEST_CASE("ste_loss examples") {
  CHECK(ste_loss({0, 1, 2}, SymMatrix::identity(4)) == Approx(std::log(2.0)).epsilon(1e-15));
  // d2_ij = 0, d2_ik = 20: margin 20.
  SymMatrix x(3);
  x.set(2, 2, 20.0);
  CHECK(ste_loss({0, 1, 2}, x) == Approx(2.0611536181902037e-09).epsilon(1e-12));
  // Large margins of either sign stay finite.
  x.set(2, 2, 1e4);
  CHECK(ste_loss({0, 1, 2}, x) == 0.0);
  CHECK(ste_loss({0, 2, 1}, x) == Approx(1e4));
}

TEST_CASE("ste loss is nonnegative and log 2 exactly at ties") {
  Rng rng(45);
  for (int t = 0; t < 200; ++t) {
    const SymMatrix x = random_psd(5, 2, rng);
    const double l = ste_loss({0, 1, 2}, x);
    CHECK(l >= 0.0);
    if (sqdist(x, 0, 1) == sqdist(x, 0, 2)) CHECK(l == std::log(2.0));
  }
}

TEST_CASE("ste_grad sparsity and regularizer") {
  const SymMatrix g = ste_grad({1, 3, 4}, SymMatrix::identity(6), 0.0);
  // weight -1/2 at the tie.
  CHECK(g(4, 4) == -0.5);
  CHECK(g(3, 3) == 0.5);
  CHECK(g(1, 4) == 0.5);
  CHECK(g(1, 3) == -0.5);
  CHECK(g(1, 1) == 0.0);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b) {
      const bool in = (a == 1 || a == 3 || a == 4) && (b == 1 || b == 3 || b == 4);
      if (!in) CHECK(g(a, b) == 0.0);
    }
  // The regularizer contributes exactly lambda * I.
  const SymMatrix g0 = ste_grad({0, 1, 2}, SymMatrix::identity(3), 0.0);
  const SymMatrix g1 = ste_grad({0, 1, 2}, SymMatrix::identity(3), 0.1);
  CHECK(max_abs_diff(g1 - g0, 0.1 * SymMatrix::identity(3)) <= 1e-16);
}

TEST_CASE("ste gradient matches finite differences") {
  Rng rng(46);
  for (int t = 0; t < 10; ++t) {
    const SymMatrix x = random_sym(5, rng);
    const Triplet c{static_cast<std::uint32_t>(t % 5), static_cast<std::uint32_t>((t + 1) % 5),
                    static_cast<std::uint32_t>((t + 3) % 5)};
    const SymMatrix fd = fd_gradient([&](const SymMatrix& y) { return ste_loss(c, y) + 0.3 * y.trace(); }, x);
    CHECK(frob_norm(fd - ste_grad(c, x, 0.3)) <= 1e-6);
  }
}

TEST_CASE("triplet problem oracles") {
  Rng rng(47);
  const TripletProblem prob(7, random_triplets(7, 50, rng), 0.05);
  const SymMatrix x = random_psd(7, 2, rng);
  double f = 0.0;
  SymMatrix g(7);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    f += prob.eval_sample(i, x);
    g += prob.grad_sample(i, x);
  }
  CHECK(std::fabs(prob.eval_full(x) - f / 50) <= 1e-10 * (1 + std::fabs(f)));
  CHECK(frob_norm(prob.grad_full(x) - (1.0 / 50) * g) <= 1e-10);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const SymMatrix gi = prob.grad_sample(i, x);
    CHECK(gi == SymMatrix(7, gi.entries()));  // exactly symmetric
  }
  // Product-form factored gradient vs materialized.
  const Factor u = random_factor(7, 2, rng);
  for (std::size_t i = 0; i < 10; ++i) {
    const Factor m = mul(prob.grad_sample(i, gram(u)), u);
    CHECK(max_abs_diff(factored_gradient(prob, i, u), m) <= 1e-13);
  }
  CHECK_THROWS_AS(TripletProblem(4, {{0, 0, 1}}, 0.0), InvalidArgument);
  CHECK_THROWS_AS(TripletProblem(4, {{0, 1, 4}}, 0.0), InvalidArgument);
}

TEST_CASE("trace term is linear in lambda") {
  // All points far apart in the right order: losses ~ 0.
  std::vector<Triplet> t{{0, 1, 2}};
  SymMatrix x(3);
  x.set(2, 2, 1e4);
  const double f1 = TripletProblem(3, t, 0.1).eval_full(x);
  const double f2 = TripletProblem(3, t, 0.2).eval_full(x);
  CHECK((f2 - f1) / 0.1 == Approx(x.trace()).epsilon(1e-12));
}

TEST_CASE("test_error") {
  Rng rng(48);
  const auto t = random_triplets(6, 20, rng);
  CHECK(test_error(SymMatrix::identity(6), t) == 1.0);
  CHECK_THROWS_AS(test_error(SymMatrix::identity(6), {}), EmptyTestSet);

  // Ground-truth points on a line and triplets consistent with them.
  Factor pts(10, 1);
  for (std::size_t i = 0; i < 10; ++i) pts(i, 0) = static_cast<double>(i * i);
  std::vector<Triplet> good;
  for (const Triplet& c : random_triplets(10, 200, rng)) {
    const double dij = std::fabs(pts(c[0], 0) - pts(c[1], 0));
    const double dik = std::fabs(pts(c[0], 0) - pts(c[2], 0));
    if (dij < dik) good.push_back(c);
  }
  CHECK(test_error(gram(pts), good) == 0.0);
  CHECK(test_error(pts, good) == 0.0);

  const Factor u = random_factor(50, 2, rng);
  const double e = test_error(u, random_triplets(50, 10000, rng));
  CHECK(e == Approx(0.5).epsilon(0.1));
}

TEST_CASE("estimate_smoothness") {
  // n = p^2 measurements: the symmetrized standard basis. f is quadratic.
  const std::size_t p = 3;
  std::vector<SymMatrix> a;
  std::vector<double> b;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      SymMatrix m(p);
      m.set(i, j, i == j ? 1.0 : 0.5);
      a.push_back(m);
      b.push_back(1.0);
    }
  const SensingProblem prob(a, b);
  const CurvatureRange cr = sensing_curvature(prob);
  Rng rng(49);
  std::vector<std::pair<SymMatrix, SymMatrix>> pairs;
  for (int t = 0; t < 20; ++t) pairs.emplace_back(random_sym(p, rng), random_sym(p, rng));
  const Smoothness s = estimate_smoothness(prob, pairs);
  CHECK(s.L_hat <= cr.lmax * (1 + 1e-12));
  CHECK(s.mu_hat >= cr.lmin * (1 - 1e-12));
  // Probing along the extreme Hessian directions recovers them exactly.
  const Smoothness ex = estimate_smoothness(prob, {{cr.top_direction, SymMatrix(p)}, {cr.bottom_direction, SymMatrix(p)}});
  CHECK(ex.L_hat == Approx(cr.lmax).epsilon(1e-12));
  CHECK(ex.mu_hat == Approx(cr.lmin).epsilon(1e-12));
  // Hessian action is linear, so the quotient only depends on the direction.
  const SymMatrix d = random_sym(p, rng);
  const SymMatrix x0 = random_sym(p, rng);
  const Smoothness q1 = estimate_smoothness(prob, {{x0 + d, x0}, {x0 + d, x0}});
  const Smoothness q2 = estimate_smoothness(prob, {{3.0 * d, SymMatrix(p)}, {3.0 * d, SymMatrix(p)}});
  CHECK(q1.L_hat == Approx(q2.L_hat).epsilon(1e-12));
  CHECK(q1.mu_hat == Approx(q2.mu_hat).epsilon(1e-12));

  const LinearObjective lin({random_sym(p, rng)});
  CHECK(estimate_smoothness(lin, pairs).L_hat == 0.0);

  // Scaling f by c scales both estimates.
  std::vector<SymMatrix> a2;
  std::vector<double> b2;
  for (std::size_t i = 0; i < a.size(); ++i) {
    a2.push_back(std::sqrt(2.0) * a[i]);
    b2.push_back(std::sqrt(2.0) * b[i]);
  }
  const Smoothness s2 = estimate_smoothness(SensingProblem(a2, b2), pairs);
  CHECK(s2.L_hat == Approx(2 * s.L_hat).epsilon(1e-12));
  CHECK(s2.mu_hat == Approx(2 * s.mu_hat).epsilon(1e-12));

  const SymMatrix z(p);
  CHECK_THROWS_AS(estimate_smoothness(prob, {{z, z}, {z, z}}), NoProbes);
  CHECK_THROWS_AS(estimate_smoothness(prob, {{z, z}}), InvalidArgument);
}

TEST_CASE("sensing curvature and power iteration agree") {
  const SensingProblem prob = sensing_generate(4, 2, 60, 9);
  const CurvatureRange cr = sensing_curvature(prob);
  CHECK(cr.lmin > 0.0);
  CHECK(sensing_lipschitz(prob, 2000) == Approx(cr.lmax).epsilon(1e-8));
}

TEST_CASE("unbiasedness of sample factored gradients") {
  Rng rng(50);
  const SensingProblem sens = sensing_generate(6, 2, 30, 10);
  const TripletProblem trip(8, random_triplets(8, 60, rng), 0.02);
  for (const SampleObjective* obj : {static_cast<const SampleObjective*>(&sens), static_cast<const SampleObjective*>(&trip)}) {
    const Factor u = random_factor(obj->dim(), 2, rng);
    Factor avg(obj->dim(), 2);
    for (std::size_t i = 0; i < obj->size(); ++i) obj->accumulate_factored_gradient(i, u, 1.0 / static_cast<double>(obj->size()), avg);
    CHECK(frob_norm(avg - factored_gradient(*obj, FULL, u)) <= 1e-10);
  }
}

TEST_CASE("triplet curvature bound is the Hessian top eigenvalue at zero") {
  Rng rng(31);
  const TripletProblem prob(12, random_triplets(12, 300, rng), 0.05);
  const double L = triplet_lipschitz(prob);
  const auto hess = [&](const SymMatrix& d) {
    const double h = 1e-5;
    SymMatrix hv = prob.grad_full(h * d) - prob.grad_full(-h * d);
    hv *= 0.5 / h;
    return hv;
  };
  // Power iteration on finite-difference Hessian products.
  SymMatrix d = random_sym(12, rng);
  double rayleigh = 0.0;
  for (int it = 0; it < 300; ++it) {
    d *= 1.0 / frob_norm(d);
    const SymMatrix hd = hess(d);
    rayleigh = frob_dot(hd, d);
    d = hd;
  }
  CHECK(L == Approx(rayleigh).epsilon(1e-5));
  for (int t = 0; t < 20; ++t) {
    SymMatrix e = random_sym(12, rng);
    e *= 1.0 / frob_norm(e);
    CHECK(frob_dot(hess(e), e) <= L * (1 + 1e-6));
  }
}
