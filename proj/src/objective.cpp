#include "fsdp/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fsdp/errors.hpp"
#include "fsdp/kernels.hpp"
#include "fsdp/rng.hpp"

namespace fsdp {

// ---------------------------------------------------------------- base

void SampleObjective::check_index(std::size_t i) const {
  if (i >= size()) throw InvalidArgument("sample index " + std::to_string(i) + " out of range");
}

double SampleObjective::eval_full(const SymMatrix& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < size(); ++i) s += eval_sample(i, x);
  return s / static_cast<double>(size());
}

SymMatrix SampleObjective::grad_full(const SymMatrix& x) const {
  SymMatrix g(dim());
  for (std::size_t i = 0; i < size(); ++i) g += grad_sample(i, x);
  g *= 1.0 / static_cast<double>(size());
  return g;
}

void SampleObjective::accumulate_factored_gradient(std::size_t i, const Factor& u, double alpha, Factor& out) const {
  out.axpy(alpha, mul(grad_sample(i, gram(u)), u));
}

double SampleObjective::grad_sample_norm_sq(std::size_t i, const SymMatrix& x) const {
  const double n = frob_norm(grad_sample(i, x));
  return n * n;
}

Factor SampleObjective::grad_sample_times_factor(std::size_t i, const SymMatrix& x, const Factor& u) const {
  return mul(grad_sample(i, x), u);
}

Factor factored_gradient(const SampleObjective& obj, std::size_t i, const Factor& u) {
  if (u.rows() != obj.dim()) throw ShapeError("factored_gradient: U has wrong row count");
  if (i == FULL) return mul(obj.grad_full(gram(u)), u);
  if (i >= obj.size()) throw InvalidArgument("factored_gradient: sample index out of range");
  Factor out(u.rows(), u.cols());
  obj.accumulate_factored_gradient(i, u, 1.0, out);
  return out;
}

Factor g_gradient(const SampleObjective& obj, const Factor& u) {
  Factor g = factored_gradient(obj, FULL, u);
  g *= 2.0;
  return g;
}

// ---------------------------------------------------------------- sensing

SensingProblem::SensingProblem(std::vector<SymMatrix> a, std::vector<double> b)
    : p_(a.empty() ? 0 : a.front().dim()), n_(a.size()), b_(std::move(b)) {
  if (n_ == 0) throw InvalidArgument("SensingProblem: need at least one measurement");
  if (b_.size() != n_) throw ShapeError("SensingProblem: |b| != number of measurements");
  a_.reserve(n_ * p_ * p_);
  for (const SymMatrix& m : a) {
    if (m.dim() != p_) throw ShapeError("SensingProblem: measurement dims differ");
    a_.insert(a_.end(), m.entries().begin(), m.entries().end());
  }
}

SymMatrix SensingProblem::measurement_matrix(std::size_t i) const {
  check_index(i);
  return SymMatrix(p_, std::vector<double>(measurement(i), measurement(i) + p_ * p_));
}

double SensingProblem::eval_sample(std::size_t i, const SymMatrix& x) const {
  check_index(i);
  const double res = kernels::dot(measurement(i), x.data(), p_ * p_) - b_[i];
  return 0.5 * res * res;
}

SymMatrix SensingProblem::grad_sample(std::size_t i, const SymMatrix& x) const {
  check_index(i);
  const double res = kernels::dot(measurement(i), x.data(), p_ * p_) - b_[i];
  std::vector<double> g(p_ * p_, 0.0);
  kernels::axpy(res, measurement(i), g.data(), g.size());
  return SymMatrix(p_, std::move(g));
}

double SensingProblem::grad_sample_norm_sq(std::size_t i, const SymMatrix& x) const {
  check_index(i);
  const double* a = measurement(i);
  const double res = kernels::dot(a, x.data(), p_ * p_) - b_[i];
  return res * res * kernels::dot(a, a, p_ * p_);
}

double SensingProblem::eval_full(const SymMatrix& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double res = kernels::dot(measurement(i), x.data(), p_ * p_) - b_[i];
    s += 0.5 * res * res;
  }
  return s / static_cast<double>(n_);
}

SymMatrix SensingProblem::grad_full(const SymMatrix& x) const {
  std::vector<double> g(p_ * p_, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double res = kernels::dot(measurement(i), x.data(), p_ * p_) - b_[i];
    kernels::axpy(res * inv_n, measurement(i), g.data(), g.size());
  }
  return SymMatrix(p_, std::move(g));
}

void SensingProblem::accumulate_factored_gradient(std::size_t i, const Factor& u, double alpha, Factor& out) const {
  check_index(i);
  const std::size_t r = u.cols();
  // <A_i, U U^T> = <A_i U, U>, so only A_i U (p*p*r flops) is needed.
  thread_local std::vector<double> ut, au;
  ut.resize(r * p_);
  au.resize(p_ * r);
  for (std::size_t a = 0; a < p_; ++a)
    for (std::size_t k = 0; k < r; ++k) ut[k * p_ + a] = u(a, k);
  kernels::gemm_nt(measurement(i), ut.data(), au.data(), p_, p_, r);
  const double res = kernels::dot(au.data(), u.data(), p_ * r) - b_[i];
  kernels::axpy(alpha * res, au.data(), out.data(), p_ * r);
}

SensingProblem sensing_generate(std::size_t p, std::size_t r_star, std::size_t n, std::uint64_t seed,
                                double ustar_scale) {
  if (p == 0 || r_star == 0 || r_star > p) throw InvalidArgument("sensing_generate: need 1 <= r_star <= p");
  if (n == 0) throw InvalidArgument("sensing_generate: need n >= 1");
  if (!(ustar_scale > 0.0)) throw InvalidArgument("sensing_generate: ustar_scale must be positive");
  Rng rng(seed);
  Factor us(p, r_star);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < r_star; ++k) us(i, k) = ustar_scale * rng.normal();
  const SymMatrix xs = gram(us);

  std::vector<SymMatrix> a;
  std::vector<double> b;
  a.reserve(n);
  b.reserve(n);
  std::vector<double> e(p * p);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : e) v = rng.normal();
    a.emplace_back(p, e);
    b.push_back(frob_dot(a.back(), xs));
  }
  SensingProblem prob(std::move(a), std::move(b));
  prob.xstar = xs;
  prob.ustar = std::move(us);
  return prob;
}

namespace {

// Orthonormal coordinates on symmetric matrices: E_aa and (E_ab + E_ba)/sqrt 2.
std::vector<double> sym_coords(const double* m, std::size_t p) {
  std::vector<double> v;
  v.reserve(p * (p + 1) / 2);
  for (std::size_t a = 0; a < p; ++a) {
    v.push_back(m[a * p + a]);
    for (std::size_t b = a + 1; b < p; ++b) v.push_back(std::sqrt(2.0) * m[a * p + b]);
  }
  return v;
}

SymMatrix from_sym_coords(const Factor& vecs, std::size_t col, std::size_t p) {
  SymMatrix m(p);
  std::size_t t = 0;
  for (std::size_t a = 0; a < p; ++a) {
    m.set(a, a, vecs(t++, col));
    for (std::size_t b = a + 1; b < p; ++b) m.set(a, b, vecs(t++, col) / std::sqrt(2.0));
  }
  return m;
}

}  // namespace

CurvatureRange sensing_curvature(const SensingProblem& prob) {
  const std::size_t p = prob.dim();
  const std::size_t d = p * (p + 1) / 2;
  if (d > 1000) throw InvalidArgument("sensing_curvature: dimension too large for the explicit operator");
  std::vector<double> h(d * d, 0.0);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const std::vector<double> v = sym_coords(prob.measurement(i), p);
    for (std::size_t s = 0; s < d; ++s) kernels::axpy(v[s], v.data(), h.data() + s * d, d);
  }
  for (double& x : h) x /= static_cast<double>(prob.size());
  const EigDecomp e = eig_sym(SymMatrix(d, std::move(h)));
  return {e.values.front(), e.values.back(), from_sym_coords(e.vectors, 0, p), from_sym_coords(e.vectors, d - 1, p)};
}

double sensing_lipschitz(const SensingProblem& prob, int iters, std::uint64_t seed) {
  const std::size_t p = prob.dim();
  Rng rng(seed);
  std::vector<double> e(p * p);
  for (double& x : e) x = rng.normal();
  SymMatrix d(p, std::move(e));
  d *= 1.0 / frob_norm(d);
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<double> hd(p * p, 0.0);
    for (std::size_t i = 0; i < prob.size(); ++i) {
      const double c = kernels::dot(prob.measurement(i), d.data(), p * p);
      kernels::axpy(c / static_cast<double>(prob.size()), prob.measurement(i), hd.data(), hd.size());
    }
    SymMatrix next(p, std::move(hd));
    lambda = frob_dot(next, d);
    const double nrm = frob_norm(next);
    if (nrm == 0.0) return 0.0;
    next *= 1.0 / nrm;
    d = std::move(next);
  }
  return lambda;
}

// ---------------------------------------------------------------- triplets

namespace {

// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

// d/dz of softplus(-z) = -1 / (1 + e^z).
double dloss_dz(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return -e / (1.0 + e);
  }
  return -1.0 / (1.0 + std::exp(z));
}

double margin(const Triplet& c, const SymMatrix& x) { return sqdist(x, c[0], c[2]) - sqdist(x, c[0], c[1]); }

void check_triplet(const Triplet& c, std::size_t p) {
  if (c[0] >= p || c[1] >= p || c[2] >= p) throw InvalidArgument("triplet index out of range");
  if (c[0] == c[1] || c[0] == c[2] || c[1] == c[2]) throw InvalidArgument("triplet indices must be distinct");
}

// grad of z = d2_ik - d2_ij is E_kk - E_jj - (E_ik + E_ki) + (E_ij + E_ji); the E_ii terms cancel.
void add_margin_grad(SymMatrix& g, const Triplet& c, double w) {
  const auto [i, j, k] = c;
  g.add_to(k, k, w);
  g.add_to(j, j, -w);
  g.add_to(i, k, -w);
  g.add_to(i, j, w);
}

}  // namespace

double ste_loss(const Triplet& c, const SymMatrix& x) {
  check_triplet(c, x.dim());
  return softplus(-margin(c, x));
}

SymMatrix ste_grad(const Triplet& c, const SymMatrix& x, double lambda) {
  check_triplet(c, x.dim());
  SymMatrix g(x.dim());
  add_margin_grad(g, c, dloss_dz(margin(c, x)));
  if (lambda != 0.0)
    for (std::size_t a = 0; a < x.dim(); ++a) g.add_to(a, a, lambda);
  return g;
}

TripletProblem::TripletProblem(std::size_t p, std::vector<Triplet> triplets, double lambda)
    : p_(p), t_(std::move(triplets)), lambda_(lambda) {
  if (p < 3) throw InvalidArgument("TripletProblem: need at least 3 items");
  if (t_.empty()) throw InvalidArgument("TripletProblem: no triplets");
  if (!(lambda >= 0.0)) throw InvalidArgument("TripletProblem: lambda must be >= 0");
  for (const Triplet& c : t_) check_triplet(c, p_);
}

double TripletProblem::eval_sample(std::size_t i, const SymMatrix& x) const {
  check_index(i);
  return softplus(-margin(t_[i], x)) + lambda_ * x.trace();
}

SymMatrix TripletProblem::grad_sample(std::size_t i, const SymMatrix& x) const {
  check_index(i);
  return ste_grad(t_[i], x, lambda_);
}

double TripletProblem::eval_full(const SymMatrix& x) const {
  double s = 0.0;
  for (const Triplet& c : t_) s += softplus(-margin(c, x));
  return s / static_cast<double>(t_.size()) + lambda_ * x.trace();
}

SymMatrix TripletProblem::grad_full(const SymMatrix& x) const {
  SymMatrix g(p_);
  const double inv_n = 1.0 / static_cast<double>(t_.size());
  for (const Triplet& c : t_) add_margin_grad(g, c, inv_n * dloss_dz(margin(c, x)));
  for (std::size_t a = 0; a < p_; ++a) g.add_to(a, a, lambda_);
  return g;
}

void TripletProblem::accumulate_factored_gradient(std::size_t s, const Factor& u, double alpha, Factor& out) const {
  check_index(s);
  const auto [i, j, k] = t_[s];
  const std::size_t r = u.cols();
  const double* ui = u.data() + i * r;
  const double* uj = u.data() + j * r;
  const double* uk = u.data() + k * r;
  double dij = 0.0, dik = 0.0;
  for (std::size_t q = 0; q < r; ++q) {
    dij += (ui[q] - uj[q]) * (ui[q] - uj[q]);
    dik += (ui[q] - uk[q]) * (ui[q] - uk[q]);
  }
  const double w = alpha * dloss_dz(dik - dij);
  double* oi = out.data() + i * r;
  double* oj = out.data() + j * r;
  double* ok = out.data() + k * r;
  // Rows of (grad z) U: i -> U_j - U_k, j -> U_i - U_j, k -> U_k - U_i.
  for (std::size_t q = 0; q < r; ++q) {
    const double a = ui[q], b = uj[q], c = uk[q];
    oi[q] += w * (b - c);
    oj[q] += w * (a - b);
    ok[q] += w * (c - a);
  }
  if (lambda_ != 0.0) out.axpy(alpha * lambda_, u);
}

double test_error(const SymMatrix& x, const std::vector<Triplet>& test) {
  if (test.empty()) throw EmptyTestSet("test_error: empty test set");
  std::size_t bad = 0;
  for (const Triplet& c : test) {
    check_triplet(c, x.dim());
    if (!(sqdist(x, c[0], c[1]) < sqdist(x, c[0], c[2]))) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(test.size());
}

double test_error(const Factor& u, const std::vector<Triplet>& test) {
  if (test.empty()) throw EmptyTestSet("test_error: empty test set");
  const std::size_t r = u.cols();
  auto d2 = [&](std::size_t a, std::size_t b) {
    double s = 0.0;
    for (std::size_t q = 0; q < r; ++q) {
      const double t = u(a, q) - u(b, q);
      s += t * t;
    }
    return s;
  };
  std::size_t bad = 0;
  for (const Triplet& c : test) {
    check_triplet(c, u.rows());
    if (!(d2(c[0], c[1]) < d2(c[0], c[2]))) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(test.size());
}

double triplet_lipschitz(const TripletProblem& prob, int iters, std::uint64_t seed) {
  // The loss curvature along z is at most 1/4, so the Hessian is bounded by
  // (1/4n) sum grad z grad z^T; its top eigenvalue is attained at X = 0.
  const std::size_t p = prob.dim();
  const double w = 0.25 / static_cast<double>(prob.size());
  Rng rng(seed);
  std::vector<double> e(p * p);
  for (double& x : e) x = rng.normal();
  SymMatrix d(p, std::move(e));
  d *= 1.0 / frob_norm(d);
  double lambda = 0.0;
  for (int it = 0; it < iters; ++it) {
    SymMatrix next(p);
    for (const Triplet& c : prob.triplets()) {
      const std::size_t i = c[0], j = c[1], k = c[2];
      const double dz = w * (d(k, k) - d(j, j) - 2.0 * d(i, k) + 2.0 * d(i, j));
      next.add_to(k, k, dz);
      next.add_to(j, j, -dz);
      next.add_to(i, k, -dz);
      next.add_to(i, j, dz);
    }
    lambda = frob_dot(next, d);
    const double nrm = frob_norm(next);
    if (nrm == 0.0) return 0.0;
    next *= 1.0 / nrm;
    d = std::move(next);
  }
  return lambda;
}

// ---------------------------------------------------------------- probes

Smoothness estimate_smoothness(const SampleObjective& obj, const std::vector<std::pair<SymMatrix, SymMatrix>>& pairs) {
  if (pairs.size() < 2) throw InvalidArgument("estimate_smoothness: need at least 2 probe pairs");
  Smoothness s{0.0, std::numeric_limits<double>::infinity(), 0};
  for (const auto& [x, y] : pairs) {
    const SymMatrix d = x - y;
    const double nd = frob_norm(d);
    if (nd < 1e-14) continue;
    const SymMatrix gd = obj.grad_full(x) - obj.grad_full(y);
    s.L_hat = std::max(s.L_hat, frob_norm(gd) / nd);
    s.mu_hat = std::min(s.mu_hat, frob_dot(gd, d) / (nd * nd));
    ++s.used;
  }
  if (s.used == 0) throw NoProbes("estimate_smoothness: every probe pair was coincident");
  return s;
}

}  // namespace fsdp
