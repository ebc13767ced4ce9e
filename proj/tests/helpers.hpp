#pragma once
#include <cmath>

#include "fsdp/linalg.hpp"
#include "fsdp/rng.hpp"

namespace fsdp::testing {

inline Factor random_factor(std::size_t p, std::size_t r, Rng& rng, double scale = 1.0) {
  Factor f(p, r);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < r; ++j) f(i, j) = scale * rng.normal();
  return f;
}

inline SymMatrix random_sym(std::size_t p, Rng& rng) {
  std::vector<double> e(p * p);
  for (double& x : e) x = rng.normal();
  return SymMatrix(p, std::move(e));
}

inline Factor random_orthogonal(std::size_t r, Rng& rng) {
  return svd_thin(random_factor(r, r, rng)).u;
}

inline double max_abs_diff(const Factor& a, const Factor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::fmax(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

inline double max_abs_diff(const SymMatrix& a, const SymMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.entries().size(); ++i) m = std::fmax(m, std::fabs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace fsdp::testing

#include <functional>

#include "fsdp/objective.hpp"

namespace fsdp::testing {

/// f_i(X) = <C_i, X>; gradient independent of X.
class LinearObjective final : public SampleObjective {
 public:
  explicit LinearObjective(std::vector<SymMatrix> c) : c_(std::move(c)) {}
  std::size_t dim() const override { return c_.front().dim(); }
  std::size_t size() const override { return c_.size(); }
  double eval_sample(std::size_t i, const SymMatrix& x) const override { return frob_dot(c_[i], x); }
  SymMatrix grad_sample(std::size_t i, const SymMatrix&) const override { return c_[i]; }

 private:
  std::vector<SymMatrix> c_;
};

inline LinearObjective zero_objective(std::size_t p, std::size_t n = 3) {
  return LinearObjective(std::vector<SymMatrix>(n, SymMatrix(p)));
}

/// Central-difference gradient of a function of a symmetric matrix, using
/// symmetric perturbations so the result is comparable to a symmetric gradient.
inline SymMatrix fd_gradient(const std::function<double(const SymMatrix&)>& f, const SymMatrix& x, double h = 1e-5) {
  const std::size_t p = x.dim();
  SymMatrix g(p);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      SymMatrix xp = x, xm = x;
      xp.add_to(a, b, h);
      xm.add_to(a, b, -h);
      const double d = (f(xp) - f(xm)) / (2 * h);
      g.set(a, b, a == b ? d : d / 2);
    }
  }
  return g;
}

inline Factor fd_gradient(const std::function<double(const Factor&)>& f, const Factor& u, double h = 1e-5) {
  Factor g(u.rows(), u.cols());
  for (std::size_t i = 0; i < u.size(); ++i) {
    Factor up = u, um = u;
    up.data()[i] += h;
    um.data()[i] -= h;
    g.data()[i] = (f(up) - f(um)) / (2 * h);
  }
  return g;
}

inline double rel_err(const SymMatrix& approx, const SymMatrix& exact) {
  return frob_norm(approx - exact) / std::max(frob_norm(exact), 1e-300);
}
inline double rel_err(const Factor& approx, const Factor& exact) {
  return frob_norm(approx - exact) / std::max(frob_norm(exact), 1e-300);
}

}  // namespace fsdp::testing
