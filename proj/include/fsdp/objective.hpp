#pragma once
// Finite-sum objectives f(X) = (1/n) sum_i f_i(X) over symmetric X, and the
// two concrete families: Gaussian matrix sensing and stochastic triplet
// embedding (STE).

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "fsdp/linalg.hpp"

namespace fsdp {

class SampleObjective {
 public:
  virtual ~SampleObjective() = default;

  virtual std::size_t dim() const = 0;
  /// Number of samples n.
  virtual std::size_t size() const = 0;

  virtual double eval_sample(std::size_t i, const SymMatrix& x) const = 0;
  virtual SymMatrix grad_sample(std::size_t i, const SymMatrix& x) const = 0;

  /// Defaults average the per-sample oracles.
  virtual double eval_full(const SymMatrix& x) const;
  virtual SymMatrix grad_full(const SymMatrix& x) const;

  /// out += alpha * grad f_i(U U^T) U. The default materializes X and the
  /// gradient; subclasses override with a product form.
  virtual void accumulate_factored_gradient(std::size_t i, const Factor& u, double alpha, Factor& out) const;

  /// ||grad f_i(X)||_F^2 (default forms the gradient).
  virtual double grad_sample_norm_sq(std::size_t i, const SymMatrix& x) const;

  /// grad f_i(X) U without forming grad f_i(X) (default does form it).
  Factor grad_sample_times_factor(std::size_t i, const SymMatrix& x, const Factor& u) const;

 protected:
  void check_index(std::size_t i) const;
};

/// Selects the full objective in factored_gradient.
inline constexpr std::size_t FULL = std::numeric_limits<std::size_t>::max();

/// grad f_i(U U^T) U, or grad f(U U^T) U for i == FULL. This is the solver
/// direction; the gradient of g(U) = f(U U^T) is twice this.
Factor factored_gradient(const SampleObjective& obj, std::size_t i, const Factor& u);
/// 2 grad f(U U^T) U, the gradient of g(U) = f(U U^T).
Factor g_gradient(const SampleObjective& obj, const Factor& u);

// ---------------------------------------------------------------- sensing

class SensingProblem final : public SampleObjective {
 public:
  /// f_i(X) = 1/2 (b_i - <A_i, X>)^2.
  SensingProblem(std::vector<SymMatrix> a, std::vector<double> b);

  std::size_t dim() const override { return p_; }
  std::size_t size() const override { return n_; }

  double eval_sample(std::size_t i, const SymMatrix& x) const override;
  SymMatrix grad_sample(std::size_t i, const SymMatrix& x) const override;
  double eval_full(const SymMatrix& x) const override;
  SymMatrix grad_full(const SymMatrix& x) const override;
  void accumulate_factored_gradient(std::size_t i, const Factor& u, double alpha, Factor& out) const override;
  double grad_sample_norm_sq(std::size_t i, const SymMatrix& x) const override;

  const double* measurement(std::size_t i) const { return a_.data() + i * p_ * p_; }
  SymMatrix measurement_matrix(std::size_t i) const;
  double target(std::size_t i) const { return b_[i]; }

  /// Ground truth, when generated.
  std::optional<SymMatrix> xstar;
  std::optional<Factor> ustar;

 private:
  std::size_t p_, n_;
  std::vector<double> a_;  // n blocks of p*p, row-major, symmetric
  std::vector<double> b_;
};

/// U* with i.i.d. N(0, ustar_scale^2) entries, A_i symmetrized standard
/// Gaussian, noiseless b_i = <A_i, X*>.
SensingProblem sensing_generate(std::size_t p, std::size_t r_star, std::size_t n, std::uint64_t seed,
                                double ustar_scale = 1.0);

/// Extreme eigenvalues of the sensing Hessian H(D) = (1/n) sum <A_i,D> A_i
/// on symmetric matrices. Builds the p(p+1)/2 square operator explicitly, so
/// only meant for small p.
struct CurvatureRange {
  double lmax;
  double lmin;
  SymMatrix top_direction;     // unit Frobenius norm
  SymMatrix bottom_direction;  // unit Frobenius norm
};
CurvatureRange sensing_curvature(const SensingProblem& prob);

/// Largest Hessian eigenvalue by power iteration (any p).
double sensing_lipschitz(const SensingProblem& prob, int iters = 300, std::uint64_t seed = 1);

// ---------------------------------------------------------------- triplets

using Triplet = std::array<std::uint32_t, 3>;

inline double sqdist(const SymMatrix& x, std::size_t a, std::size_t b) {
  return x(a, a) + x(b, b) - 2.0 * x(a, b);
}

/// -log sigmoid(d2_ik - d2_ij) for triplet (i, j, k): "i is closer to j than to k".
double ste_loss(const Triplet& c, const SymMatrix& x);
/// Gradient of ste_loss(c, X) + lambda * tr(X).
SymMatrix ste_grad(const Triplet& c, const SymMatrix& x, double lambda);

class TripletProblem final : public SampleObjective {
 public:
  TripletProblem(std::size_t p, std::vector<Triplet> triplets, double lambda);

  std::size_t dim() const override { return p_; }
  std::size_t size() const override { return t_.size(); }
  double lambda() const { return lambda_; }
  const std::vector<Triplet>& triplets() const { return t_; }

  double eval_sample(std::size_t i, const SymMatrix& x) const override;
  SymMatrix grad_sample(std::size_t i, const SymMatrix& x) const override;
  double eval_full(const SymMatrix& x) const override;
  SymMatrix grad_full(const SymMatrix& x) const override;
  void accumulate_factored_gradient(std::size_t i, const Factor& u, double alpha, Factor& out) const override;

 private:
  std::size_t p_;
  std::vector<Triplet> t_;
  double lambda_;
};

/// Fraction of triplets with d2_ij(X) >= d2_ik(X) (ties count as violated).
double test_error(const SymMatrix& x, const std::vector<Triplet>& test);
/// Same, evaluated from a factor without forming X.
double test_error(const Factor& u, const std::vector<Triplet>& test);

/// Upper bound on the loss curvature (exact at X = 0) by power iteration.
double triplet_lipschitz(const TripletProblem& prob, int iters = 300, std::uint64_t seed = 1);

// ---------------------------------------------------------------- probes

struct Smoothness {
  double L_hat;
  double mu_hat;
  std::size_t used;
};

/// L_hat = max ||grad f(X) - grad f(Y)|| / ||X - Y||,
/// mu_hat = min <grad f(X) - grad f(Y), X - Y> / ||X - Y||^2 over the pairs.
Smoothness estimate_smoothness(const SampleObjective& obj, const std::vector<std::pair<SymMatrix, SymMatrix>>& pairs);

}  // namespace fsdp
