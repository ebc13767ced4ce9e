#pragma once
// Convergence constants of the SVRG analysis and numerical predicates for
// the supporting lemmas. Distances in U-space for the two-matrix bounds are
// Procrustes-aligned (U is only identified up to rotation).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fsdp/linalg.hpp"
#include "fsdp/objective.hpp"

namespace fsdp {

/// Suprema over the ball N = {U : ||U - U*_r||_F^2 <= gamma0 sigma_r(X*_r)}.
struct RegionStats {
  double calB;  // sup ||U U^T||_F
  double B0;    // sup E_i ||grad f_i||^2 - ||grad f||^2
  double B1;    // sup ||grad f||^2
  std::size_t samples = 0;
};

struct AssumptionReport {
  bool holds_approx_error;
  double lhs;  // ||X*_r - X*||_F
  double rhs;  // (sqrt2 - 1)/sqrt3 * sqrt(xi) / kappa * sigma_r(X*)
  double margin;  // rhs - lhs
};

struct ConvergenceConstants {
  double L, mu, kappa, gamma0;
  std::size_t r;
  double sigma_r_Xr, sigma_1_Xr, tau_Xr, tau_Ur, norm_Xr_F, approx_err, grad_norm_at_Xr;
  double eta_bar, xi;
  double Delta, Delta_tilde;
  // Empty when the corresponding Delta is negative (Assumption 2 violated).
  std::optional<double> gamma_l, gamma_u, gamma_l_tilde, gamma_u_tilde;
  double calB, B0, B1, B2;
  std::size_t region_samples;
  double delta, theta, theta_alt;
  double zeta1, zeta1_alt, zeta2;
  double eta_max, eta_bar_max;
  AssumptionReport assumption2;

  bool complete() const { return gamma_l && gamma_u && gamma_l_tilde && gamma_u_tilde; }
  /// rho_k for step eta (the per-inner-step contraction).
  double rho(double eta) const;
  /// rho_k^m + (1 - rho_k^m) eta theta
  double rho_tilde(double eta, std::size_t m) const;
};

/// grad_norm_at_Xr = ||grad f(X*_r)||_F (zero at an exact low-rank optimum).
ConvergenceConstants compute_constants(double L, double mu, const SymMatrix& xstar, std::size_t r,
                                       const RegionStats& region, double grad_norm_at_Xr = 0.0);

/// Throws AssumptionViolated naming the negative discriminant(s).
void require_complete(const ConvergenceConstants& c);

AssumptionReport check_assumption2(const SymMatrix& xstar, std::size_t r, double kappa, double xi);

/// ceil(1 / ((mu + eps) eta_max)) + 1
std::uint64_t sbb_inner_count_bound(double mu, double eps, double eta_max);

/// Sequence b_0..b_k of the linear-convergence bound for steps eta[0..k-1]
/// (a single entry means constant eta). Throws HypothesisError naming the
/// unmet hypothesis.
std::vector<double> theorem1_rate(const ConvergenceConstants& c, const std::vector<double>& eta, std::size_t m,
                                  std::size_t k, double init_err);

/// Closed form for constant eta: gbar + rho_tilde^k (init - gbar), gbar = gamma~_l / (1 - theta eta).
double theorem1_closed_form(const ConvergenceConstants& c, double eta, std::size_t m, std::size_t k,
                            double init_err);

/// Uniform samples from N (plus its center) and empirical maxima.
RegionStats estimate_region_stats(const SampleObjective& obj, const Factor& ur, double radius_sq,
                                  std::size_t samples, std::uint64_t seed);

/// Region statistics over N around the rank-r truncation of xstar, then constants.
ConvergenceConstants constants_for(const SampleObjective& obj, double L, double mu, const SymMatrix& xstar,
                                   std::size_t r, std::size_t region_samples, std::uint64_t seed);

void write_constants_csv(std::ostream& os, const ConvergenceConstants& c);

// ---------------------------------------------------------------- lemmas

struct DistBoundsReport {
  bool upper_ok;
  bool lower_ok;
  bool applicable;  // closeness hypothesis of the lower bound
  double lhs;       // ||X - X*_r||_F^2
  double upper_rhs;
  double lower_rhs;
  double dist;      // aligned ||U - U*_r||_F
};

/// Upper and lower bounds of ||UU^T - Ur Ur^T||_F^2 in terms of the aligned
/// factor distance. The lower bound is evaluated when dist <= gamma sigma_r(Ur).
DistBoundsReport lemma_dist_bounds(const Factor& u, const Factor& ur, double gamma = 0.99);

struct SpectralBoundsReport {
  bool x_dist_ok;  // ||X - Xr||_F <= (2g + g^2) tau(Ur) sigma_r(Xr)
  bool sigma_ok;   // sigma_r(U) >= (1 - g) sigma_r(Ur)
  bool weyl_ok;    // |sigma_i(U) - sigma_i(Ur)| <= ||U - Ur||_F for all i
};

/// Throws NotApplicable unless ||U - Ur||_F <= gamma sigma_r(Ur) with 0 < gamma < 1.
SpectralBoundsReport lemma_spectral_bounds(const Factor& u, const Factor& ur, double gamma);

struct FeasibilityReport {
  bool grad_bound_ok;   // (a)
  bool xbar_psd_ok;     // (b)
  bool range_ok;        // (c) ||(I - P_U) X*_r||_F <= 1e-8
  double grad_norm, grad_bound;
  double xbar_min_eig;
  double range_residual;
};

/// Throws NotApplicable unless ||U - Ur||_F^2 < gamma0 sigma_r(Ur Ur^T).
FeasibilityReport lemma_feasibility(const Factor& u, const Factor& ur, const SampleObjective& obj, double eta_bar,
                                    double L, double gamma0);

/// tr(AB) >= lambda_min(A) tr(B) for PSD A (full rank) and PSD B.
bool lemma_trace(const SymMatrix& a, const SymMatrix& b);

inline constexpr double kLemmaSlack = 1e-10;

}  // namespace fsdp
