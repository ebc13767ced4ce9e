#include "fsdp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fsdp/errors.hpp"
#include "fsdp/format.hpp"
#include "fsdp/rng.hpp"

namespace fsdp {

namespace {

const double kS2m1 = std::sqrt(2.0) - 1.0;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// a <= b up to the lemma slack, relative to the magnitudes involved.
bool le_slack(double a, double b) {
  return a - b <= kLemmaSlack * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

double ConvergenceConstants::rho(double eta) const { return 1.0 - eta * B2 / theta; }

double ConvergenceConstants::rho_tilde(double eta, std::size_t m) const {
  const double rm = std::pow(rho(eta), static_cast<double>(m));
  return rm + (1.0 - rm) * eta * theta;
}

AssumptionReport check_assumption2(const SymMatrix& xstar, std::size_t r, double kappa, double xi) {
  if (r == 0 || r > xstar.dim()) throw InvalidArgument("check_assumption2: need 1 <= r <= p");
  const std::vector<double> sv = singular_values(xstar);
  double tail = 0.0;
  for (std::size_t i = r; i < sv.size(); ++i) tail += sv[i] * sv[i];
  AssumptionReport a;
  a.lhs = std::sqrt(tail);
  a.rhs = kS2m1 / std::sqrt(3.0) * std::sqrt(xi) / kappa * sv[r - 1];
  a.margin = a.rhs - a.lhs;
  a.holds_approx_error = a.lhs < a.rhs;
  return a;
}

ConvergenceConstants compute_constants(double L, double mu, const SymMatrix& xstar, std::size_t r,
                                       const RegionStats& region, double grad_norm_at_Xr) {
  if (!(mu > 0.0) || !(L >= mu) || !std::isfinite(L)) throw InvalidArgument("compute_constants: need L >= mu > 0");
  if (r == 0 || r > xstar.dim()) throw InvalidArgument("compute_constants: need 1 <= r <= p");
  if (!std::isfinite(region.calB) || !std::isfinite(region.B0) || !std::isfinite(region.B1))
    throw InvalidArgument("compute_constants: region statistics must be finite");

  const Truncation tr = truncated_approx(xstar, r);
  const std::vector<double> sv = singular_values(tr.approx);
  if (!(sv[r - 1] > 1e-12 * static_cast<double>(xstar.dim()) * sv[0]))
    throw InvalidArgument("compute_constants: r exceeds the numerical rank of X*");

  ConvergenceConstants c{};
  c.L = L;
  c.mu = mu;
  c.r = r;
  c.kappa = L / mu;
  c.gamma0 = 2.0 * kS2m1 / (3.0 * c.kappa);
  c.sigma_1_Xr = sv[0];
  c.sigma_r_Xr = sv[r - 1];
  c.tau_Xr = c.sigma_1_Xr / c.sigma_r_Xr;
  c.tau_Ur = std::sqrt(c.tau_Xr);
  c.norm_Xr_F = frob_norm(tr.approx);
  c.approx_err = frob_norm(tr.approx - xstar);
  c.grad_norm_at_Xr = grad_norm_at_Xr;

  const double sg0 = std::sqrt(c.gamma0);
  const double s = c.sigma_r_Xr;
  c.eta_bar = std::min(
      (1.0 - sg0) * (1.0 - sg0) / (grad_norm_at_Xr / (L * s) + (2.0 * sg0 + c.gamma0) * c.tau_Ur), 1.0);
  c.xi = c.eta_bar * (1.0 - c.eta_bar / 2.0);

  const double e2 = c.approx_err * c.approx_err;
  const double base = kS2m1 * kS2m1 * c.xi * c.xi * s * s / (c.kappa * c.kappa);
  c.Delta = base / 3.0 - c.xi * e2;
  c.Delta_tilde = 4.0 * base / 9.0 - c.xi * e2;
  const double mid = 2.0 * kS2m1 * c.xi * s / (3.0 * c.kappa);
  if (c.Delta >= 0.0) {
    c.gamma_l = mid - std::sqrt(c.Delta);
    c.gamma_u = mid + std::sqrt(c.Delta);
  }
  if (c.Delta_tilde >= 0.0) {
    c.gamma_l_tilde = mid - std::sqrt(c.Delta_tilde);
    c.gamma_u_tilde = mid + std::sqrt(c.Delta_tilde);
  }

  c.calB = region.calB;
  c.B0 = region.B0;
  c.B1 = region.B1;
  c.region_samples = region.samples;
  c.B2 = 4.0 * (2.0 * L * L * c.calB * (c.calB + c.norm_Xr_F) + c.B0 + c.B1);

  if (c.complete()) {
    const double sd = std::sqrt(c.Delta), sdt = std::sqrt(c.Delta_tilde);
    c.delta = sdt + sd;
    c.theta = 18.0 * c.B2 * c.kappa * c.delta / (kS2m1 * kS2m1 * c.xi * mu * s * s);
    c.theta_alt = 2.0 * c.xi * c.B2 / (L * (sdt - sd));
  } else {
    c.delta = c.theta = c.theta_alt = kNaN;
  }

  c.zeta1 = 1.0 / (12.0 * (2.0 * L * c.kappa * c.calB + (c.B0 + c.B1) / (kS2m1 * mu * s)));
  c.zeta1_alt = kS2m1 * mu * s / (12.0 * (2.0 * kS2m1 * s * L * L * c.calB + c.B0 + c.B1));
  c.zeta2 = kS2m1 * mu * c.xi * s / (12.0 * c.B2);
  c.eta_max = std::min({c.zeta1, c.zeta1_alt, c.zeta2, 1.0 / (2.0 * c.theta)});
  c.eta_bar_max = c.gamma_u ? std::min(L * *c.gamma_u / (2.0 * c.B2 * c.xi), c.eta_max) : kNaN;
  c.assumption2 = check_assumption2(xstar, r, c.kappa, c.xi);
  return c;
}

void require_complete(const ConvergenceConstants& c) {
  if (c.complete()) return;
  std::string which;
  if (c.Delta < 0.0) which += "Delta = " + fmt(c.Delta) + " < 0";
  if (c.Delta_tilde < 0.0) which += std::string(which.empty() ? "" : ", ") + "Delta~ = " + fmt(c.Delta_tilde) + " < 0";
  throw AssumptionViolated("rank-r approximation error too large: " + which);
}

std::uint64_t sbb_inner_count_bound(double mu, double eps, double eta_max) {
  if (!(mu >= 0.0) || !(eps >= 0.0) || !(mu + eps > 0.0) || !(eta_max > 0.0))
    throw InvalidArgument("sbb_inner_count_bound: need mu + eps > 0 and eta_max > 0");
  const double q = 1.0 / ((mu + eps) * eta_max);
  // Snap values within roundoff of an integer so 1/(1 * 0.01) counts as 100.
  const double near = std::round(q);
  const double ceil_q = std::fabs(q - near) <= 1e-9 * std::max(1.0, q) ? near : std::ceil(q);
  return static_cast<std::uint64_t>(ceil_q) + 1;
}

std::vector<double> theorem1_rate(const ConvergenceConstants& c, const std::vector<double>& eta, std::size_t m,
                                  std::size_t k, double init_err) {
  if (!c.complete()) throw HypothesisError("bound undefined: rank-r approximation assumption fails");
  if (m == 0) throw HypothesisError("m must be >= 1");
  if (eta.empty() || (eta.size() != 1 && eta.size() < k))
    throw HypothesisError("need one step size or one per outer iteration");
  for (double e : eta)
    if (!(e > 0.0 && e < c.eta_max))
      throw HypothesisError("step size " + fmt(e) + " outside (0, eta_max = " + fmt(c.eta_max) + ")");
  if (!(init_err > *c.gamma_l && init_err < *c.gamma_u))
    throw HypothesisError("initial error " + fmt(init_err) + " outside (gamma_l, gamma_u) = (" + fmt(*c.gamma_l) +
                          ", " + fmt(*c.gamma_u) + ")");
  std::vector<double> b{init_err};
  b.reserve(k + 1);
  for (std::size_t i = 0; i < k; ++i) {
    const double e = eta.size() == 1 ? eta[0] : eta[i];
    const double rm = std::pow(c.rho(e), static_cast<double>(m));
    b.push_back(c.rho_tilde(e, m) * b.back() + (1.0 - rm) * *c.gamma_l_tilde);
  }
  return b;
}

double theorem1_closed_form(const ConvergenceConstants& c, double eta, std::size_t m, std::size_t k,
                            double init_err) {
  if (!c.complete()) throw HypothesisError("bound undefined: rank-r approximation assumption fails");
  const double floor = *c.gamma_l_tilde / (1.0 - c.theta * eta);
  return floor + std::pow(c.rho_tilde(eta, m), static_cast<double>(k)) * (init_err - floor);
}

RegionStats estimate_region_stats(const SampleObjective& obj, const Factor& ur, double radius_sq,
                                  std::size_t samples, std::uint64_t seed) {
  if (ur.rows() != obj.dim()) throw ShapeError("estimate_region_stats: U_r has wrong row count");
  if (!(radius_sq >= 0.0)) throw InvalidArgument("estimate_region_stats: negative radius");
  const double radius = std::sqrt(radius_sq);
  const double d = static_cast<double>(ur.size());
  const double inv_n = 1.0 / static_cast<double>(obj.size());
  Rng rng(seed);
  RegionStats st{0.0, -std::numeric_limits<double>::infinity(), 0.0, 0};
  for (std::size_t s = 0; s <= samples; ++s) {
    Factor u = ur;
    if (s > 0) {  // sample 0 is the center
      Factor g(ur.rows(), ur.cols());
      for (std::size_t q = 0; q < g.size(); ++q) g.data()[q] = rng.normal();
      const double len = radius * std::pow(rng.uniform01(), 1.0 / d) / frob_norm(g);
      u.axpy(len, g);
    }
    const SymMatrix x = gram(u);
    const double gf = frob_norm(obj.grad_full(x));
    double mean_sq = 0.0;
    for (std::size_t i = 0; i < obj.size(); ++i) mean_sq += obj.grad_sample_norm_sq(i, x) * inv_n;
    st.calB = std::max(st.calB, frob_norm(x));
    st.B1 = std::max(st.B1, gf * gf);
    st.B0 = std::max(st.B0, mean_sq - gf * gf);
    ++st.samples;
  }
  return st;
}

ConvergenceConstants constants_for(const SampleObjective& obj, double L, double mu, const SymMatrix& xstar,
                                   std::size_t r, std::size_t region_samples, std::uint64_t seed) {
  const Truncation tr = truncated_approx(xstar, r);
  const double s = singular_values(tr.approx)[r - 1];
  const double gamma0 = 2.0 * kS2m1 / (3.0 * (L / mu));
  const RegionStats st = estimate_region_stats(obj, tr.factor, gamma0 * s, region_samples, seed);
  return compute_constants(L, mu, xstar, r, st, frob_norm(obj.grad_full(tr.approx)));
}

void write_constants_csv(std::ostream& os, const ConvergenceConstants& c) {
  const auto row = [&](const char* name, const std::string& v) { os << name << ',' << v << '\n'; };
  os << "name,value\n";
  row("L", fmt(c.L));
  row("mu", fmt(c.mu));
  row("kappa", fmt(c.kappa));
  row("r", std::to_string(c.r));
  row("gamma0", fmt(c.gamma0));
  row("sigma_1_Xr", fmt(c.sigma_1_Xr));
  row("sigma_r_Xr", fmt(c.sigma_r_Xr));
  row("tau_Xr", fmt(c.tau_Xr));
  row("tau_Ur", fmt(c.tau_Ur));
  row("norm_Xr_F", fmt(c.norm_Xr_F));
  row("approx_err", fmt(c.approx_err));
  row("grad_norm_at_Xr", fmt(c.grad_norm_at_Xr));
  row("eta_bar", fmt(c.eta_bar));
  row("xi", fmt(c.xi));
  row("Delta", fmt(c.Delta));
  row("Delta_tilde", fmt(c.Delta_tilde));
  row("gamma_l", fmt(c.gamma_l));
  row("gamma_u", fmt(c.gamma_u));
  row("gamma_l_tilde", fmt(c.gamma_l_tilde));
  row("gamma_u_tilde", fmt(c.gamma_u_tilde));
  row("calB", fmt(c.calB));
  row("B0", fmt(c.B0));
  row("B1", fmt(c.B1));
  row("B2", fmt(c.B2));
  row("delta", fmt(c.delta));
  row("theta", fmt(c.theta));
  row("theta_alt", fmt(c.theta_alt));
  row("zeta1", fmt(c.zeta1));
  row("zeta1_alt", fmt(c.zeta1_alt));
  row("zeta2", fmt(c.zeta2));
  row("eta_max", fmt(c.eta_max));
  row("eta_bar_max", fmt(c.eta_bar_max));
  row("assumption2_holds", c.assumption2.holds_approx_error ? "1" : "0");
  row("assumption2_lhs", fmt(c.assumption2.lhs));
  row("assumption2_rhs", fmt(c.assumption2.rhs));
  // Region suprema are empirical maxima over this many points (under-estimates).
  row("region_samples", std::to_string(c.region_samples));
}

// ---------------------------------------------------------------- lemmas

DistBoundsReport lemma_dist_bounds(const Factor& u, const Factor& ur, double gamma) {
  if (u.rows() != ur.rows() || u.cols() != ur.cols()) throw ShapeError("lemma_dist_bounds: shape mismatch");
  const SymMatrix x = gram(u), xr = gram(ur);
  const double diff = frob_norm(x - xr);
  DistBoundsReport rep{};
  rep.lhs = diff * diff;
  rep.dist = procrustes_dist(u, ur);
  const double d2 = rep.dist * rep.dist;
  const std::vector<double> sv = singular_values(ur);
  const double sr = sv[ur.cols() - 1];
  rep.upper_rhs = 2.0 * (frob_norm(x) + frob_norm(xr)) * d2;
  rep.lower_rhs = 2.0 * kS2m1 * sr * sr * d2;
  rep.upper_ok = le_slack(rep.lhs, rep.upper_rhs);
  rep.applicable = gamma > 0.0 && gamma < 1.0 && rep.dist <= gamma * sr;
  rep.lower_ok = !rep.applicable || le_slack(rep.lower_rhs, rep.lhs);
  return rep;
}

SpectralBoundsReport lemma_spectral_bounds(const Factor& u, const Factor& ur, double gamma) {
  if (u.rows() != ur.rows() || u.cols() != ur.cols()) throw ShapeError("lemma_spectral_bounds: shape mismatch");
  const std::vector<double> su = singular_values(u), sr = singular_values(ur);
  const std::size_t r = ur.cols();
  const double dist = frob_norm(u - ur);
  if (!(gamma > 0.0 && gamma < 1.0) || dist > gamma * sr[r - 1])
    throw NotApplicable("lemma_spectral_bounds: need ||U - U_r||_F <= gamma sigma_r(U_r), 0 < gamma < 1");
  SpectralBoundsReport rep{};
  const double tau = sr[0] / sr[r - 1];
  const double sr_x = sr[r - 1] * sr[r - 1];
  rep.x_dist_ok = le_slack(frob_norm(gram(u) - gram(ur)), (2.0 * gamma + gamma * gamma) * tau * sr_x);
  rep.sigma_ok = le_slack((1.0 - gamma) * sr[r - 1], su[r - 1]);
  rep.weyl_ok = true;
  for (std::size_t i = 0; i < r; ++i) rep.weyl_ok = rep.weyl_ok && le_slack(std::fabs(su[i] - sr[i]), dist);
  return rep;
}

FeasibilityReport lemma_feasibility(const Factor& u, const Factor& ur, const SampleObjective& obj, double eta_bar,
                                    double L, double gamma0) {
  if (u.rows() != ur.rows() || u.cols() != ur.cols() || u.rows() != obj.dim())
    throw ShapeError("lemma_feasibility: shape mismatch");
  const std::vector<double> sr = singular_values(ur);
  const std::size_t r = ur.cols();
  const double sr_x = sr[r - 1] * sr[r - 1];
  const double dist = frob_norm(u - ur);
  if (!(dist * dist < gamma0 * sr_x))
    throw NotApplicable("lemma_feasibility: need ||U - U_r||_F^2 < gamma0 sigma_r(X_r)");

  const SymMatrix x = gram(u), xr = gram(ur);
  const SymMatrix grad = obj.grad_full(x);
  FeasibilityReport rep{};
  rep.grad_norm = frob_norm(grad);
  const double sg0 = std::sqrt(gamma0);
  rep.grad_bound = frob_norm(obj.grad_full(xr)) + (2.0 * sg0 + gamma0) * L * (sr[0] / sr[r - 1]) * sr_x;
  rep.grad_bound_ok = le_slack(rep.grad_norm, rep.grad_bound);

  const std::size_t p = x.dim();
  const Factor pu(p, p, column_projector(u).entries());
  SymMatrix xbar = x;
  xbar.axpy(-eta_bar / L, SymMatrix(p, matmul(pu, mul(grad, pu)).entries()));
  rep.xbar_min_eig = eig_sym(xbar).values.back();
  rep.xbar_psd_ok = rep.xbar_min_eig >= -std::max(tol_psd(xbar), kLemmaSlack);

  // ||(I - P_U) X_r||_F = ||X_r - X_r P_U||_F by transposition.
  rep.range_residual = frob_norm(Factor(p, p, xr.entries()) - mul(xr, pu));
  rep.range_ok = rep.range_residual <= 1e-8;
  return rep;
}

bool lemma_trace(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim() != b.dim()) throw ShapeError("lemma_trace: shape mismatch");
  const double amin = eig_sym(a).values.back();
  if (!(amin > 0.0)) throw NotApplicable("lemma_trace: A must be positive definite");
  if (eig_sym(b).values.back() < -tol_psd(b)) throw NotApplicable("lemma_trace: B must be PSD");
  return le_slack(amin * b.trace(), frob_dot(a, b));
}

}  // namespace fsdp
