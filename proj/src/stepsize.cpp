#include "fsdp/stepsize.hpp"

#include <algorithm>
#include <cmath>

#include "fsdp/errors.hpp"

namespace fsdp {

double sbb_formula(const SymMatrix& dx, const SymMatrix& dg, double eps, std::size_t m) {
  const double nn = frob_dot(dx, dx);
  const double denom = static_cast<double>(m) * (std::fabs(frob_dot(dx, dg)) + eps * nn);
  if (!(denom > 0.0)) throw StallError("BB step: zero curvature denominator");
  double eta = nn / denom;
  // Rounding can push the quotient a few ulps past 1/(m eps); the bound is exact by contract.
  if (const auto cap = sbb_upper_bound(eps, m)) eta = std::min(eta, *cap);
  return eta;
}

std::optional<double> sbb_upper_bound(double eps, std::size_t m) {
  if (eps < 0.0) throw InvalidArgument("sbb_upper_bound: eps must be >= 0");
  if (m == 0) throw InvalidArgument("sbb_upper_bound: m must be >= 1");
  if (eps == 0.0) return std::nullopt;
  return 1.0 / (static_cast<double>(m) * eps);
}

StepSchedule::StepSchedule(StepKind kind, double eta, double eps, std::size_t m)
    : kind_(kind), eta0_(eta), eps_(eps), m_(m) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw InvalidArgument("step size must be positive and finite");
  if (!(eps >= 0.0)) throw InvalidArgument("SBB eps must be >= 0");
  if (m == 0) throw InvalidArgument("inner loop length m must be >= 1");
}

StepSchedule StepSchedule::fixed(double eta) { return StepSchedule(StepKind::Fixed, eta, 0.0, 1); }
StepSchedule StepSchedule::bb(std::size_t m, double eta0) { return StepSchedule(StepKind::BB, eta0, 0.0, m); }
StepSchedule StepSchedule::sbb(double eps, std::size_t m, double eta0) {
  return StepSchedule(StepKind::SBB, eta0, eps, m);
}

double StepSchedule::next_step(std::size_t k, const SymMatrix& xk, const SymMatrix& gk) {
  if (kind_ == StepKind::Fixed) return eta0_;
  if (k == 0 || !prev_x_) {
    if (k != 0) throw InvalidArgument("BB step: no previous iterate for k >= 1");
    prev_x_ = xk;
    prev_g_ = gk;
    prev_eta_ = eta0_;
    return eta0_;
  }
  const SymMatrix dx = xk - *prev_x_;
  if (frob_norm(dx) == 0.0) return prev_eta_;
  const double eta = sbb_formula(dx, gk - *prev_g_, eps_, m_);
  prev_x_ = xk;
  prev_g_ = gk;
  prev_eta_ = eta;
  return eta;
}

}  // namespace fsdp
