#pragma once
// Outer-iteration step sizes for SVRG: fixed, Barzilai-Borwein (BB) and
// stabilized BB (SBB). BB is SBB with eps = 0 and shares its code path.

#include <cstddef>
#include <optional>

#include "fsdp/linalg.hpp"

namespace fsdp {

enum class StepKind { Fixed, BB, SBB };

/// ||dX||^2 / (m (|<dX, dG>| + eps ||dX||^2)). Throws StallError on a zero
/// denominator; callers handle dX == 0 before getting here.
double sbb_formula(const SymMatrix& dx, const SymMatrix& dg, double eps, std::size_t m);

/// 1/(m eps); nullopt (unbounded) when eps == 0.
std::optional<double> sbb_upper_bound(double eps, std::size_t m);

class StepSchedule {
 public:
  static StepSchedule fixed(double eta);
  static StepSchedule bb(std::size_t m, double eta0);
  static StepSchedule sbb(double eps, std::size_t m, double eta0);

  StepKind kind() const { return kind_; }
  double eps() const { return eps_; }
  std::size_t m() const { return m_; }
  double eta0() const { return eta0_; }

  /// Step for outer iteration k given X~^k and the matrix gradient at it.
  double next_step(std::size_t k, const SymMatrix& xk, const SymMatrix& gk);

  bool has_state() const { return prev_x_.has_value(); }

 private:
  StepSchedule(StepKind kind, double eta, double eps, std::size_t m);

  StepKind kind_;
  double eta0_;  // fixed eta, or the k = 0 step for BB/SBB
  double eps_;
  std::size_t m_;
  std::optional<SymMatrix> prev_x_, prev_g_;
  double prev_eta_ = 0.0;
};

}  // namespace fsdp
