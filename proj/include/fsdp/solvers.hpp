#pragma once
// SVRG (Option-I) on the factor U, the FGD/SFGD factor baselines and
// projected gradient descent in X-space. One "epoch" is one outer SVRG
// iteration, one FGD/ProjGD iteration, or n SFGD steps.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fsdp/errors.hpp"
#include "fsdp/linalg.hpp"
#include "fsdp/objective.hpp"
#include "fsdp/stepsize.hpp"

namespace fsdp {

enum class Algorithm { SVRG, FGD, SFGD, ProjGD };

std::string_view algorithm_name(Algorithm a);

/// Called for every SVRG inner step with the direction that was applied.
struct InnerStep {
  std::size_t k;  // outer iteration
  std::size_t t;  // inner step
  std::size_t sample;
  double eta;
  const Factor& u;       // U^t before the update
  const Factor& anchor;  // U~^k
  const Factor& g;       // grad f(X~^k) U~^k
  const Factor& direction;
};

struct SolverConfig {
  Algorithm algorithm = Algorithm::SVRG;
  std::size_t m = 1;
  /// SVRG step schedule; the fixed eta for FGD/ProjGD and eta0 for SFGD
  /// come from `eta`.
  std::optional<StepSchedule> schedule;
  double eta = 1e-3;
  /// SFGD: eta_t = eta / (1 + t / t0); 0 means t0 = n.
  double t0 = 0.0;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::size_t eval_every = 1;

  std::optional<SymMatrix> x_ref;
  std::optional<Factor> u_ref;
  std::function<double(const SymMatrix&)> test_metric;
  /// Stop after the first recorded epoch with error_X <= stop_below.
  std::optional<double> stop_below;
  std::function<void(const InnerStep&)> observer;
};

struct RunRow {
  std::size_t epoch;
  double eta;  // step used during this epoch; 0 for the initial row
  double f;
  std::optional<double> error_x;
  std::optional<double> error_u;
  std::optional<double> test_metric;
  std::uint64_t sample_grads;
};

struct RunRecord {
  std::vector<RunRow> rows;
  Factor final_u;     // empty for ProjGD
  SymMatrix final_x;
  double wall_seconds = 0.0;
  bool stopped_early = false;
};

struct DivergedError : Error {
  DivergedError(std::size_t epoch, RunRecord partial);
  std::size_t epoch;
  RunRecord partial;
};

/// Sample gradients consumed per epoch.
std::uint64_t epoch_cost(Algorithm a, std::size_t n, std::size_t m);

/// SVRG direction grad f_i(U U^T) U - grad f_i(X~) U~ + g.
Factor svrg_direction(const SampleObjective& obj, std::size_t i, const Factor& u, const Factor& anchor,
                      const Factor& g);

RunRecord run_svrg(const SampleObjective& obj, SolverConfig config, const Factor& u0);
RunRecord run_fgd(const SampleObjective& obj, const SolverConfig& config, const Factor& u0);
RunRecord run_sfgd(const SampleObjective& obj, const SolverConfig& config, const Factor& u0);
RunRecord run_projgd(const SampleObjective& obj, const SolverConfig& config, const SymMatrix& x0);

/// Dispatch on config.algorithm; ProjGD starts from gram(u0).
RunRecord run(const SampleObjective& obj, const SolverConfig& config, const Factor& u0);

/// ||X - X_ref||_F / max(1, ||X_ref||_F)
double relative_error(const SymMatrix& x, const SymMatrix& x_ref);

/// Entry magnitude beyond which an iterate counts as diverged.
inline constexpr double kDivergenceThreshold = 1e150;

}  // namespace fsdp
