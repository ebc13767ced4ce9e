#include "fsdp/solvers.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "fsdp/rng.hpp"

namespace fsdp {

std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::SVRG: return "svrg";
    case Algorithm::FGD: return "fgd";
    case Algorithm::SFGD: return "sfgd";
    case Algorithm::ProjGD: return "projgd";
  }
  return "?";
}

DivergedError::DivergedError(std::size_t e, RunRecord p)
    : Error("iterate diverged at epoch " + std::to_string(e)), epoch(e), partial(std::move(p)) {}

std::uint64_t epoch_cost(Algorithm a, std::size_t n, std::size_t m) {
  return a == Algorithm::SVRG ? static_cast<std::uint64_t>(n) + m : static_cast<std::uint64_t>(n);
}

double relative_error(const SymMatrix& x, const SymMatrix& x_ref) {
  return frob_norm(x - x_ref) / std::max(1.0, frob_norm(x_ref));
}

Factor svrg_direction(const SampleObjective& obj, std::size_t i, const Factor& u, const Factor& anchor,
                      const Factor& g) {
  Factor a(u.rows(), u.cols()), b(u.rows(), u.cols());
  obj.accumulate_factored_gradient(i, u, 1.0, a);
  obj.accumulate_factored_gradient(i, anchor, 1.0, b);
  // (a - b) first: exactly zero when U == U~, so the first inner direction is exactly g.
  for (std::size_t q = 0; q < a.size(); ++q) a.data()[q] = (a.data()[q] - b.data()[q]) + g.data()[q];
  return a;
}

namespace {

using Clock = std::chrono::steady_clock;

bool diverged(const Factor& u) {
  for (double x : u.entries())
    if (!std::isfinite(x) || std::fabs(x) > kDivergenceThreshold) return true;
  return false;
}

bool diverged(const SymMatrix& x) {
  for (double v : x.entries())
    if (!std::isfinite(v) || std::fabs(v) > kDivergenceThreshold) return true;
  return false;
}

void validate(const SampleObjective& obj, const SolverConfig& c, std::size_t rows) {
  if (rows != obj.dim()) throw ShapeError("solver: initial point has wrong dimension");
  if (c.epochs == 0) throw InvalidArgument("solver: epochs must be >= 1");
  if (c.eval_every == 0) throw InvalidArgument("solver: eval_every must be >= 1");
  if (c.m == 0) throw InvalidArgument("solver: m must be >= 1");
}

// Shared bookkeeping: rows, early stop, divergence.
class Recorder {
 public:
  Recorder(const SampleObjective& obj, const SolverConfig& c) : obj_(obj), c_(c), start_(Clock::now()) {}

  // Returns true when the run should stop early.
  bool record(std::size_t epoch, double eta, const SymMatrix& x, const Factor* u, bool force) {
    if (!force && epoch % c_.eval_every != 0 && epoch != c_.epochs) return false;
    RunRow row{epoch, eta, obj_.eval_full(x), std::nullopt, std::nullopt, std::nullopt, grads_};
    if (c_.x_ref) row.error_x = relative_error(x, *c_.x_ref);
    if (c_.u_ref) {
      if (u) {
        row.error_u = procrustes_dist(*u, *c_.u_ref);
      } else {
        row.error_u = procrustes_dist(truncated_approx(x, c_.u_ref->cols()).factor, *c_.u_ref);
      }
    }
    if (c_.test_metric) row.test_metric = c_.test_metric(x);
    rec_.rows.push_back(row);
    if (c_.stop_below && row.error_x && *row.error_x <= *c_.stop_below) {
      rec_.stopped_early = true;
      return true;
    }
    return false;
  }

  void add_grads(std::uint64_t g) { grads_ += g; }

  RunRecord finish(Factor u, SymMatrix x) {
    rec_.final_u = std::move(u);
    rec_.final_x = std::move(x);
    rec_.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
    return std::move(rec_);
  }

  [[noreturn]] void fail(std::size_t epoch, Factor u, SymMatrix x) {
    throw DivergedError(epoch, finish(std::move(u), std::move(x)));
  }

 private:
  const SampleObjective& obj_;
  const SolverConfig& c_;
  Clock::time_point start_;
  RunRecord rec_;
  std::uint64_t grads_ = 0;
};

}  // namespace

RunRecord run_svrg(const SampleObjective& obj, SolverConfig c, const Factor& u0) {
  validate(obj, c, u0.rows());
  if (!c.schedule) throw InvalidArgument("run_svrg: no step schedule");
  StepSchedule& schedule = *c.schedule;
  const std::size_t n = obj.size();
  Rng rng(c.seed);
  Recorder rec(obj, c);

  Factor anchor = u0;
  SymMatrix x_anchor = gram(anchor);
  if (rec.record(0, 0.0, x_anchor, &anchor, true)) return rec.finish(anchor, x_anchor);

  Factor u = anchor;
  Factor a(u.rows(), u.cols()), b(u.rows(), u.cols()), dir(u.rows(), u.cols());
  for (std::size_t k = 0; k < c.epochs; ++k) {
    const SymMatrix grad = obj.grad_full(x_anchor);
    const Factor g = mul(grad, anchor);
    const double eta = schedule.next_step(k, x_anchor, grad);

    u = anchor;
    for (std::size_t t = 0; t < c.m; ++t) {
      const std::size_t i = rng.index(n);
      std::fill(a.data(), a.data() + a.size(), 0.0);
      std::fill(b.data(), b.data() + b.size(), 0.0);
      obj.accumulate_factored_gradient(i, u, 1.0, a);
      obj.accumulate_factored_gradient(i, anchor, 1.0, b);
      for (std::size_t q = 0; q < dir.size(); ++q) dir.data()[q] = (a.data()[q] - b.data()[q]) + g.data()[q];
      if (c.observer) c.observer(InnerStep{k, t, i, eta, u, anchor, g, dir});
      u.axpy(-eta, dir);
    }
    anchor = u;
    x_anchor = gram(anchor);
    rec.add_grads(epoch_cost(Algorithm::SVRG, n, c.m));
    if (diverged(anchor)) rec.fail(k + 1, anchor, x_anchor);
    if (rec.record(k + 1, eta, x_anchor, &anchor, false)) break;
  }
  return rec.finish(anchor, x_anchor);
}

RunRecord run_fgd(const SampleObjective& obj, const SolverConfig& c, const Factor& u0) {
  validate(obj, c, u0.rows());
  Recorder rec(obj, c);
  Factor u = u0;
  SymMatrix x = gram(u);
  if (rec.record(0, 0.0, x, &u, true)) return rec.finish(u, x);
  for (std::size_t k = 0; k < c.epochs; ++k) {
    u.axpy(-c.eta, mul(obj.grad_full(x), u));
    x = gram(u);
    rec.add_grads(epoch_cost(Algorithm::FGD, obj.size(), c.m));
    if (diverged(u)) rec.fail(k + 1, u, x);
    if (rec.record(k + 1, c.eta, x, &u, false)) break;
  }
  return rec.finish(u, x);
}

RunRecord run_sfgd(const SampleObjective& obj, const SolverConfig& c, const Factor& u0) {
  validate(obj, c, u0.rows());
  const std::size_t n = obj.size();
  const double t0 = c.t0 > 0.0 ? c.t0 : static_cast<double>(n);
  Rng rng(c.seed);
  Recorder rec(obj, c);
  Factor u = u0;
  SymMatrix x = gram(u);
  if (rec.record(0, 0.0, x, &u, true)) return rec.finish(u, x);
  Factor d(u.rows(), u.cols());
  std::uint64_t t = 0;
  for (std::size_t k = 0; k < c.epochs; ++k) {
    double eta = c.eta;
    for (std::size_t s = 0; s < n; ++s, ++t) {
      eta = c.eta / (1.0 + static_cast<double>(t) / t0);
      std::fill(d.data(), d.data() + d.size(), 0.0);
      obj.accumulate_factored_gradient(rng.index(n), u, 1.0, d);
      u.axpy(-eta, d);
    }
    x = gram(u);
    rec.add_grads(epoch_cost(Algorithm::SFGD, n, c.m));
    if (diverged(u)) rec.fail(k + 1, u, x);
    // The reported eta is the last step of the epoch.
    if (rec.record(k + 1, eta, x, &u, false)) break;
  }
  return rec.finish(u, x);
}

RunRecord run_projgd(const SampleObjective& obj, const SolverConfig& c, const SymMatrix& x0) {
  validate(obj, c, x0.dim());
  Recorder rec(obj, c);
  SymMatrix x = x0;
  if (rec.record(0, 0.0, x, nullptr, true)) return rec.finish(Factor(), x);
  for (std::size_t k = 0; k < c.epochs; ++k) {
    SymMatrix y = x;
    y.axpy(-c.eta, obj.grad_full(x));
    if (diverged(y)) rec.fail(k + 1, Factor(), y);
    x = proj_psd(y);
    rec.add_grads(epoch_cost(Algorithm::ProjGD, obj.size(), c.m));
    if (rec.record(k + 1, c.eta, x, nullptr, false)) break;
  }
  return rec.finish(Factor(), x);
}

RunRecord run(const SampleObjective& obj, const SolverConfig& config, const Factor& u0) {
  switch (config.algorithm) {
    case Algorithm::SVRG: return run_svrg(obj, config, u0);
    case Algorithm::FGD: return run_fgd(obj, config, u0);
    case Algorithm::SFGD: return run_sfgd(obj, config, u0);
    case Algorithm::ProjGD: return run_projgd(obj, config, gram(u0));
  }
  throw InvalidArgument("unknown algorithm");
}

}  // namespace fsdp
