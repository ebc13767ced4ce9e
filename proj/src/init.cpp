#include "fsdp/init.hpp"

#include <cmath>

#include "fsdp/errors.hpp"
#include "fsdp/rng.hpp"
#include "fsdp/solvers.hpp"

namespace fsdp {

Factor init_scheme1(const SampleObjective& obj, std::size_t r, std::size_t warm_epochs, double eta) {
  if (warm_epochs == 0) throw InvalidArgument("init_scheme1: warm_epochs must be >= 1");
  SolverConfig c;
  c.algorithm = Algorithm::ProjGD;
  c.eta = eta;
  c.epochs = warm_epochs;
  c.eval_every = warm_epochs;
  const RunRecord rec = run_projgd(obj, c, SymMatrix(obj.dim()));
  return truncated_approx(rec.final_x, r).factor;
}

Factor init_scheme2(const SampleObjective& obj, std::size_t r) {
  const std::size_t p = obj.dim();
  const SymMatrix g0 = obj.grad_full(SymMatrix(p));
  SymMatrix e1(p);
  e1.set(0, 0, 1.0);
  const double denom = frob_norm(g0 - obj.grad_full(e1));
  if (!(denom > 1e-14)) throw DegenerateCurvature("init_scheme2: grad f(0) - grad f(e1 e1^T) vanishes");
  SymMatrix x0 = proj_psd(-1.0 * g0);
  x0 *= 1.0 / denom;
  return truncated_approx(x0, r).factor;
}

Factor init_scheme3(std::size_t p, std::size_t r, double scale, std::uint64_t seed) {
  if (!(scale > 0.0)) throw InvalidArgument("init_scheme3: scale must be positive");
  if (p == 0 || r == 0) throw InvalidArgument("init_scheme3: empty shape");
  Rng rng(seed);
  const double s = scale / std::sqrt(static_cast<double>(p * r));
  Factor u(p, r);
  for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] = s * rng.normal();
  return u;
}

Factor init_perturbed_optimum(const Factor& u_ref, double radius, std::uint64_t seed) {
  if (!(radius >= 0.0)) throw InvalidArgument("init_perturbed_optimum: radius must be >= 0");
  if (radius == 0.0) return u_ref;
  Rng rng(seed);
  Factor g(u_ref.rows(), u_ref.cols());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = rng.normal();
  Factor u = u_ref;
  u.axpy(radius / frob_norm(g), g);
  return u;
}

}  // namespace fsdp
