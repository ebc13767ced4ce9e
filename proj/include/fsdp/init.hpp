#pragma once
// Initial factors: convex warm start (I), the scaled-gradient spectral
// construction (II), random (III), and a perturbed optimum for experiments.

#include <cstddef>
#include <cstdint>

#include "fsdp/linalg.hpp"
#include "fsdp/objective.hpp"

namespace fsdp {

/// ProjGD from X = 0 for warm_epochs, then the rank-r truncated factor.
Factor init_scheme1(const SampleObjective& obj, std::size_t r, std::size_t warm_epochs, double eta);

/// X0 = Proj_psd(-grad f(0)) / ||grad f(0) - grad f(e1 e1^T)||_F, truncated to rank r.
Factor init_scheme2(const SampleObjective& obj, std::size_t r);

/// i.i.d. normal entries times scale / sqrt(p r).
Factor init_scheme3(std::size_t p, std::size_t r, double scale, std::uint64_t seed);

/// U_ref + radius * G / ||G||_F for Gaussian G.
Factor init_perturbed_optimum(const Factor& u_ref, double radius, std::uint64_t seed);

}  // namespace fsdp
