#pragma once
// Dense double-precision inner-loop kernels.
//
// Every kernel has a scalar reference implementation and optional SIMD
// variants (AVX2+FMA, AVX-512F). The active set is chosen once at first use
// from the CPU feature bits; FSDP_SIMD=scalar|avx2|avx512 forces a set (a
// set the CPU cannot run falls back to the best supported one).

#include <cstddef>
#include <string_view>

namespace fsdp::kernels {

enum class Isa { Scalar, Avx2, Avx512 };

struct KernelSet {
  Isa isa;
  std::string_view name;

  /// sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  /// y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  /// out (rows x cols, row-major) = A (rows x inner) * Bt^T, Bt is cols x inner.
  void (*gemm_nt)(const double* a, const double* bt, double* out,
                  std::size_t rows, std::size_t inner, std::size_t cols);
};

const KernelSet& scalar_kernels();
/// nullptr when the variant was not compiled in.
const KernelSet* avx2_kernels();
const KernelSet* avx512_kernels();

bool cpu_supports(Isa isa);

/// The set used by the rest of the library.
const KernelSet& active();

/// Best supported set, ignoring FSDP_SIMD.
const KernelSet& best_supported();

inline double dot(const double* x, const double* y, std::size_t n) {
  return active().dot(x, y, n);
}
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void gemm_nt(const double* a, const double* bt, double* out,
                    std::size_t rows, std::size_t inner, std::size_t cols) {
  active().gemm_nt(a, bt, out, rows, inner, cols);
}

}  // namespace fsdp::kernels
