#include "fsdp/kernels.hpp"

namespace fsdp::kernels {
namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nt_scalar(const double* a, const double* bt, double* out,
                    std::size_t rows, std::size_t inner, std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* arow = a + i * inner;
    for (std::size_t j = 0; j < cols; ++j) {
      out[i * cols + j] = dot_scalar(arow, bt + j * inner, inner);
    }
  }
}

}  // namespace

const KernelSet& scalar_kernels() {
  static const KernelSet set{Isa::Scalar, "scalar", dot_scalar, axpy_scalar,
                             gemm_nt_scalar};
  return set;
}

}  // namespace fsdp::kernels
