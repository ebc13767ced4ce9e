// Compiled with -mavx512f; only reached after a runtime CPU check.
#include <immintrin.h>

#include "fsdp/kernels.hpp"

namespace fsdp::kernels {
namespace {

double dot_avx512(const double* x, const double* y, std::size_t n) {
  __m512d acc0 = _mm512_setzero_pd();
  __m512d acc1 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), acc0);
    acc1 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i + 8), _mm512_loadu_pd(y + i + 8), acc1);
  }
  if (i + 8 <= n) {
    acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), acc0);
    i += 8;
  }
  if (i < n) {
    const __mmask8 m = static_cast<__mmask8>((1u << (n - i)) - 1u);
    acc1 = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(m, x + i), _mm512_maskz_loadu_pd(m, y + i), acc1);
  }
  return _mm512_reduce_add_pd(_mm512_add_pd(acc0, acc1));
}

void axpy_avx512(double alpha, const double* x, double* y, std::size_t n) {
  const __m512d a = _mm512_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(a, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  }
  if (i < n) {
    const __mmask8 m = static_cast<__mmask8>((1u << (n - i)) - 1u);
    const __m512d yv = _mm512_maskz_loadu_pd(m, y + i);
    _mm512_mask_storeu_pd(y + i, m, _mm512_fmadd_pd(a, _mm512_maskz_loadu_pd(m, x + i), yv));
  }
}

void gemm_nt_avx512(const double* a, const double* bt, double* out,
                    std::size_t rows, std::size_t inner, std::size_t cols) {
  const std::size_t tail = inner % 8;
  const __mmask8 tm = static_cast<__mmask8>((1u << tail) - 1u);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* arow = a + r * inner;
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const double* b0 = bt + c * inner;
      const double* b1 = b0 + inner;
      const double* b2 = b1 + inner;
      const double* b3 = b2 + inner;
      __m512d s0 = _mm512_setzero_pd(), s1 = _mm512_setzero_pd();
      __m512d s2 = _mm512_setzero_pd(), s3 = _mm512_setzero_pd();
      std::size_t k = 0;
      for (; k + 8 <= inner; k += 8) {
        const __m512d av = _mm512_loadu_pd(arow + k);
        s0 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b0 + k), s0);
        s1 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b1 + k), s1);
        s2 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b2 + k), s2);
        s3 = _mm512_fmadd_pd(av, _mm512_loadu_pd(b3 + k), s3);
      }
      if (tail) {
        const __m512d av = _mm512_maskz_loadu_pd(tm, arow + k);
        s0 = _mm512_fmadd_pd(av, _mm512_maskz_loadu_pd(tm, b0 + k), s0);
        s1 = _mm512_fmadd_pd(av, _mm512_maskz_loadu_pd(tm, b1 + k), s1);
        s2 = _mm512_fmadd_pd(av, _mm512_maskz_loadu_pd(tm, b2 + k), s2);
        s3 = _mm512_fmadd_pd(av, _mm512_maskz_loadu_pd(tm, b3 + k), s3);
      }
      double* o = out + r * cols + c;
      o[0] = _mm512_reduce_add_pd(s0);
      o[1] = _mm512_reduce_add_pd(s1);
      o[2] = _mm512_reduce_add_pd(s2);
      o[3] = _mm512_reduce_add_pd(s3);
    }
    for (; c < cols; ++c) out[r * cols + c] = dot_avx512(arow, bt + c * inner, inner);
  }
}

}  // namespace

const KernelSet* avx512_kernels() {
  static const KernelSet set{Isa::Avx512, "avx512", dot_avx512, axpy_avx512, gemm_nt_avx512};
  return &set;
}

}  // namespace fsdp::kernels
