// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include <immintrin.h>

#include "fsdp/kernels.hpp"

namespace fsdp::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four output columns share each load of the A row.
void gemm_nt_avx2(const double* a, const double* bt, double* out,
                  std::size_t rows, std::size_t inner, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* arow = a + r * inner;
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const double* b0 = bt + c * inner;
      const double* b1 = b0 + inner;
      const double* b2 = b1 + inner;
      const double* b3 = b2 + inner;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      std::size_t k = 0;
      for (; k + 4 <= inner; k += 4) {
        const __m256d av = _mm256_loadu_pd(arow + k);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + k), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + k), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + k), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + k), s3);
      }
      double t0 = hsum(s0), t1 = hsum(s1), t2 = hsum(s2), t3 = hsum(s3);
      for (; k < inner; ++k) {
        t0 += arow[k] * b0[k];
        t1 += arow[k] * b1[k];
        t2 += arow[k] * b2[k];
        t3 += arow[k] * b3[k];
      }
      double* o = out + r * cols + c;
      o[0] = t0; o[1] = t1; o[2] = t2; o[3] = t3;
    }
    for (; c < cols; ++c) out[r * cols + c] = dot_avx2(arow, bt + c * inner, inner);
  }
}

}  // namespace

const KernelSet* avx2_kernels() {
  static const KernelSet set{Isa::Avx2, "avx2", dot_avx2, axpy_avx2, gemm_nt_avx2};
  return &set;
}

}  // namespace fsdp::kernels
