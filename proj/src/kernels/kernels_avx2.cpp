// Compiled with -mavx2 -mfma. Only reached after a CPUID check.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace sottac::kernels::detail {

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
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

void gemv_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x, double* y) {
  std::size_t r = 0;
  // Four rows at a time share the loads of x.
  for (; r + 4 <= rows; r += 4) {
    const double* w0 = w + r * cols;
    const double* w1 = w0 + cols;
    const double* w2 = w1 + cols;
    const double* w3 = w2 + cols;
    __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
    __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= cols; c += 4) {
      const __m256d vx = _mm256_loadu_pd(x + c);
      a0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + c), vx, a0);
      a1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + c), vx, a1);
      a2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + c), vx, a2);
      a3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + c), vx, a3);
    }
    // Transpose-reduce the four accumulators into one vector of row sums.
    const __m256d t0 = _mm256_hadd_pd(a0, a1);
    const __m256d t1 = _mm256_hadd_pd(a2, a3);
    __m256d sums = _mm256_add_pd(_mm256_permute2f128_pd(t0, t1, 0x20),
                                 _mm256_permute2f128_pd(t0, t1, 0x31));
    if (c < cols) {
      alignas(32) double tail[4] = {0.0, 0.0, 0.0, 0.0};
      for (; c < cols; ++c) {
        tail[0] += w0[c] * x[c];
        tail[1] += w1[c] * x[c];
        tail[2] += w2[c] * x[c];
        tail[3] += w3[c] * x[c];
      }
      sums = _mm256_add_pd(sums, _mm256_load_pd(tail));
    }
    _mm256_storeu_pd(y + r, sums);
  }
  for (; r < rows; ++r) y[r] = dot_avx2(w + r * cols, x, cols);
}

void gemv_t_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 double* y) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], w + r * cols, y, cols);
}

void ger_avx2(double a, const double* x, std::size_t rows, const double* y, std::size_t cols,
              double* w) {
  for (std::size_t r = 0; r < rows; ++r) axpy_avx2(a * x[r], y, w + r * cols, cols);
}

// exp(y) for 0 <= y <= 40: y = n ln2 + r with |r| <= ln2 / 2, degree-13
// Taylor polynomial for exp(r) (truncation below 1e-17), then scale by 2^n.
// expm1(y) for 0 <= y <= 40. Cody-Waite reduction y = n ln2 + r, Taylor
// polynomial in r. When n = 0 the constant term is dropped, so small y keeps
// full relative precision instead of cancelling in e^y - 1.
inline __m256d expm1_pd(__m256d y) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(y, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, y);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);
  // 1/k! for k = 13 down to 1; q(r) = (e^r - 1) / r.
  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
      1.0};
  __m256d q = _mm256_set1_pd(kInvFact[0]);
  for (std::size_t k = 1; k < sizeof(kInvFact) / sizeof(double); ++k)
    q = _mm256_fmadd_pd(q, r, _mm256_set1_pd(kInvFact[k]));
  const __m256d em1_r = _mm256_mul_pd(q, r);
  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m256i bits = _mm256_slli_epi64(
      _mm256_add_epi64(_mm256_cvtepi32_epi64(ni), _mm256_set1_epi64x(1023)), 52);
  const __m256d scaled = _mm256_fmsub_pd(_mm256_add_pd(em1_r, one), _mm256_castsi256_pd(bits), one);
  const __m256d n_zero = _mm256_cmp_pd(n, _mm256_setzero_pd(), _CMP_EQ_OQ);
  return _mm256_blendv_pd(scaled, em1_r, n_zero);
}

// tanh|x| = m / (m + 2) with m = expm1(2|x|); sign restored afterwards.
inline __m256d tanh_pd(__m256d x) {
  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  const __m256d ax = _mm256_andnot_pd(sign_mask, x);
  const __m256d sign = _mm256_and_pd(sign_mask, x);
  const __m256d y = _mm256_min_pd(_mm256_add_pd(ax, ax), _mm256_set1_pd(40.0));
  const __m256d m = expm1_pd(y);
  const __m256d mag = _mm256_div_pd(m, _mm256_add_pd(m, _mm256_set1_pd(2.0)));
  return _mm256_or_pd(mag, sign);
}

void bias_tanh_avx2(const double* b, double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, tanh_pd(_mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(b + i))));
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; i + k < n; ++k) buf[k] = x[i + k] + b[i + k];
    _mm256_store_pd(buf, tanh_pd(_mm256_load_pd(buf)));
    for (std::size_t k = 0; i + k < n; ++k) x[i + k] = buf[k];
  }
}

}  // namespace

const KernelTable kAvx2Table{
    Isa::Avx2, dot_avx2, axpy_avx2, scal_avx2, gemv_avx2, gemv_t_avx2, ger_avx2, bias_tanh_avx2,
};

}  // namespace sottac::kernels::detail
