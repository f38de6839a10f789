#include <immintrin.h>

#include "avx2_entry.hpp"

namespace supsup::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

inline __m256d load_mask4(const std::uint8_t* m) {
  int packed;
  __builtin_memcpy(&packed, m, 4);
  __m128i bytes = _mm_cvtsi32_si128(packed);
  __m128i ints = _mm_cvtepu8_epi32(bytes);
  return _mm256_cvtepi32_pd(ints);
}

// 4 x 8 register tile of C. `a_at(r, p)` yields the scalar multiplier for
// tile row r at reduction step p; `b_row(p)` points at 8 contiguous B values.
template <class AAt, class BRow>
inline void tile4x8(AAt a_at, BRow b_row, std::size_t steps, double* c, std::size_t ldc,
                    bool accumulate) {
  __m256d c00, c01, c10, c11, c20, c21, c30, c31;
  if (accumulate) {
    c00 = _mm256_loadu_pd(c);
    c01 = _mm256_loadu_pd(c + 4);
    c10 = _mm256_loadu_pd(c + ldc);
    c11 = _mm256_loadu_pd(c + ldc + 4);
    c20 = _mm256_loadu_pd(c + 2 * ldc);
    c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
    c30 = _mm256_loadu_pd(c + 3 * ldc);
    c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  } else {
    c00 = c01 = c10 = c11 = c20 = c21 = c30 = c31 = _mm256_setzero_pd();
  }
  for (std::size_t p = 0; p < steps; ++p) {
    const double* bp = b_row(p);
    const __m256d b0 = _mm256_loadu_pd(bp);
    const __m256d b1 = _mm256_loadu_pd(bp + 4);
    __m256d a = _mm256_broadcast_sd(a_at(0, p));
    c00 = _mm256_fmadd_pd(a, b0, c00);
    c01 = _mm256_fmadd_pd(a, b1, c01);
    a = _mm256_broadcast_sd(a_at(1, p));
    c10 = _mm256_fmadd_pd(a, b0, c10);
    c11 = _mm256_fmadd_pd(a, b1, c11);
    a = _mm256_broadcast_sd(a_at(2, p));
    c20 = _mm256_fmadd_pd(a, b0, c20);
    c21 = _mm256_fmadd_pd(a, b1, c21);
    a = _mm256_broadcast_sd(a_at(3, p));
    c30 = _mm256_fmadd_pd(a, b0, c30);
    c31 = _mm256_fmadd_pd(a, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// Single output row, 4 columns per vector; handles the row/column fringes.
template <class AAt, class BRow>
inline void row_fringe(AAt a_at, BRow b_row, std::size_t steps, double* c, std::size_t j0,
                       std::size_t j1, bool accumulate) {
  std::size_t j = j0;
  for (; j + 4 <= j1; j += 4) {
    __m256d acc = accumulate ? _mm256_loadu_pd(c + j) : _mm256_setzero_pd();
    for (std::size_t p = 0; p < steps; ++p)
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a_at(p)), _mm256_loadu_pd(b_row(p) + j), acc);
    _mm256_storeu_pd(c + j, acc);
  }
  for (; j < j1; ++j) {
    double acc = accumulate ? c[j] : 0.0;
    for (std::size_t p = 0; p < steps; ++p) acc += *a_at(p) * b_row(p)[j];
    c[j] = acc;
  }
}

}  // namespace

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n, bool accumulate) {
  const std::size_t m4 = m - m % 4;
  const std::size_t n8 = n - n % 8;
  for (std::size_t i = 0; i < m4; i += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      tile4x8([&](std::size_t r, std::size_t p) { return a + (i + r) * k + p; },
              [&](std::size_t p) { return b + p * n + j; }, k, c + i * n + j, n, accumulate);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      row_fringe([&](std::size_t p) { return a + (i + r) * k + p; },
                 [&](std::size_t p) { return b + p * n; }, k, c + (i + r) * n, n8, n,
                 accumulate);
    }
  }
  for (std::size_t i = m4; i < m; ++i) {
    row_fringe([&](std::size_t p) { return a + i * k + p; },
               [&](std::size_t p) { return b + p * n; }, k, c + i * n, 0, n, accumulate);
  }
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  // Output rows are indexed by the columns of A; the reduction runs over A's rows.
  const std::size_t k4 = k - k % 4;
  const std::size_t n8 = n - n % 8;
  for (std::size_t p = 0; p < k4; p += 4) {
    for (std::size_t j = 0; j < n8; j += 8) {
      tile4x8([&](std::size_t r, std::size_t i) { return a + i * k + p + r; },
              [&](std::size_t i) { return b + i * n + j; }, m, c + p * n + j, n, false);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      row_fringe([&](std::size_t i) { return a + i * k + p + r; },
                 [&](std::size_t i) { return b + i * n; }, m, c + (p + r) * n, n8, n, false);
    }
  }
  for (std::size_t p = k4; p < k; ++p) {
    row_fringe([&](std::size_t i) { return a + i * k + p; },
               [&](std::size_t i) { return b + i * n; }, m, c + p * n, 0, n, false);
  }
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  const std::size_t n4 = n - n % 4;
  const std::size_t k4 = k - k % 4;
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * n;
    std::size_t p = 0;
    for (; p < k4; p += 4) {
      const double* b0 = b + p * n;
      const double* b1 = b0 + n;
      const double* b2 = b1 + n;
      const double* b3 = b2 + n;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      for (std::size_t j = 0; j < n4; j += 4) {
        const __m256d av = _mm256_loadu_pd(ai + j);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + j), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + j), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + j), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + j), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (std::size_t j = n4; j < n; ++j) {
        r0 += ai[j] * b0[j];
        r1 += ai[j] * b1[j];
        r2 += ai[j] * b2[j];
        r3 += ai[j] * b3[j];
      }
      c[i * k + p] = r0;
      c[i * k + p + 1] = r1;
      c[i * k + p + 2] = r2;
      c[i * k + p + 3] = r3;
    }
    for (; p < k; ++p) c[i * k + p] = dot(ai, b + p * n, n);
  }
}

void hadamard(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_mask(double alpha, const std::uint8_t* m, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, load_mask4(m + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * static_cast<double>(m[i]);
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
  }
  for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double masked_sum(const double* a, const std::uint8_t* m, std::size_t n) {
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), load_mask4(m + i), s);
  double r = hsum(s);
  for (; i < n; ++i)
    if (m[i]) r += a[i];
  return r;
}

void rmsprop(double* param, double* sq, const double* grad, std::size_t n, double lr,
             double decay, double eps) {
  const __m256d dv = _mm256_set1_pd(decay);
  const __m256d omd = _mm256_set1_pd(1.0 - decay);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d ev = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    __m256d v = _mm256_mul_pd(dv, _mm256_loadu_pd(sq + i));
    v = _mm256_add_pd(v, _mm256_mul_pd(omd, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(sq + i, v);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, g), _mm256_add_pd(_mm256_sqrt_pd(v), ev));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    sq[i] = decay * sq[i] + (1.0 - decay) * g * g;
    param[i] -= lr * g / (__builtin_sqrt(sq[i]) + eps);
  }
}

}  // namespace supsup::kernels::avx2
