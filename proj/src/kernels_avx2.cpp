// AVX2 kernel variants. This translation unit is compiled with -mavx2; the
// dispatcher only routes here after __builtin_cpu_supports("avx2") says yes.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace deepconf::kernels::avx2 {

namespace {

inline double hsum4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

inline double hmin4(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_min_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_min_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

}  // namespace

void neg_mean_head(const double* flat, std::size_t rows, int k, double* out) {
  const double inv_k = 1.0 / static_cast<double>(k);
  const std::size_t stride = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = flat + i * stride;
    double s;
    if (k >= 8) {
      __m256d acc = _mm256_loadu_pd(row);
      int j = 4;
      for (; j + 4 <= k; j += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(row + j));
      }
      s = hsum4(acc);
      for (; j < k; ++j) s += row[j];
    } else {
      s = 0.0;
      for (int j = 0; j < k; ++j) s += row[j];
    }
    out[i] = -s * inv_k;
  }
}

void window_means(const double* hi, const double* lo, std::size_t n_out, int window,
                  double* out) {
  const std::size_t w = static_cast<std::size_t>(window);
  const double inv_w = 1.0 / static_cast<double>(window);
  const __m256d vinv = _mm256_set1_pd(inv_w);
  std::size_t i = 0;
  for (; i + 4 <= n_out; i += 4) {
    const __m256d dh = _mm256_sub_pd(_mm256_loadu_pd(hi + i + w), _mm256_loadu_pd(hi + i));
    const __m256d dl = _mm256_sub_pd(_mm256_loadu_pd(lo + i + w), _mm256_loadu_pd(lo + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_add_pd(dh, dl), vinv));
  }
  for (; i < n_out; ++i) {
    out[i] = ((hi[i + w] - hi[i]) + (lo[i + w] - lo[i])) * inv_w;
  }
}

double min_value(const double* x, std::size_t n) {
  if (n < 8) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) {
      if (x[i] < m) m = x[i];
    }
    return m;
  }
  __m256d vmin = _mm256_loadu_pd(x);
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    vmin = _mm256_min_pd(vmin, _mm256_loadu_pd(x + i));
  }
  double m = hmin4(vmin);
  for (; i < n; ++i) {
    if (x[i] < m) m = x[i];
  }
  return m;
}

}  // namespace deepconf::kernels::avx2

#endif  // x86_64
