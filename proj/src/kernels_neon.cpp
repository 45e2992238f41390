// NEON kernel variants for aarch64. Mirrors kernels_avx2.cpp with 2-wide
// float64x2 lanes; NEON is baseline on aarch64 so no runtime feature check
// is needed beyond the architecture itself.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cstddef>

namespace deepconf::kernels::neon {

void neg_mean_head(const double* flat, std::size_t rows, int k, double* out) {
  const double inv_k = 1.0 / static_cast<double>(k);
  const std::size_t stride = static_cast<std::size_t>(k);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = flat + i * stride;
    double s;
    if (k >= 4) {
      float64x2_t acc = vld1q_f64(row);
      int j = 2;
      for (; j + 2 <= k; j += 2) {
        acc = vaddq_f64(acc, vld1q_f64(row + j));
      }
      s = vaddvq_f64(acc);
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
  const float64x2_t vinv = vdupq_n_f64(inv_w);
  std::size_t i = 0;
  for (; i + 2 <= n_out; i += 2) {
    const float64x2_t dh = vsubq_f64(vld1q_f64(hi + i + w), vld1q_f64(hi + i));
    const float64x2_t dl = vsubq_f64(vld1q_f64(lo + i + w), vld1q_f64(lo + i));
    vst1q_f64(out + i, vmulq_f64(vaddq_f64(dh, dl), vinv));
  }
  for (; i < n_out; ++i) {
    out[i] = ((hi[i + w] - hi[i]) + (lo[i + w] - lo[i])) * inv_w;
  }
}

double min_value(const double* x, std::size_t n) {
  if (n < 4) {
    double m = x[0];
    for (std::size_t i = 1; i < n; ++i) {
      if (x[i] < m) m = x[i];
    }
    return m;
  }
  float64x2_t vmin = vld1q_f64(x);
  std::size_t i = 2;
  for (; i + 2 <= n; i += 2) {
    vmin = vminq_f64(vmin, vld1q_f64(x + i));
  }
  double m = vminvq_f64(vmin);
  for (; i < n; ++i) {
    if (x[i] < m) m = x[i];
  }
  return m;
}

}  // namespace deepconf::kernels::neon

#endif  // __aarch64__
