#include "deepconf/kernels.hpp"

#include <cstdlib>
#include <string>

#include "deepconf/errors.hpp"

namespace deepconf::kernels {

// Defined in kernels_avx2.cpp / kernels_neon.cpp when compiled for the arch.
namespace avx2 {
void neg_mean_head(const double* flat, std::size_t rows, int k, double* out);
void window_means(const double* hi, const double* lo, std::size_t n_out, int window, double* out);
double min_value(const double* x, std::size_t n);
}  // namespace avx2
namespace neon {
void neg_mean_head(const double* flat, std::size_t rows, int k, double* out);
void window_means(const double* hi, const double* lo, std::size_t n_out, int window, double* out);
double min_value(const double* x, std::size_t n);
}  // namespace neon

// ---------------------------------------------------------------------------
// Scalar reference kernels
// ---------------------------------------------------------------------------

namespace scalar {

void neg_mean_head(const double* flat, std::size_t rows, int k, double* out) {
  const double inv_k = 1.0 / static_cast<double>(k);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = flat + i * static_cast<std::size_t>(k);
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += row[j];
    out[i] = -s * inv_k;
  }
}

void window_means(const double* hi, const double* lo, std::size_t n_out, int window,
                  double* out) {
  const std::size_t w = static_cast<std::size_t>(window);
  const double inv_w = 1.0 / static_cast<double>(window);
  for (std::size_t i = 0; i < n_out; ++i) {
    out[i] = ((hi[i + w] - hi[i]) + (lo[i + w] - lo[i])) * inv_w;
  }
}

double min_value(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (x[i] < m) m = x[i];
  }
  return m;
}

}  // namespace scalar

// ---------------------------------------------------------------------------
// Backend resolution + dispatch
// ---------------------------------------------------------------------------

bool backend_available(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::Neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "?";
}

namespace {

Backend detect_backend() {
  if (const char* env = std::getenv("DEEPCONF_KERNELS")) {
    const std::string want(env);
    Backend b;
    if (want == "scalar") {
      b = Backend::Scalar;
    } else if (want == "avx2") {
      b = Backend::Avx2;
    } else if (want == "neon") {
      b = Backend::Neon;
    } else {
      throw ConfigError("DEEPCONF_KERNELS must be scalar|avx2|neon, got '" + want + "'");
    }
    if (!backend_available(b)) {
      throw ConfigError(std::string("requested kernel backend unavailable: ") + backend_name(b));
    }
    return b;
  }
  if (backend_available(Backend::Avx2)) return Backend::Avx2;
  if (backend_available(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

Backend& backend_slot() {
  static Backend b = detect_backend();
  return b;
}

}  // namespace

Backend active_backend() { return backend_slot(); }

void force_backend(Backend b) {
  if (!backend_available(b)) {
    throw ConfigError(std::string("kernel backend unavailable: ") + backend_name(b));
  }
  backend_slot() = b;
}

void reset_backend() { backend_slot() = detect_backend(); }

void neg_mean_head(const double* flat, std::size_t rows, int k, double* out) {
  switch (active_backend()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::Avx2: avx2::neg_mean_head(flat, rows, k, out); return;
#endif
#if defined(__aarch64__)
    case Backend::Neon: neon::neg_mean_head(flat, rows, k, out); return;
#endif
    default: scalar::neg_mean_head(flat, rows, k, out); return;
  }
}

void window_means(const double* hi, const double* lo, std::size_t n_out, int window,
                  double* out) {
  switch (active_backend()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::Avx2: avx2::window_means(hi, lo, n_out, window, out); return;
#endif
#if defined(__aarch64__)
    case Backend::Neon: neon::window_means(hi, lo, n_out, window, out); return;
#endif
    default: scalar::window_means(hi, lo, n_out, window, out); return;
  }
}

double min_value(const double* x, std::size_t n) {
  switch (active_backend()) {
#if defined(__x86_64__) || defined(_M_X64)
    case Backend::Avx2: return avx2::min_value(x, n);
#endif
#if defined(__aarch64__)
    case Backend::Neon: return neon::min_value(x, n);
#endif
    default: return scalar::min_value(x, n);
  }
}

// ---------------------------------------------------------------------------
// Compensated accumulation
// ---------------------------------------------------------------------------

double sum_compensated(const double* x, std::size_t n) {
  DdAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(x[i]);
  return acc.value();
}

void prefix_sums_dd(const double* x, std::size_t n, double* hi, double* lo) {
  DdAccumulator acc;
  hi[0] = 0.0;
  lo[0] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc.add(x[i]);
    hi[i + 1] = acc.hi;
    lo[i + 1] = acc.lo;
  }
}

}  // namespace deepconf::kernels
