#pragma once

/**
 * Arithmetic kernels behind the confidence metrics.
 *
 * Each dispatched kernel has a scalar reference implementation plus SIMD
 * variants (AVX2 on x86-64, NEON on aarch64) selected once at runtime. The
 * environment variable DEEPCONF_KERNELS=scalar|avx2|neon overrides the
 * detected choice; tests pin backends explicitly via force_backend().
 *
 * Numeric policy: prefix sums and reductions that feed tolerance-sensitive
 * comparisons use Kahan-Babuska-Neumaier compensation, carried as a
 * (hi, lo) pair. Window sums are formed as (hi[j]-hi[i]) + (lo[j]-lo[i]),
 * which keeps rolling results within ~1e-11 of an exact recomputation even
 * for 100k-token traces.
 */

#include <cstddef>
#include <cstdint>

namespace deepconf::kernels {

enum class Backend { Scalar, Avx2, Neon };

const char* backend_name(Backend b);
bool backend_available(Backend b);

/// Backend currently used by the dispatched entry points.
Backend active_backend();

/// Pins the dispatched backend; throws ConfigError when unavailable.
void force_backend(Backend b);

/// Re-resolves from CPU detection + DEEPCONF_KERNELS (test hook).
void reset_backend();

// ---------------------------------------------------------------------------
// Dispatched kernels
// ---------------------------------------------------------------------------

/// out[i] = -(flat[i*k] + ... + flat[i*k + k-1]) / k for each of `rows` rows.
void neg_mean_head(const double* flat, std::size_t rows, int k, double* out);

/// out[i] = ((hi[i+w] - hi[i]) + (lo[i+w] - lo[i])) * (1/w), i in [0, n_out).
/// hi/lo are compensated prefix sums of length >= n_out + w.
void window_means(const double* hi, const double* lo, std::size_t n_out, int window, double* out);

/// Minimum of n values (n >= 1, values finite).
double min_value(const double* x, std::size_t n);

// Per-backend reference entry points (scalar always; others where compiled).
namespace scalar {
void neg_mean_head(const double* flat, std::size_t rows, int k, double* out);
void window_means(const double* hi, const double* lo, std::size_t n_out, int window, double* out);
double min_value(const double* x, std::size_t n);
}  // namespace scalar

// ---------------------------------------------------------------------------
// Compensated accumulation (scalar; sequential by nature)
// ---------------------------------------------------------------------------

/// Running Neumaier sum: hi carries the sum, lo the accumulated correction.
struct DdAccumulator {
  double hi = 0.0;
  double lo = 0.0;

  void add(double x) {
    const double t = hi + x;
    if ((hi >= 0 ? hi : -hi) >= (x >= 0 ? x : -x)) {
      lo += (hi - t) + x;
    } else {
      lo += (x - t) + hi;
    }
    hi = t;
  }
  void sub(double x) { add(-x); }
  double value() const { return hi + lo; }
};

/// Compensated sum of n doubles.
double sum_compensated(const double* x, std::size_t n);

/// hi/lo get n+1 entries each; hi[0] = lo[0] = 0, and hi[i]+lo[i] tracks the
/// exact sum of the first i inputs.
void prefix_sums_dd(const double* x, std::size_t n, double* hi, double* lo);

}  // namespace deepconf::kernels
