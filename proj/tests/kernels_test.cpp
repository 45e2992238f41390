#include <doctest.h>

#include <cmath>
#include <vector>

#include "deepconf/errors.hpp"
#include "deepconf/kernels.hpp"
#include "deepconf/rng.hpp"

using namespace deepconf;
namespace k = deepconf::kernels;

namespace {

std::vector<double> random_series(Rng& rng, std::size_t n, double scale = 5.0) {
  std::vector<double> xs(n);
  for (double& x : xs) x = scale * (rng.next_double() - 0.2);
  return xs;
}

/// O(N*n) reference: plain per-window sums, no prefix reuse.
std::vector<double> brute_window_means(const std::vector<double>& xs, int w) {
  std::vector<double> out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(w) <= xs.size(); ++i) {
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += xs[i + static_cast<std::size_t>(j)];
    out.push_back(s / w);
  }
  return out;
}

struct BackendGuard {
  ~BackendGuard() { k::reset_backend(); }
};

std::vector<k::Backend> available_backends() {
  std::vector<k::Backend> out{k::Backend::Scalar};
  if (k::backend_available(k::Backend::Avx2)) out.push_back(k::Backend::Avx2);
  if (k::backend_available(k::Backend::Neon)) out.push_back(k::Backend::Neon);
  return out;
}

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("compensated prefix window means track a brute-force recomputation") {
  Rng rng(42);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 1 + rng.next_below(400);
    const int w = 1 + static_cast<int>(rng.next_below(std::min<std::uint64_t>(n, 64)));
    const auto xs = random_series(rng, n);
    std::vector<double> hi(n + 1), lo(n + 1);
    k::prefix_sums_dd(xs.data(), n, hi.data(), lo.data());
    std::vector<double> got(n - static_cast<std::size_t>(w) + 1);
    k::scalar::window_means(hi.data(), lo.data(), got.size(), w, got.data());
    const auto want = brute_window_means(xs, w);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) <= 1e-9);
    }
  }
}

TEST_CASE("rolling drift stays under 1e-9 on a 200k-token stream") {
  Rng rng(7);
  const std::size_t n = 200000;
  const int w = 2048;
  std::vector<double> xs(n);
  for (double& x : xs) x = 40.0 * rng.next_double();  // worst-case magnitudes
  std::vector<double> hi(n + 1), lo(n + 1);
  k::prefix_sums_dd(xs.data(), n, hi.data(), lo.data());
  std::vector<double> means(n - w + 1);
  k::scalar::window_means(hi.data(), lo.data(), means.size(), w, means.data());
  // Spot-check against exact per-window sums at scattered positions.
  for (std::size_t i = 0; i < means.size(); i += 9973) {
    double s = 0.0;
    for (int j = 0; j < w; ++j) s += xs[i + static_cast<std::size_t>(j)];
    CHECK(std::abs(means[i] - s / w) <= 1e-9);
  }
}

TEST_CASE("every available backend agrees with the scalar reference") {
  BackendGuard guard;
  Rng rng(99);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t rows = 1 + rng.next_below(200);
    const int kk = 1 + static_cast<int>(rng.next_below(24));
    std::vector<double> flat(rows * static_cast<std::size_t>(kk));
    for (double& v : flat) v = -8.0 * rng.next_double();

    const std::size_t n = 1 + rng.next_below(300);
    const int w = 1 + static_cast<int>(rng.next_below(std::min<std::uint64_t>(n, 48)));
    const auto xs = random_series(rng, n);
    std::vector<double> hi(n + 1), lo(n + 1);
    k::prefix_sums_dd(xs.data(), n, hi.data(), lo.data());
    const std::size_t n_out = n - static_cast<std::size_t>(w) + 1;

    std::vector<double> conf_ref(rows), means_ref(n_out);
    k::scalar::neg_mean_head(flat.data(), rows, kk, conf_ref.data());
    k::scalar::window_means(hi.data(), lo.data(), n_out, w, means_ref.data());
    const double min_ref = k::scalar::min_value(xs.data(), n);

    for (k::Backend b : available_backends()) {
      k::force_backend(b);
      std::vector<double> conf(rows), means(n_out);
      k::neg_mean_head(flat.data(), rows, kk, conf.data());
      k::window_means(hi.data(), lo.data(), n_out, w, means.data());
      for (std::size_t i = 0; i < rows; ++i) {
        CHECK(std::abs(conf[i] - conf_ref[i]) <= 1e-12);
      }
      // Same elementwise operations: results are identical, not just close.
      for (std::size_t i = 0; i < n_out; ++i) {
        CHECK(means[i] == means_ref[i]);
      }
      CHECK(k::min_value(xs.data(), n) == min_ref);
    }
  }
}

TEST_CASE("sum_compensated matches a long-double reference") {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rng.next_below(5000);
    const auto xs = random_series(rng, n, 30.0);
    long double want = 0.0L;
    for (double x : xs) want += x;
    CHECK(std::abs(k::sum_compensated(xs.data(), n) - static_cast<double>(want)) <= 1e-10);
  }
}

TEST_CASE("backend selection is sticky and validated") {
  BackendGuard guard;
  k::force_backend(k::Backend::Scalar);
  CHECK(k::active_backend() == k::Backend::Scalar);
  CHECK(k::backend_available(k::Backend::Scalar));
  if (!k::backend_available(k::Backend::Neon)) {
    CHECK_THROWS_AS(k::force_backend(k::Backend::Neon), ConfigError);
  }
  k::reset_backend();
  CHECK(k::backend_available(k::active_backend()));
}

TEST_SUITE_END();
