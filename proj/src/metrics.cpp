#include "deepconf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepconf/errors.hpp"
#include "deepconf/kernels.hpp"

namespace deepconf::metrics {

void MetricConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (window_size < 1) throw ConfigError("window_size must be >= 1");
  if (!(bottom_fraction > 0.0 && bottom_fraction <= 1.0)) {
    throw ConfigError("bottom_fraction must be in (0, 1]");
  }
  if (tail_tokens < 1) throw ConfigError("tail_tokens must be >= 1");
  if (tail_fraction && !(*tail_fraction > 0.0 && *tail_fraction <= 1.0)) {
    throw ConfigError("tail_fraction must be in (0, 1]");
  }
  if (head_fraction && !(*head_fraction > 0.0 && *head_fraction <= 1.0)) {
    throw ConfigError("head_fraction must be in (0, 1]");
  }
}

std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::Mean: return "mean";
    case Measure::BottomQ: return "bottom_q";
    case Measure::LowestGroup: return "lowest_group";
    case Measure::Tail: return "tail";
    case Measure::Head: return "head";
  }
  return "?";
}

Measure measure_from_name(std::string_view name) {
  if (name == "mean") return Measure::Mean;
  if (name == "bottom_q") return Measure::BottomQ;
  if (name == "lowest_group") return Measure::LowestGroup;
  if (name == "tail") return Measure::Tail;
  if (name == "head") return Measure::Head;
  throw ConfigError("unknown measure '" + std::string(name) + "'");
}

double token_entropy(const TokenRecord& record) {
  const auto& lp = record.candidate_logprobs;
  if (lp.empty()) throw DomainError("token record has no candidates");
  if (lp.size() == 1) return 0.0;
  // Renormalize over the stored candidates: p_j = exp(lp_j - logsumexp).
  const double max_lp = lp.front();  // sorted non-increasing
  double z = 0.0;
  for (double v : lp) z += std::exp(v - max_lp);
  const double lse = max_lp + std::log(z);
  double h = 0.0;
  for (double v : lp) {
    const double t = v - lse;
    h -= std::exp(t) * t;
  }
  return h < 0.0 ? 0.0 : h;
}

double token_confidence(const TokenRecord& record, int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  if (top_k > record.candidate_count()) {
    throw ConfigError("top_k " + std::to_string(top_k) + " exceeds candidate_count " +
                      std::to_string(record.candidate_count()));
  }
  double s = 0.0;
  for (int j = 0; j < top_k; ++j) s += record.candidate_logprobs[j];
  return -s / static_cast<double>(top_k);
}

std::vector<double> token_confidence_series(const Trace& trace, int top_k) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
  const std::size_t n = trace.tokens.size();
  // Flatten the first top_k logprobs of every record into a dense [n x k]
  // matrix so the kernel runs over contiguous memory.
  std::vector<double> flat(n * static_cast<std::size_t>(top_k));
  for (std::size_t i = 0; i < n; ++i) {
    const TokenRecord& r = trace.tokens[i];
    if (r.candidate_count() < top_k) {
      throw ConfigError("token " + std::to_string(i) + " of trace '" + trace.trace_id +
                        "' has " + std::to_string(r.candidate_count()) +
                        " candidates, top_k is " + std::to_string(top_k));
    }
    std::copy_n(r.candidate_logprobs.data(), top_k,
                flat.data() + i * static_cast<std::size_t>(top_k));
  }
  std::vector<double> out(n);
  if (n > 0) kernels::neg_mean_head(flat.data(), n, top_k, out.data());
  return out;
}

std::vector<double> group_confidences_from_series(std::span<const double> series, int window) {
  if (window < 1) throw ConfigError("window_size must be >= 1");
  const std::size_t n = series.size();
  if (n == 0) throw DomainError("empty confidence series");
  if (n < static_cast<std::size_t>(window)) {
    return {kernels::sum_compensated(series.data(), n) / static_cast<double>(n)};
  }
  std::vector<double> hi(n + 1);
  std::vector<double> lo(n + 1);
  kernels::prefix_sums_dd(series.data(), n, hi.data(), lo.data());
  std::vector<double> out(n - static_cast<std::size_t>(window) + 1);
  kernels::window_means(hi.data(), lo.data(), out.size(), window, out.data());
  return out;
}

std::vector<double> group_confidences(const Trace& trace, const MetricConfig& cfg) {
  cfg.validate();
  if (trace.tokens.empty()) throw DomainError("trace '" + trace.trace_id + "' has no tokens");
  const std::vector<double> series = token_confidence_series(trace, cfg.top_k);
  return group_confidences_from_series(series, cfg.window_size);
}

namespace {

std::size_t ceil_fraction_count(double fraction, std::size_t n) {
  auto m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  if (m < 1) m = 1;
  if (m > n) m = n;
  return m;
}

}  // namespace

TraceConfidence trace_confidence(const Trace& trace, const MetricConfig& cfg,
                                 bool keep_group_series) {
  cfg.validate();
  if (trace.tokens.empty()) throw DomainError("trace '" + trace.trace_id + "' has no tokens");

  const std::vector<double> series = token_confidence_series(trace, cfg.top_k);
  const std::size_t n = series.size();
  std::vector<double> groups = group_confidences_from_series(series, cfg.window_size);

  TraceConfidence tc;
  tc.mean = kernels::sum_compensated(series.data(), n) / static_cast<double>(n);
  tc.lowest_group = kernels::min_value(groups.data(), groups.size());

  const std::size_t keep = ceil_fraction_count(cfg.bottom_fraction, groups.size());
  std::vector<double> sorted(groups);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(keep - 1),
                   sorted.end());
  tc.bottom_q =
      kernels::sum_compensated(sorted.data(), keep) / static_cast<double>(keep);

  std::size_t tail_len = cfg.tail_fraction
                             ? ceil_fraction_count(*cfg.tail_fraction, n)
                             : std::min<std::size_t>(static_cast<std::size_t>(cfg.tail_tokens), n);
  tc.tail = kernels::sum_compensated(series.data() + (n - tail_len), tail_len) /
            static_cast<double>(tail_len);

  if (cfg.head_fraction) {
    const std::size_t head_len = ceil_fraction_count(*cfg.head_fraction, n);
    tc.head = kernels::sum_compensated(series.data(), head_len) / static_cast<double>(head_len);
  }

  if (keep_group_series) tc.group_series = std::move(groups);
  return tc;
}

double measure_value(const TraceConfidence& tc, Measure m) {
  switch (m) {
    case Measure::Mean: return tc.mean;
    case Measure::BottomQ: return tc.bottom_q;
    case Measure::LowestGroup: return tc.lowest_group;
    case Measure::Tail: return tc.tail;
    case Measure::Head:
      if (!tc.head) throw ConfigError("head measure requires head_fraction in MetricConfig");
      return *tc.head;
  }
  throw ConfigError("invalid measure");
}

}  // namespace deepconf::metrics
