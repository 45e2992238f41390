#pragma once

/**
 * Trace confidence measures.
 *
 * Per token, confidence is the negative mean log-probability of the top-k
 * candidates; per trace we expose:
 *   mean          - average token confidence over the whole trace
 *   group series  - sliding-window means of width n (stride 1, full windows)
 *   lowest_group  - minimum of the group series
 *   bottom_q      - mean of the ceil(q * G) smallest group values
 *   tail          - mean over the final tail_tokens tokens (or last q% when
 *                   tail_fraction is set)
 *   head          - mean over the first ceil(head_fraction * N) tokens
 *
 * Traces shorter than the window produce exactly one group equal to the
 * whole-trace mean, so lowest_group is defined for every nonempty trace.
 *
 * All functions are pure and reentrant.
 */

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "deepconf/trace.hpp"

namespace deepconf::metrics {

struct MetricConfig {
  int top_k = 20;             // candidates per token entering the mean
  int window_size = 2048;     // group width n
  double bottom_fraction = 0.10;
  int tail_tokens = 2048;
  std::optional<double> tail_fraction;  // overrides tail_tokens when set
  std::optional<double> head_fraction;

  /// Throws ConfigError on out-of-range fields.
  void validate() const;
};

enum class Measure { Mean, BottomQ, LowestGroup, Tail, Head };

std::string_view measure_name(Measure m);
Measure measure_from_name(std::string_view name);  // ConfigError on unknown

struct TraceConfidence {
  double mean = 0.0;
  double bottom_q = 0.0;
  double lowest_group = 0.0;
  double tail = 0.0;
  std::optional<double> head;
  std::optional<std::vector<double>> group_series;
};

/// Entropy (nats) of the candidate distribution renormalized over the stored
/// top-k. In [0, ln k].
double token_entropy(const TokenRecord& record);

/// Negative mean of the first top_k logprobs; >= 0. ConfigError when top_k
/// exceeds the stored candidate count.
double token_confidence(const TokenRecord& record, int top_k);

/// Per-token confidence for the whole trace (kernel-backed).
std::vector<double> token_confidence_series(const Trace& trace, int top_k);

/// Sliding-window means over an existing confidence series.
std::vector<double> group_confidences_from_series(std::span<const double> series, int window);

/// Group confidence series for a trace; DomainError on empty traces.
std::vector<double> group_confidences(const Trace& trace, const MetricConfig& cfg);

TraceConfidence trace_confidence(const Trace& trace, const MetricConfig& cfg,
                                 bool keep_group_series = false);

/// Projects one measure out of a TraceConfidence. Head requires
/// head_fraction to have been configured.
double measure_value(const TraceConfidence& tc, Measure m);

}  // namespace deepconf::metrics
