#pragma once

/**
 * Core data model: per-token candidate log-probabilities, reasoning traces,
 * per-problem trace pools, and problem sets.
 *
 * All log-probabilities are natural-log (nats). Converters from other bases
 * live at the ingestion boundary only, so nothing downstream has to care.
 *
 * Types are plain values and immutable by convention once validated; they
 * can be shared freely across threads.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deepconf/answer.hpp"

namespace deepconf {

/**
 * One generated token: the top-k candidate log-probabilities at that
 * position, sorted non-increasing, with the sampled token's logprob first.
 */
struct TokenRecord {
  std::vector<double> candidate_logprobs;

  int candidate_count() const { return static_cast<int>(candidate_logprobs.size()); }

  /// Throws ValidationError naming the violated rule.
  void validate() const;
};

/// One complete (or truncated) reasoning trace for a problem.
struct Trace {
  std::string trace_id;
  std::optional<std::string> answer;  // normalized; absent => never votes
  std::optional<bool> correct;        // ground-truth label when known
  std::vector<TokenRecord> tokens;

  std::int64_t token_count() const { return static_cast<std::int64_t>(tokens.size()); }

  void validate() const;
};

/// All traces sampled for one problem; the frame every experiment resamples from.
struct TracePool {
  std::string problem_id;
  std::optional<std::string> ground_truth;  // normalized
  std::vector<Trace> traces;

  std::size_t size() const { return traces.size(); }

  /**
   * Validates every trace plus pool-level invariants: unique trace ids, and
   * `correct` labels consistent with byte-wise comparison of the normalized
   * answer against ground truth (when both are present).
   */
  void validate() const;
};

/// Named collection of pools plus free-form provenance metadata.
struct ProblemSet {
  std::string name;
  std::vector<TracePool> pools;
  std::map<std::string, std::string> metadata;

  void validate() const;
};

/**
 * Uniform sample of `size` traces without replacement, deterministic for a
 * fixed seed and identical across platforms. Sampling `pool.size()` items
 * returns a seeded permutation of the whole pool.
 */
TracePool subsample(const TracePool& pool, std::size_t size, std::uint64_t seed);

}  // namespace deepconf
