#pragma once

/**
 * Confidence-gated online generation with warmup calibration and adaptive
 * consensus stopping.
 *
 * One run:
 *   1. n_init warmup traces run to completion; the stopping threshold s is
 *      the minimum confidence among the top-eta% warmup traces (lowest-group
 *      confidence throughout).
 *   2. Warmup traces with confidence >= s vote (weight = confidence); the
 *      rest still pay their tokens.
 *   3. Before each further trace, if adaptive and the weighted consensus
 *      ratio >= tau, generation halts. Otherwise the next trace streams
 *      through the gate at threshold s: a gated trace contributes its
 *      partial tokens and no vote; a completed trace votes with its
 *      lowest-group confidence.
 *   4. Generation stops at the trace budget; the answer is the weighted
 *      vote winner.
 *
 * A run is sequential by definition; independent runs may execute
 * concurrently with per-run state and seeds.
 */

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "deepconf/errors.hpp"
#include "deepconf/gate.hpp"
#include "deepconf/metrics.hpp"
#include "deepconf/trace.hpp"

namespace deepconf::online {

struct OnlineConfig {
  int n_init = 16;
  double eta_percent = 10.0;  // 10 = aggressive filtering, 90 = conservative
  double tau = 0.95;          // consensus threshold
  int budget = 512;           // max traces including warmup
  metrics::MetricConfig metric_cfg;
  gate::GateConfig gate_cfg;  // threshold is overwritten by the calibrated s
  bool adaptive = true;       // false = budget-only baseline (gate still active)
  bool strict_empty_vote = false;  // error instead of warmup-fallback voting

  void validate() const;
};

struct TraceCost {
  std::string trace_id;
  std::int64_t tokens = 0;
  bool gated = false;
  bool voted = false;
};

struct OnlineOutcome {
  std::string final_answer;
  std::int64_t total_tokens = 0;
  int traces_started = 0;
  int traces_completed = 0;
  int traces_gated = 0;
  bool stopped_by_consensus = false;
  double threshold_s = 0.0;
  std::set<std::string> kept_trace_ids;
  bool warmup_fallback = false;        // vote fell back to unfiltered warmup
  std::vector<TraceCost> ledger;       // per-trace accounting, draw order
};

/// Aborted live run; carries whatever accounting had accumulated.
class RunAbortError : public Error {
public:
  RunAbortError(const std::string& msg, OnlineOutcome partial_outcome)
      : Error(msg), partial(std::move(partial_outcome)) {}
  OnlineOutcome partial;
};

/**
 * Stopping threshold from warmup confidences: rank descending, keep the top
 * max(1, round-half-up(eta% of count)), return the minimum of the kept set.
 * DomainError on an empty list.
 */
double warmup_threshold(std::span<const double> confidences, double eta_percent);

/**
 * Where the engine obtains traces. Warmup draws pass gate == nullptr (run
 * to completion); later draws carry the calibrated gate. A gated result
 * holds only the tokens produced before the stop and no answer.
 */
class TraceSource {
public:
  struct Drawn {
    Trace trace;
    bool gated = false;
  };

  virtual ~TraceSource() = default;
  virtual std::optional<Drawn> next(const gate::GateConfig* g) = 0;
};

/// The seeded order in which run_online consumes pool traces (exposed so
/// mocks and tests can reproduce it).
std::vector<std::size_t> draw_order(std::size_t pool_size, std::uint64_t seed);

/// Simulated run over a pre-generated pool. BoundsError when the pool holds
/// fewer than cfg.budget traces.
OnlineOutcome run_online(const TracePool& pool, const OnlineConfig& cfg, std::uint64_t seed);

/// The same state machine over any source (live sessions, mocks).
/// Source failures surface as RunAbortError with partial accounting.
OnlineOutcome run_with_source(TraceSource& source, const OnlineConfig& cfg);

}  // namespace deepconf::online
