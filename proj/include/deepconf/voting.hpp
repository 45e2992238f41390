#pragma once

/**
 * Answer aggregation: plain majority voting, confidence-weighted voting,
 * top-eta confidence filtering, and the combined filter-then-weigh pipeline.
 *
 * Determinism rules (the 64-repeat protocol depends on them):
 *   - vote ties break toward the lexicographically smallest answer string;
 *   - filter ties on equal confidence break by ascending trace_id;
 *   - ballot order never affects the winner or the tally.
 */

#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "deepconf/metrics.hpp"
#include "deepconf/trace.hpp"

namespace deepconf::voting {

/// One trace's contribution to a vote.
struct Ballot {
  std::string answer;
  double weight = 1.0;      // >= 0
  std::string trace_id;
  double confidence = 0.0;  // trace-level score used for filtering/weighting
};

struct VoteResult {
  std::string winner;
  std::map<std::string, double> tally;
  double consensus_ratio = 0.0;  // winner share of total tally, in (0, 1]
  std::set<std::string> kept_trace_ids;
};

/// Number of ballots kept by a top-eta filter: max(1, round-half-up of
/// eta% of n). keep_count(512, 10) == 51.
std::size_t keep_count(std::size_t n, double eta_percent);

/// Unweighted vote; every ballot counts 1. EmptyVoteError when no ballots.
VoteResult majority_vote(std::span<const Ballot> ballots);

/// Weighted vote. ValidationError on a negative or non-finite weight. If
/// every weight is zero the tally carries no signal and the vote falls back
/// to unit weights.
VoteResult weighted_vote(std::span<const Ballot> ballots);

/// The keep_count(n, eta) highest-confidence ballots, in their original
/// order. ConfigError when eta is outside (0, 100].
std::vector<Ballot> filter_top_eta(std::span<const Ballot> ballots, double eta_percent);

/**
 * Offline pipeline: score every answerable trace with `measure`, keep the
 * top-eta percent, weighted-vote the survivors. Traces without an answer
 * are dropped before filtering. `unit_weights_after_filter` replicates the
 * filter-then-majority ablation.
 */
VoteResult offline_deepconf(std::span<const Trace> traces, const metrics::MetricConfig& cfg,
                            metrics::Measure measure, double eta_percent,
                            bool unit_weights_after_filter = false);

}  // namespace deepconf::voting
