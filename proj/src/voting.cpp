#include "deepconf/voting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "deepconf/errors.hpp"

namespace deepconf::voting {

std::size_t keep_count(std::size_t n, double eta_percent) {
  if (!(eta_percent > 0.0 && eta_percent <= 100.0)) {
    throw ConfigError("eta_percent must be in (0, 100]");
  }
  const double exact = eta_percent * static_cast<double>(n) / 100.0;
  auto m = static_cast<std::size_t>(std::floor(exact + 0.5));
  if (m < 1) m = 1;
  if (m > n) m = n;
  return m;
}

namespace {

VoteResult tally_and_pick(std::span<const Ballot> ballots, bool unit_weights) {
  VoteResult r;
  for (const Ballot& b : ballots) {
    r.tally[b.answer] += unit_weights ? 1.0 : b.weight;
    r.kept_trace_ids.insert(b.trace_id);
  }
  double total = 0.0;
  for (const auto& [answer, weight] : r.tally) total += weight;
  // std::map iterates answers in ascending order, so taking the first
  // strict maximum implements the lexicographic tie-break.
  const std::string* best = nullptr;
  double best_weight = -1.0;
  for (const auto& [answer, weight] : r.tally) {
    if (weight > best_weight) {
      best_weight = weight;
      best = &answer;
    }
  }
  r.winner = *best;
  r.consensus_ratio = best_weight / total;
  return r;
}

}  // namespace

VoteResult majority_vote(std::span<const Ballot> ballots) {
  if (ballots.empty()) throw EmptyVoteError("majority_vote: no answerable ballots");
  return tally_and_pick(ballots, /*unit_weights=*/true);
}

VoteResult weighted_vote(std::span<const Ballot> ballots) {
  if (ballots.empty()) throw EmptyVoteError("weighted_vote: no answerable ballots");
  double total = 0.0;
  for (const Ballot& b : ballots) {
    if (!(b.weight >= 0.0) || !std::isfinite(b.weight)) {
      throw ValidationError("ballot '" + b.trace_id + "' has invalid weight");
    }
    total += b.weight;
  }
  // All-zero weights carry no signal; degrade to an unweighted vote instead
  // of dividing by a zero tally.
  return tally_and_pick(ballots, /*unit_weights=*/total == 0.0);
}

std::vector<Ballot> filter_top_eta(std::span<const Ballot> ballots, double eta_percent) {
  if (ballots.empty()) throw EmptyVoteError("filter_top_eta: no ballots");
  const std::size_t m = keep_count(ballots.size(), eta_percent);

  std::vector<std::size_t> order(ballots.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ballots[a].confidence != ballots[b].confidence) {
      return ballots[a].confidence > ballots[b].confidence;
    }
    if (ballots[a].trace_id != ballots[b].trace_id) {
      return ballots[a].trace_id < ballots[b].trace_id;
    }
    return a < b;
  });
  order.resize(m);
  std::sort(order.begin(), order.end());  // restore original order among kept

  std::vector<Ballot> kept;
  kept.reserve(m);
  for (std::size_t i : order) kept.push_back(ballots[i]);
  return kept;
}

VoteResult offline_deepconf(std::span<const Trace> traces, const metrics::MetricConfig& cfg,
                            metrics::Measure measure, double eta_percent,
                            bool unit_weights_after_filter) {
  std::vector<Ballot> ballots;
  ballots.reserve(traces.size());
  for (const Trace& t : traces) {
    if (!t.answer.has_value()) continue;  // answerless traces never vote
    const double conf = metrics::measure_value(metrics::trace_confidence(t, cfg), measure);
    ballots.push_back(Ballot{*t.answer, conf, t.trace_id, conf});
  }
  if (ballots.empty()) throw EmptyVoteError("offline_deepconf: no answerable traces");

  std::vector<Ballot> kept = filter_top_eta(ballots, eta_percent);
  if (unit_weights_after_filter) {
    for (Ballot& b : kept) b.weight = 1.0;
  }
  return weighted_vote(kept);
}

}  // namespace deepconf::voting
