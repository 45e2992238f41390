#include "deepconf/online.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "deepconf/rng.hpp"
#include "deepconf/voting.hpp"

namespace deepconf::online {

void OnlineConfig::validate() const {
  if (n_init < 1) throw ConfigError("n_init must be >= 1");
  if (budget < 1) throw ConfigError("budget must be >= 1");
  if (n_init > budget) throw ConfigError("n_init must not exceed budget");
  if (!(eta_percent > 0.0 && eta_percent <= 100.0)) {
    throw ConfigError("eta_percent must be in (0, 100]");
  }
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must be in (0, 1]");
  metric_cfg.validate();
  gate_cfg.validate();
}

double warmup_threshold(std::span<const double> confidences, double eta_percent) {
  if (confidences.empty()) throw DomainError("warmup_threshold: no confidences");
  const std::size_t m = voting::keep_count(confidences.size(), eta_percent);
  std::vector<double> sorted(confidences.begin(), confidences.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted[m - 1];
}

std::vector<std::size_t> draw_order(std::size_t pool_size, std::uint64_t seed) {
  std::vector<std::size_t> order(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) order[i] = i;
  Rng rng(split_seed(seed, "online_draw_order"));
  shuffle(order, rng);
  return order;
}

namespace {

/// Replays stored pool traces in seeded order, emulating gated generation:
/// a trace whose gate would fire is truncated one past the stop index and
/// loses its answer (it was never produced).
class PoolTraceSource final : public TraceSource {
public:
  PoolTraceSource(const TracePool& pool, std::uint64_t seed)
      : pool_(pool), order_(draw_order(pool.size(), seed)) {}

  std::optional<Drawn> next(const gate::GateConfig* g) override {
    if (cursor_ >= order_.size()) return std::nullopt;
    const Trace& full = pool_.traces[order_[cursor_++]];
    if (g != nullptr && g->enabled) {
      if (auto stop = gate::first_stop_index(full, *g)) {
        Drawn d;
        d.gated = true;
        d.trace.trace_id = full.trace_id;
        d.trace.tokens.assign(full.tokens.begin(),
                              full.tokens.begin() + static_cast<std::ptrdiff_t>(*stop + 1));
        return d;
      }
    }
    return Drawn{full, false};
  }

private:
  const TracePool& pool_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

struct WarmupEntry {
  std::string trace_id;
  std::optional<std::string> answer;
  std::optional<double> confidence;  // absent for zero-token traces
};

}  // namespace

OnlineOutcome run_with_source(TraceSource& source, const OnlineConfig& cfg) {
  cfg.validate();

  OnlineOutcome out;
  std::vector<voting::Ballot> ballots;
  std::map<std::string, double> tally;
  double tally_total = 0.0;

  const auto cast_vote = [&](const std::string& answer, double conf, const std::string& id) {
    ballots.push_back(voting::Ballot{answer, conf, id, conf});
    tally[answer] += conf;
    tally_total += conf;
  };
  const auto consensus = [&]() -> double {
    if (ballots.empty()) return 0.0;
    if (tally_total <= 0.0) return voting::weighted_vote(ballots).consensus_ratio;
    double best = 0.0;
    for (const auto& [answer, weight] : tally) best = std::max(best, weight);
    return best / tally_total;
  };
  const auto trace_conf = [&](const Trace& t) -> std::optional<double> {
    if (t.tokens.empty()) return std::nullopt;
    return metrics::trace_confidence(t, cfg.metric_cfg).lowest_group;
  };

  // --- Warmup: n_init complete traces, full token cost ---
  std::vector<WarmupEntry> warmup;
  warmup.reserve(static_cast<std::size_t>(cfg.n_init));
  for (int i = 0; i < cfg.n_init; ++i) {
    std::optional<TraceSource::Drawn> drawn;
    try {
      drawn = source.next(nullptr);
    } catch (const Error& e) {
      throw RunAbortError(std::string("trace source failed during warmup: ") + e.what(), out);
    }
    if (!drawn) break;
    const Trace& t = drawn->trace;
    ++out.traces_started;
    ++out.traces_completed;
    out.total_tokens += t.token_count();
    WarmupEntry e{t.trace_id, t.answer, trace_conf(t)};
    out.ledger.push_back(TraceCost{t.trace_id, t.token_count(), false, false});
    warmup.push_back(std::move(e));
  }
  if (warmup.empty()) throw EmptyVoteError("online run: source produced no traces");

  // Calibrate s on answerable warmup traces so the warmup filter matches the
  // offline pipeline (which drops answerless traces before filtering). When
  // nothing is answerable fall back to all scored traces; the gate still
  // needs a threshold.
  std::vector<double> calib;
  for (const WarmupEntry& e : warmup) {
    if (e.answer && e.confidence) calib.push_back(*e.confidence);
  }
  if (calib.empty()) {
    for (const WarmupEntry& e : warmup) {
      if (e.confidence) calib.push_back(*e.confidence);
    }
  }
  const double s = calib.empty() ? -std::numeric_limits<double>::infinity()
                                 : warmup_threshold(calib, cfg.eta_percent);
  out.threshold_s = s;

  for (std::size_t i = 0; i < warmup.size(); ++i) {
    const WarmupEntry& e = warmup[i];
    if (e.answer && e.confidence && *e.confidence >= s) {
      cast_vote(*e.answer, *e.confidence, e.trace_id);
      out.ledger[i].voted = true;
    }
  }

  // --- Gated generation up to the budget ---
  gate::GateConfig live_gate = cfg.gate_cfg;
  live_gate.threshold = s;
  while (out.traces_started < cfg.budget) {
    if (cfg.adaptive && !ballots.empty() && consensus() >= cfg.tau) {
      out.stopped_by_consensus = true;
      break;
    }
    std::optional<TraceSource::Drawn> drawn;
    try {
      drawn = source.next(&live_gate);
    } catch (const Error& e) {
      throw RunAbortError(std::string("trace source failed after warmup: ") + e.what(), out);
    }
    if (!drawn) break;
    const Trace& t = drawn->trace;
    ++out.traces_started;
    out.total_tokens += t.token_count();
    TraceCost cost{t.trace_id, t.token_count(), drawn->gated, false};
    if (drawn->gated) {
      ++out.traces_gated;
    } else {
      ++out.traces_completed;
      if (t.answer) {
        if (auto conf = trace_conf(t)) {
          cast_vote(*t.answer, *conf, t.trace_id);
          cost.voted = true;
        }
      }
    }
    out.ledger.push_back(std::move(cost));
  }

  // --- Final vote ---
  if (ballots.empty()) {
    if (cfg.strict_empty_vote) {
      throw EmptyVoteError("online run: no voting trace by termination");
    }
    for (const WarmupEntry& e : warmup) {
      if (e.answer && e.confidence) {
        ballots.push_back(voting::Ballot{*e.answer, *e.confidence, e.trace_id, *e.confidence});
      }
    }
    if (ballots.empty()) {
      throw EmptyVoteError("online run: no answerable trace by termination");
    }
    out.warmup_fallback = true;
  }
  const voting::VoteResult vote = voting::weighted_vote(ballots);
  out.final_answer = vote.winner;
  out.kept_trace_ids = vote.kept_trace_ids;
  return out;
}

OnlineOutcome run_online(const TracePool& pool, const OnlineConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (pool.size() < static_cast<std::size_t>(cfg.budget)) {
    throw BoundsError("pool '" + pool.problem_id + "' has " + std::to_string(pool.size()) +
                      " traces, budget is " + std::to_string(cfg.budget));
  }
  PoolTraceSource source(pool, seed);
  return run_with_source(source, cfg);
}

}  // namespace deepconf::online
