#include "deepconf/synth.hpp"

#include <algorithm>
#include <string>

#include "deepconf/errors.hpp"
#include "deepconf/rng.hpp"

namespace deepconf::synth {

void SynthConfig::validate() const {
  if (problems < 1) throw ConfigError("problems must be >= 1");
  if (traces_per_problem < 1) throw ConfigError("traces_per_problem must be >= 1");
  if (candidate_count < 1) throw ConfigError("candidate_count must be >= 1");
  if (min_tokens < 1 || max_tokens < min_tokens) {
    throw ConfigError("need 1 <= min_tokens <= max_tokens");
  }
  if (dip_tokens < 1) throw ConfigError("dip_tokens must be >= 1");
  if (dip_tokens > min_tokens) {
    throw ConfigError("dip_tokens must not exceed min_tokens (dip must fit in every trace)");
  }
  if (!(hard_fraction >= 0.0 && hard_fraction <= 1.0)) {
    throw ConfigError("hard_fraction must be in [0, 1]");
  }
  if (!(mu_correct > 0.0)) throw ConfigError("mu_correct must be > 0");
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be >= 0");
  if (!(dip_depth > 0.0)) throw ConfigError("dip_depth must be > 0");
}

namespace {

constexpr double kMinConfidence = 0.01;

TokenRecord make_record(double confidence, int k) {
  TokenRecord r;
  r.candidate_logprobs.assign(static_cast<std::size_t>(k),
                              -std::max(confidence, kMinConfidence));
  return r;
}

}  // namespace

TracePool make_pool(const SynthConfig& cfg, int index) {
  cfg.validate();
  Rng rng(split_seed(cfg.seed, "synth_problem_" + std::to_string(index)));

  const bool hard =
      static_cast<double>(index) < cfg.hard_fraction * static_cast<double>(cfg.problems);
  const double p_correct = hard ? cfg.correct_rate_hard : cfg.correct_rate_easy;
  const double p_wrong1 = hard ? cfg.dominant_wrong_rate_hard
                               : (1.0 - cfg.correct_rate_easy) * 0.6;

  TracePool pool;
  pool.problem_id = "synth" + std::to_string(index);
  pool.ground_truth = "ans" + std::to_string(index);
  const std::string wrong1 = "wrong" + std::to_string(index) + "a";
  const std::string wrong2 = "wrong" + std::to_string(index) + "b";

  pool.traces.reserve(static_cast<std::size_t>(cfg.traces_per_problem));
  for (int t = 0; t < cfg.traces_per_problem; ++t) {
    const double u = rng.next_double();
    const bool correct = u < p_correct;
    const std::string& answer =
        correct ? *pool.ground_truth : (u < p_correct + p_wrong1 ? wrong1 : wrong2);

    const int len = cfg.min_tokens +
                    static_cast<int>(rng.next_below(
                        static_cast<std::uint64_t>(cfg.max_tokens - cfg.min_tokens + 1)));
    std::int64_t dip_start = -1;
    if (!correct) {
      dip_start = static_cast<std::int64_t>(
          rng.next_below(static_cast<std::uint64_t>(len - cfg.dip_tokens + 1)));
    }

    Trace trace;
    trace.trace_id = pool.problem_id + "_t" + std::to_string(t);
    trace.answer = answer;
    trace.correct = correct;
    trace.tokens.reserve(static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i) {
      const bool in_dip =
          dip_start >= 0 && i >= dip_start && i < dip_start + cfg.dip_tokens;
      const double mu = in_dip ? cfg.mu_correct - cfg.dip_depth : cfg.mu_correct;
      trace.tokens.push_back(make_record(mu + cfg.sigma * rng.next_normal(),
                                         cfg.candidate_count));
    }
    pool.traces.push_back(std::move(trace));
  }
  return pool;
}

ProblemSet make_problem_set(const SynthConfig& cfg) {
  cfg.validate();
  ProblemSet set;
  set.name = "synthetic";
  set.metadata = {
      {"generator", "deepconf-synth"},
      {"problems", std::to_string(cfg.problems)},
      {"traces_per_problem", std::to_string(cfg.traces_per_problem)},
      {"candidate_count", std::to_string(cfg.candidate_count)},
      {"mu_correct", std::to_string(cfg.mu_correct)},
      {"sigma", std::to_string(cfg.sigma)},
      {"dip_depth", std::to_string(cfg.dip_depth)},
      {"dip_tokens", std::to_string(cfg.dip_tokens)},
      {"hard_fraction", std::to_string(cfg.hard_fraction)},
      {"seed", std::to_string(cfg.seed)},
  };
  set.pools.reserve(static_cast<std::size_t>(cfg.problems));
  for (int p = 0; p < cfg.problems; ++p) {
    set.pools.push_back(make_pool(cfg, p));
  }
  return set;
}

}  // namespace deepconf::synth
