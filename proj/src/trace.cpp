#include "deepconf/trace.hpp"

#include <cmath>
#include <unordered_set>

#include "deepconf/errors.hpp"
#include "deepconf/rng.hpp"

namespace deepconf {

void TokenRecord::validate() const {
  if (candidate_logprobs.empty()) {
    throw ValidationError("token record has no candidates (candidate_count >= 1 required)");
  }
  double prev = 0.0;
  bool first = true;
  for (double lp : candidate_logprobs) {
    if (!std::isfinite(lp)) throw ValidationError("logprob not finite");
    if (lp > 0.0) throw ValidationError("logprob > 0");
    if (!first && lp > prev) throw ValidationError("candidate logprobs not sorted non-increasing");
    prev = lp;
    first = false;
  }
}

void Trace::validate() const {
  if (trace_id.empty()) throw ValidationError("trace_id empty");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    try {
      tokens[i].validate();
    } catch (const ValidationError& e) {
      throw ValidationError("trace '" + trace_id + "' token " + std::to_string(i) + ": " +
                            e.what());
    }
  }
}

void TracePool::validate() const {
  std::unordered_set<std::string> seen;
  seen.reserve(traces.size());
  for (const Trace& t : traces) {
    t.validate();
    if (!seen.insert(t.trace_id).second) {
      throw ValidationError("duplicate trace_id '" + t.trace_id + "' in pool '" + problem_id +
                            "'");
    }
    if (t.correct.has_value() && ground_truth.has_value()) {
      const bool expect = t.answer.has_value() && *t.answer == *ground_truth;
      if (*t.correct != expect) {
        throw ValidationError("trace '" + t.trace_id +
                              "': correct label inconsistent with answer vs ground truth");
      }
    }
    if (t.correct.has_value() && *t.correct && !t.answer.has_value()) {
      throw ValidationError("trace '" + t.trace_id + "': correct=true but answer absent");
    }
  }
}

void ProblemSet::validate() const {
  std::unordered_set<std::string> seen;
  for (const TracePool& p : pools) {
    p.validate();
    if (!seen.insert(p.problem_id).second) {
      throw ValidationError("duplicate problem_id '" + p.problem_id + "' in set '" + name + "'");
    }
  }
}

TracePool subsample(const TracePool& pool, std::size_t size, std::uint64_t seed) {
  if (size > pool.size()) {
    throw BoundsError("subsample size " + std::to_string(size) + " exceeds pool size " +
                      std::to_string(pool.size()));
  }
  Rng rng(seed);
  std::vector<std::size_t> picks = sample_indices(pool.size(), size, rng);
  TracePool out;
  out.problem_id = pool.problem_id;
  out.ground_truth = pool.ground_truth;
  out.traces.reserve(size);
  for (std::size_t i : picks) out.traces.push_back(pool.traces[i]);
  return out;
}

}  // namespace deepconf
