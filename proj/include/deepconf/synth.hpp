#pragma once

/**
 * Synthetic trace pools for desk-scale experiments and acceptance runs.
 *
 * Recipe: correct traces draw per-token confidence from a high-confidence
 * regime N(mu_correct, sigma). Incorrect traces draw from the same regime
 * but carry one contiguous low-confidence dip of dip_tokens tokens centered
 * dip_depth below mu_correct, emulating the separated confidence
 * distributions of real correct/incorrect reasoning traces. Every token
 * stores candidate_count equal logprobs of -confidence, so the token
 * confidence equals the sampled value exactly under both the inclusive and
 * exclude-sampled rules.
 *
 * A fraction of problems is "hard": a single wrong answer out-votes the
 * ground truth, so plain majority voting fails while confidence filtering
 * can still recover the truth.
 */

#include <cstdint>

#include "deepconf/trace.hpp"

namespace deepconf::synth {

struct SynthConfig {
  int problems = 8;
  int traces_per_problem = 64;
  int candidate_count = 4;  // k stored per token
  int min_tokens = 200;
  int max_tokens = 400;

  double hard_fraction = 0.25;
  double correct_rate_easy = 0.75;
  double correct_rate_hard = 0.35;
  double dominant_wrong_rate_hard = 0.45;

  double mu_correct = 1.8;
  double sigma = 0.12;
  double dip_depth = 0.9;
  int dip_tokens = 128;

  std::uint64_t seed = 1;

  void validate() const;
};

/// Pool for problem `index` under the config (ground truth "ans<index>").
TracePool make_pool(const SynthConfig& cfg, int index);

/// Whole problem set; metadata records the generator parameters.
ProblemSet make_problem_set(const SynthConfig& cfg);

}  // namespace deepconf::synth
