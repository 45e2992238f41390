#include <doctest.h>

#include <algorithm>
#include <set>
#include <unordered_map>

#include "deepconf/errors.hpp"
#include "deepconf/voting.hpp"
#include "test_support.hpp"

using namespace deepconf;
using namespace deepconf::voting;
namespace ts = test_support;

namespace {

Ballot ballot(std::string answer, double weight, std::string id, double conf = 0.0) {
  return Ballot{std::move(answer), weight, std::move(id), conf};
}

/// Hash-map counting oracle with the same lexicographic tie-break.
std::string brute_majority_winner(const std::vector<Ballot>& ballots) {
  std::unordered_map<std::string, int> counts;
  for (const Ballot& b : ballots) counts[b.answer]++;
  std::string best;
  int best_count = -1;
  for (const auto& [answer, count] : counts) {
    if (count > best_count || (count == best_count && answer < best)) {
      best = answer;
      best_count = count;
    }
  }
  return best;
}

}  // namespace

TEST_SUITE_BEGIN("voting");

TEST_CASE("keep_count: round-half-up with floor 1") {
  CHECK(keep_count(512, 10.0) == 51);
  CHECK(keep_count(16, 10.0) == 2);
  CHECK(keep_count(16, 90.0) == 14);
  CHECK(keep_count(10, 100.0) == 10);
  CHECK(keep_count(1, 10.0) == 1);
  CHECK(keep_count(5, 10.0) == 1);   // 0.5 rounds half up
  CHECK(keep_count(15, 10.0) == 2);  // 1.5 rounds half up
  CHECK_THROWS_AS(keep_count(10, 0.0), ConfigError);
  CHECK_THROWS_AS(keep_count(10, 101.0), ConfigError);
}

TEST_CASE("majority_vote basics") {
  const std::vector<Ballot> ballots = {ballot("A", 1, "t1"), ballot("A", 1, "t2"),
                                       ballot("B", 1, "t3")};
  const VoteResult r = majority_vote(ballots);
  CHECK(r.winner == "A");
  CHECK(r.consensus_ratio == doctest::Approx(2.0 / 3.0));
  CHECK(r.tally.at("A") == doctest::Approx(2.0));

  // Exact tie breaks toward the lexicographically smallest answer.
  const std::vector<Ballot> tie = {ballot("B", 1, "t1"), ballot("A", 1, "t2")};
  CHECK(majority_vote(tie).winner == "A");

  CHECK_THROWS_AS(majority_vote({}), EmptyVoteError);
}

TEST_CASE("majority_vote matches the counting oracle on random ballots") {
  Rng rng(31);
  static const std::vector<std::string> answers = {"A", "B", "C", "D", "E"};
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Ballot> ballots;
    const int n = 1 + static_cast<int>(rng.next_below(100));
    for (int i = 0; i < n; ++i) {
      ballots.push_back(
          ballot(answers[rng.next_below(answers.size())], 1.0, "t" + std::to_string(i)));
    }
    CHECK(majority_vote(ballots).winner == brute_majority_winner(ballots));
  }
}

TEST_CASE("weighted_vote basics") {
  const std::vector<Ballot> ballots = {ballot("A", 0.9, "t1"), ballot("B", 0.5, "t2"),
                                       ballot("B", 0.5, "t3")};
  const VoteResult r = weighted_vote(ballots);
  CHECK(r.winner == "B");
  CHECK(r.consensus_ratio == doctest::Approx(1.0 / 1.9));

  const VoteResult single = weighted_vote(std::vector<Ballot>{ballot("Z", 2.5, "t1")});
  CHECK(single.winner == "Z");
  CHECK(single.consensus_ratio == doctest::Approx(1.0));

  CHECK_THROWS_AS(weighted_vote(std::vector<Ballot>{ballot("A", -0.1, "t1")}),
                  ValidationError);
}

TEST_CASE("weighted_vote with unit weights equals majority_vote") {
  Rng rng(32);
  static const std::vector<std::string> answers = {"x", "y", "z"};
  for (int rep = 0; rep < 40; ++rep) {
    std::vector<Ballot> ballots;
    const int n = 1 + static_cast<int>(rng.next_below(60));
    for (int i = 0; i < n; ++i) {
      ballots.push_back(
          ballot(answers[rng.next_below(answers.size())], 1.0, "t" + std::to_string(i)));
    }
    const VoteResult w = weighted_vote(ballots);
    const VoteResult m = majority_vote(ballots);
    CHECK(w.winner == m.winner);
    CHECK(w.consensus_ratio == doctest::Approx(m.consensus_ratio));
  }
}

TEST_CASE("argmax is invariant under positive weight scaling") {
  Rng rng(33);
  static const std::vector<std::string> answers = {"A", "B", "C"};
  for (double c : {0.125, 3.0, 1e6}) {
    std::vector<Ballot> ballots;
    for (int i = 0; i < 30; ++i) {
      ballots.push_back(ballot(answers[rng.next_below(answers.size())], rng.next_double(),
                               "t" + std::to_string(i)));
    }
    const VoteResult base = weighted_vote(ballots);
    std::vector<Ballot> scaled = ballots;
    for (Ballot& b : scaled) b.weight *= c;
    const VoteResult r = weighted_vote(scaled);
    CHECK(r.winner == base.winner);
    CHECK(r.consensus_ratio == doctest::Approx(base.consensus_ratio).epsilon(1e-12));
  }
}

TEST_CASE("all-zero weights degrade to an unweighted vote") {
  const std::vector<Ballot> ballots = {ballot("A", 0.0, "t1"), ballot("A", 0.0, "t2"),
                                       ballot("B", 0.0, "t3")};
  const VoteResult r = weighted_vote(ballots);
  CHECK(r.winner == "A");
  CHECK(r.consensus_ratio == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("permutation invariance of winner and tally") {
  Rng rng(34);
  std::vector<Ballot> ballots;
  static const std::vector<std::string> answers = {"A", "B", "C"};
  for (int i = 0; i < 25; ++i) {
    ballots.push_back(ballot(answers[rng.next_below(answers.size())], rng.next_double(),
                             "t" + std::to_string(i), rng.next_double()));
  }
  const VoteResult base = weighted_vote(ballots);
  const auto kept_base = filter_top_eta(ballots, 30.0);
  std::set<std::string> kept_ids;
  for (const Ballot& b : kept_base) kept_ids.insert(b.trace_id);
  for (int rep = 0; rep < 10; ++rep) {
    shuffle(ballots, rng);
    const VoteResult r = weighted_vote(ballots);
    CHECK(r.winner == base.winner);
    std::set<std::string> ids;
    for (const Ballot& b : filter_top_eta(ballots, 30.0)) ids.insert(b.trace_id);
    CHECK(ids == kept_ids);
  }
}

TEST_CASE("filter_top_eta keeps the documented counts and order") {
  std::vector<Ballot> ballots;
  for (int i = 0; i < 512; ++i) {
    ballots.push_back(ballot("A", 1.0, "t" + std::to_string(i), static_cast<double>(i)));
  }
  CHECK(filter_top_eta(ballots, 10.0).size() == 51);
  CHECK(filter_top_eta(ballots, 100.0).size() == 512);

  std::vector<Ballot> ten;
  for (int i = 0; i < 10; ++i) {
    ten.push_back(ballot("A", 1.0, "t" + std::to_string(i), 1.0 + i));
  }
  const auto kept = filter_top_eta(ten, 10.0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].confidence == doctest::Approx(10.0));

  // Kept ballots preserve their original relative order.
  std::vector<Ballot> mixed = {ballot("A", 1, "t0", 5.0), ballot("B", 1, "t1", 9.0),
                               ballot("C", 1, "t2", 7.0), ballot("D", 1, "t3", 8.0)};
  const auto top3 = filter_top_eta(mixed, 75.0);
  REQUIRE(top3.size() == 3);
  CHECK(top3[0].trace_id == "t1");
  CHECK(top3[1].trace_id == "t2");
  CHECK(top3[2].trace_id == "t3");

  // Equal confidences break by ascending trace_id.
  std::vector<Ballot> tied = {ballot("A", 1, "tb", 1.0), ballot("B", 1, "ta", 1.0)};
  const auto kept_tied = filter_top_eta(tied, 50.0);
  REQUIRE(kept_tied.size() == 1);
  CHECK(kept_tied[0].trace_id == "ta");

  CHECK_THROWS_AS(filter_top_eta(ten, 0.0), ConfigError);
  CHECK_THROWS_AS(filter_top_eta(ten, 100.5), ConfigError);
}

TEST_CASE("filter_top_eta kept sets nest as eta grows") {
  Rng rng(35);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Ballot> ballots;
    const int n = 1 + static_cast<int>(rng.next_below(40));
    for (int i = 0; i < n; ++i) {
      ballots.push_back(ballot("A", 1.0, "t" + std::to_string(i), rng.next_double()));
    }
    std::set<std::string> previous;
    for (double eta : {10.0, 25.0, 50.0, 75.0, 90.0, 100.0}) {
      std::set<std::string> kept;
      for (const Ballot& b : filter_top_eta(ballots, eta)) kept.insert(b.trace_id);
      CHECK(std::includes(kept.begin(), kept.end(), previous.begin(), previous.end()));
      previous = std::move(kept);
    }
  }
}

TEST_CASE("offline_deepconf reduces to majority when unfiltered with unit weights") {
  Rng rng(36);
  const TracePool pool = ts::random_pool(rng, "p", 24, 30, 3, true);
  metrics::MetricConfig cfg;
  cfg.top_k = 3;
  cfg.window_size = 8;
  const VoteResult unit =
      offline_deepconf(pool.traces, cfg, metrics::Measure::Mean, 100.0, true);
  std::vector<Ballot> ballots;
  for (const Trace& t : pool.traces) ballots.push_back(ballot(*t.answer, 1.0, t.trace_id));
  CHECK(unit.winner == majority_vote(ballots).winner);
}

TEST_CASE("offline_deepconf keeps only the higher-confidence trace at eta=10") {
  // Confidence is the negative mean logprob, so deeper logprobs score higher.
  Trace low;
  low.trace_id = "low";
  low.answer = "A";
  low.tokens.push_back([] {
    TokenRecord r;
    r.candidate_logprobs = {-0.1};  // confidence 0.1
    return r;
  }());
  Trace high;
  high.trace_id = "high";
  high.answer = "B";
  high.tokens.push_back([] {
    TokenRecord r;
    r.candidate_logprobs = {-9.0};  // confidence 9.0
    return r;
  }());
  metrics::MetricConfig cfg;
  cfg.top_k = 1;
  cfg.window_size = 4;
  const VoteResult r = offline_deepconf(std::vector<Trace>{low, high}, cfg,
                                        metrics::Measure::Mean, 10.0);
  CHECK(r.winner == "B");
  CHECK(r.kept_trace_ids == std::set<std::string>{"high"});
}

TEST_CASE("offline_deepconf matches the end-to-end brute-force oracle") {
  Rng rng(37);
  for (int rep = 0; rep < 30; ++rep) {
    const int k = 1 + static_cast<int>(rng.next_below(4));
    const TracePool pool =
        ts::random_pool(rng, "p" + std::to_string(rep), 64, 40, k);
    metrics::MetricConfig cfg;
    cfg.top_k = k;
    cfg.window_size = 1 + static_cast<int>(rng.next_below(16));
    for (double eta : {10.0, 90.0, 100.0}) {
      const VoteResult got =
          offline_deepconf(pool.traces, cfg, metrics::Measure::LowestGroup, eta);

      // Oracle: score, sort, slice, weigh, argmax - all in place.
      struct Scored {
        std::string answer;
        std::string id;
        double conf;
      };
      std::vector<Scored> scored;
      for (const Trace& t : pool.traces) {
        if (!t.answer) continue;
        scored.push_back(
            {*t.answer, t.trace_id,
             metrics::trace_confidence(t, cfg).lowest_group});
      }
      std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.conf != b.conf) return a.conf > b.conf;
        return a.id < b.id;
      });
      const std::size_t m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::floor(eta * scored.size() / 100.0 + 0.5)));
      scored.resize(std::min(m, scored.size()));
      std::map<std::string, double> tally;
      std::set<std::string> kept;
      for (const Scored& s : scored) {
        tally[s.answer] += s.conf;
        kept.insert(s.id);
      }
      std::string winner;
      double best = -1.0;
      for (const auto& [answer, weight] : tally) {
        if (weight > best) {
          best = weight;
          winner = answer;
        }
      }
      CHECK(got.winner == winner);
      CHECK(got.kept_trace_ids == kept);
    }
  }
}

TEST_SUITE_END();
