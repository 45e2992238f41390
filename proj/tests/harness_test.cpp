#include <doctest.h>

#include <algorithm>
#include <set>

#include "deepconf/errors.hpp"
#include "deepconf/harness.hpp"
#include "deepconf/synth.hpp"
#include "deepconf/voting.hpp"
#include "test_support.hpp"

using namespace deepconf;
using namespace deepconf::harness;
namespace ts = test_support;

namespace {

TokenRecord one_token(double conf) {
  TokenRecord r;
  r.candidate_logprobs = {-conf, -conf};
  return r;
}

ProblemSet tiny_set() {
  synth::SynthConfig sc;
  sc.problems = 3;
  sc.traces_per_problem = 24;
  sc.min_tokens = 30;
  sc.max_tokens = 60;
  sc.dip_tokens = 16;
  sc.candidate_count = 2;
  sc.seed = 5;
  return synth::make_problem_set(sc);
}

ExperimentConfig base_config() {
  ExperimentConfig cfg;
  cfg.repeats = 4;
  cfg.base_seed = 99;
  cfg.metric_cfg.top_k = 2;
  cfg.metric_cfg.window_size = 8;
  return cfg;
}

MethodSpec method(MethodKind kind, int K, double eta = 100.0,
                  metrics::Measure measure = metrics::Measure::LowestGroup) {
  MethodSpec m;
  m.kind = kind;
  m.K = K;
  m.eta = eta;
  m.measure = measure;
  m.online.n_init = 4;
  return m;
}

const ReportRow& find_row(const RunReport& report, const std::string& method,
                          const std::string& problem) {
  for (const ReportRow& row : report.rows) {
    if (row.method == method && row.problem_id == problem) return row;
  }
  REQUIRE_MESSAGE(false, "row not found: ", method, " / ", problem);
  static ReportRow dummy;
  return dummy;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("pass@1 is the mean correctness over the full pool") {
  TracePool pool;
  pool.problem_id = "p";
  pool.ground_truth = "A";
  int i = 0;
  for (bool correct : {true, false, true, true}) {
    Trace t;
    t.trace_id = "t" + std::to_string(i++);
    t.answer = correct ? "A" : "B";
    t.correct = correct;
    t.tokens.push_back(one_token(1.0));
    pool.traces.push_back(std::move(t));
  }
  ProblemSet set;
  set.name = "s";
  set.pools.push_back(pool);

  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::Pass1, 0)};
  const RunReport report = run_experiment(cfg, set);
  const ReportRow& row = find_row(report, "pass@1", "p");
  CHECK(row.mean_accuracy == doctest::Approx(0.75));
  CHECK(row.stderr_accuracy == 0.0);
  CHECK(row.mean_tokens == doctest::Approx(1.0));
}

TEST_CASE("K = pool size gives zero variance for deterministic methods") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.repeats = 6;
  const int K = static_cast<int>(set.pools[0].size());
  cfg.methods = {method(MethodKind::Cons, K),
                 method(MethodKind::Measure, K, 100.0, metrics::Measure::Mean),
                 method(MethodKind::MeasureTopEta, K, 10.0)};
  const RunReport report = run_experiment(cfg, set);
  for (const ReportRow& row : report.rows) {
    CHECK(row.stderr_accuracy == 0.0);  // same working set every repeat
  }
}

TEST_CASE("methods with the same K share one working set per (problem, repeat)") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::Cons, 10),
                 method(MethodKind::Measure, 10, 100.0, metrics::Measure::Mean),
                 method(MethodKind::Cons, 12)};
  const RunReport report = run_experiment(cfg, set);
  // One hash line per (problem, repeat, distinct K): 3 problems x 4 repeats x 2.
  CHECK(report.working_set_hashes.size() == 3 * 4 * 2);
  std::set<std::string> unique(report.working_set_hashes.begin(),
                               report.working_set_hashes.end());
  CHECK(unique.size() == report.working_set_hashes.size());

  // And the same seeds reproduce the same sets in a fresh run.
  const RunReport again = run_experiment(cfg, set);
  CHECK(again.working_set_hashes == report.working_set_hashes);
}

TEST_CASE("harness cells match a straight-line reference evaluation") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.repeats = 8;
  cfg.methods = {method(MethodKind::Cons, 9),
                 method(MethodKind::MeasureTopEta, 9, 10.0, metrics::Measure::BottomQ)};
  const RunReport report = run_experiment(cfg, set);

  for (const TracePool& pool : set.pools) {
    double cons_hits = 0.0;
    double filt_hits = 0.0;
    std::int64_t tokens = 0;
    for (int r = 0; r < cfg.repeats; ++r) {
      const std::uint64_t seed =
          split_seed(split_seed(cfg.base_seed, pool.problem_id), static_cast<std::uint64_t>(r));
      const TracePool w = subsample(pool, 9, seed);
      for (const Trace& t : w.traces) tokens += t.token_count();
      std::vector<voting::Ballot> ballots;
      for (const Trace& t : w.traces) {
        if (t.answer) ballots.push_back(voting::Ballot{*t.answer, 1.0, t.trace_id, 0.0});
      }
      cons_hits += voting::majority_vote(ballots).winner == *pool.ground_truth;
      filt_hits += voting::offline_deepconf(w.traces, cfg.metric_cfg,
                                            metrics::Measure::BottomQ, 10.0)
                       .winner == *pool.ground_truth;
    }
    const ReportRow& cons = find_row(report, "cons@9", pool.problem_id);
    CHECK(cons.mean_accuracy == doctest::Approx(cons_hits / cfg.repeats));
    CHECK(cons.mean_tokens ==
          doctest::Approx(static_cast<double>(tokens) / cfg.repeats));
    const ReportRow& filt = find_row(report, "bottom_q+top10@9", pool.problem_id);
    CHECK(filt.mean_accuracy == doctest::Approx(filt_hits / cfg.repeats));
  }
}

TEST_CASE("standard error shrinks like one over sqrt(repeats)") {
  synth::SynthConfig sc;
  sc.problems = 1;
  sc.traces_per_problem = 40;
  sc.min_tokens = 20;
  sc.max_tokens = 30;
  sc.dip_tokens = 10;
  sc.candidate_count = 2;
  sc.hard_fraction = 1.0;  // contested problem: accuracy flips between repeats
  sc.correct_rate_hard = 0.48;
  sc.dominant_wrong_rate_hard = 0.42;
  sc.seed = 31;
  ProblemSet set;
  set.name = "se";
  set.pools.push_back(synth::make_pool(sc, 0));

  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::Cons, 5)};
  cfg.repeats = 32;
  const RunReport r32 = run_experiment(cfg, set);
  cfg.repeats = 128;
  const RunReport r128 = run_experiment(cfg, set);
  const double se32 = find_row(r32, "cons@5", "synth0").stderr_accuracy;
  const double se128 = find_row(r128, "cons@5", "synth0").stderr_accuracy;
  REQUIRE(se32 > 0.0);
  REQUIRE(se128 > 0.0);
  const double ratio = se32 / se128;  // expect ~sqrt(128/32) = 2
  CHECK(ratio >= 2.0 / 1.5);
  CHECK(ratio <= 2.0 * 1.5);
}

TEST_CASE("reports are byte-identical across reruns") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::Cons, 8), method(MethodKind::OnlineLow, 16)};
  ts::TempDir tmp("det");
  const RunReport a = run_experiment(cfg, set);
  const RunReport b = run_experiment(cfg, set);
  for (const auto format : {ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown}) {
    emit_report(a, format, tmp.path() / "a");
    emit_report(b, format, tmp.path() / "b");
  }
  for (const char* suffix : {".csv", "_curves.csv", ".json", ".md", "_outcomes.jsonl"}) {
    CHECK(ts::slurp(tmp.path() / ("a" + std::string(suffix))) ==
          ts::slurp(tmp.path() / ("b" + std::string(suffix))));
    CHECK_FALSE(ts::slurp(tmp.path() / ("a" + std::string(suffix))).empty());
  }
}

TEST_CASE("results do not depend on the parallelism level") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.repeats = 6;
  cfg.methods = {method(MethodKind::Cons, 10), method(MethodKind::OnlineLow, 16)};
  cfg.parallelism = 1;
  const RunReport serial = run_experiment(cfg, set);
  cfg.parallelism = 4;
  const RunReport parallel = run_experiment(cfg, set);
  REQUIRE(serial.rows.size() == parallel.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i) {
    CHECK(serial.rows[i].mean_accuracy == parallel.rows[i].mean_accuracy);
    CHECK(serial.rows[i].mean_tokens == parallel.rows[i].mean_tokens);
  }
  CHECK(serial.working_set_hashes == parallel.working_set_hashes);
  REQUIRE(serial.online_outcomes.size() == parallel.online_outcomes.size());
  for (std::size_t i = 0; i < serial.online_outcomes.size(); ++i) {
    CHECK(serial.online_outcomes[i] == parallel.online_outcomes[i]);
  }
}

TEST_CASE("a single-point grid reproduces run_experiment") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::MeasureTopEta, 10, 10.0)};
  const RunReport plain = run_experiment(cfg, set);
  ParameterGrid grid;
  grid.eta = {10.0};
  const RunReport swept = run_ablation(cfg, set, grid);
  REQUIRE(swept.rows.size() == plain.rows.size());
  for (std::size_t i = 0; i < plain.rows.size(); ++i) {
    CHECK(swept.rows[i].method == plain.rows[i].method);
    CHECK(swept.rows[i].problem_id == plain.rows[i].problem_id);
    CHECK(swept.rows[i].mean_accuracy == plain.rows[i].mean_accuracy);
    CHECK(swept.rows[i].stderr_accuracy == plain.rows[i].stderr_accuracy);
    CHECK(swept.rows[i].mean_tokens == plain.rows[i].mean_tokens);
  }
}

TEST_CASE("grid rows carry their coordinates and multiply out") {
  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.repeats = 2;
  cfg.methods = {method(MethodKind::OnlineBudgetOnly, 12, 10.0)};
  ParameterGrid grid;
  grid.tau = {0.9, 0.95};
  grid.K = {8, 12};
  const RunReport report = run_ablation(cfg, set, grid);
  // 4 grid points x (3 problems + 1 macro row)
  CHECK(report.rows.size() == 4 * 4);
  std::set<std::pair<std::string, std::string>> seen;
  for (const ReportRow& row : report.rows) {
    std::string tau;
    std::string k;
    for (const auto& [key, value] : row.params) {
      if (key == "tau") tau = value;
      if (key == "K") k = value;
    }
    CHECK_FALSE(tau.empty());
    CHECK_FALSE(k.empty());
    seen.insert({tau, k});
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("scoring and bounds preflight") {
  ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::Cons, 10)};
  set.pools[1].ground_truth.reset();
  CHECK_THROWS_WITH_AS(run_experiment(cfg, set), doctest::Contains("synth1"), ScoringError);

  ProblemSet ok = tiny_set();
  cfg.methods = {method(MethodKind::Cons, 10000)};
  CHECK_THROWS_AS(run_experiment(cfg, ok), ConfigError);

  cfg.methods.clear();
  CHECK_THROWS_AS(run_experiment(cfg, ok), ConfigError);
}

TEST_CASE("emit_report handles empty reports and single cells") {
  ts::TempDir tmp("emit");
  RunReport empty;
  empty.config_hash = "0";
  const auto files = emit_report(empty, ReportFormat::Csv, tmp.path() / "empty");
  const std::string csv = ts::slurp(files[0]);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);  // header only

  const ProblemSet set = tiny_set();
  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::Cons, 6)};
  ProblemSet one;
  one.name = "one";
  one.pools.push_back(set.pools[0]);
  const RunReport report = run_experiment(cfg, one);
  emit_report(report, ReportFormat::Csv, tmp.path() / "one");
  const std::string one_csv = ts::slurp(tmp.path() / "one.csv");
  CHECK(std::count(one_csv.begin(), one_csv.end(), '\n') == 3);  // header + cell + macro

  emit_report(report, ReportFormat::Markdown, tmp.path() / "one");
  const std::string md = ts::slurp(tmp.path() / "one.md");
  CHECK(md.find("| synth0 |") != std::string::npos);
  CHECK(md.find("cons@6") != std::string::npos);
}

TEST_CASE("problem sets round-trip through a manifest directory") {
  ts::TempDir tmp("set");
  const ProblemSet set = tiny_set();
  save_problem_set(set, tmp.path() / "pools");
  const ProblemSet back = load_problem_set(tmp.path() / "pools");
  REQUIRE(back.pools.size() == set.pools.size());
  CHECK(back.name == set.name);
  CHECK(back.metadata.at("generator") == "deepconf-synth");
  for (std::size_t i = 0; i < set.pools.size(); ++i) {
    CHECK(ts::pools_equal(back.pools[i], set.pools[i]));
  }
}

TEST_CASE("experiment configs round-trip through JSON and hash stably") {
  ExperimentConfig cfg = base_config();
  cfg.methods = {method(MethodKind::OnlineLow, 32), method(MethodKind::Cons, 16)};
  cfg.methods[0].online.tau = 0.9;
  const auto j = experiment_config_to_json(cfg);
  const ExperimentConfig back = experiment_config_from_json(j);
  CHECK(back.repeats == cfg.repeats);
  CHECK(back.base_seed == cfg.base_seed);
  REQUIRE(back.methods.size() == 2);
  CHECK(back.methods[0].kind == MethodKind::OnlineLow);
  CHECK(back.methods[0].online.tau == 0.9);
  CHECK(back.metric_cfg.window_size == cfg.metric_cfg.window_size);
  CHECK(config_hash(back) == config_hash(cfg));

  ExperimentConfig different = cfg;
  different.base_seed += 1;
  CHECK(config_hash(different) != config_hash(cfg));
}

TEST_SUITE_END();
