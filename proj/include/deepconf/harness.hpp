#pragma once

/**
 * Config-driven experiment runner: resampled working sets, repeated runs,
 * matched-sample method comparison, token accounting, and report emission.
 *
 * Protocol per (problem, repeat): derive a seed from
 * (base_seed, problem_id, repeat), draw one working set per distinct K with
 * that seed, and evaluate every configured method on the same working set.
 * Seeds never depend on the method, so comparisons are paired and runs
 * reproduce bit-for-bit across machines.
 *
 * Accuracy per run is 1 when the method's final answer equals the pool's
 * ground truth (byte-wise on normalized strings). A method that ends with
 * no answerable vote scores 0 for that run; its tokens still count.
 */

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepconf/metrics.hpp"
#include "deepconf/online.hpp"
#include "deepconf/trace.hpp"

namespace deepconf::harness {

enum class MethodKind {
  Pass1,           // mean correctness over the full pool
  Cons,            // unweighted majority over a K-trace working set
  Measure,         // confidence-weighted vote, no filtering
  MeasureTopEta,   // top-eta filter then confidence-weighted vote
  OnlineLow,       // adaptive online, eta = 10
  OnlineHigh,      // adaptive online, eta = 90
  OnlineBudgetOnly // online without consensus stopping
};

std::string_view method_kind_name(MethodKind k);
MethodKind method_kind_from_name(std::string_view name);

struct MethodSpec {
  MethodKind kind = MethodKind::Cons;
  std::string name;  // report label; derived from the spec when empty
  metrics::Measure measure = metrics::Measure::LowestGroup;
  double eta = 100.0;  // offline retention / budget-only online eta
  int K = 0;           // working-set size (and online budget); pass1 ignores it
  online::OnlineConfig online;  // n_init / tau / gate knobs for online kinds

  std::string label() const;
};

struct ExperimentConfig {
  std::string problem_set;  // path; informational once the set is loaded
  std::vector<MethodSpec> methods;
  int repeats = 64;
  std::uint64_t base_seed = 0;
  metrics::MetricConfig metric_cfg;
  int parallelism = 1;

  void validate() const;
};

struct ReportRow {
  std::string method;
  std::string problem_id;  // kMacroScope for the per-method macro row
  std::vector<std::pair<std::string, std::string>> params;  // grid point
  double mean_accuracy = 0.0;
  double stderr_accuracy = 0.0;
  double mean_tokens = 0.0;  // per problem: mean total per run; macro: summed
  int repeats = 0;
};

inline constexpr std::string_view kMacroScope = "(macro)";

struct RunReport {
  int schema_version = 1;
  std::string config_hash;
  std::uint64_t base_seed = 0;
  std::vector<ReportRow> rows;
  /// "problem|repeat|K|fnv64(trace ids)" audit lines proving paired sets.
  std::vector<std::string> working_set_hashes;
  /// One record per (problem, repeat, online method), JSONL-ready.
  std::vector<nlohmann::ordered_json> online_outcomes;
};

/// Sweep over harness knobs; empty dimensions are left at config values.
struct ParameterGrid {
  std::vector<double> tau;
  std::vector<int> n_init;
  std::vector<double> eta;
  std::vector<int> window_size;
  std::vector<metrics::Measure> measure;
  std::vector<int> K;
};

/// Canonical hash of a config (embedded in reports for provenance).
std::string config_hash(const ExperimentConfig& cfg);

RunReport run_experiment(const ExperimentConfig& cfg, const ProblemSet& set);

/// Cross-product of the grid; every point runs with the same base seed so
/// deltas between points are paired. Rows carry the grid coordinates.
RunReport run_ablation(const ExperimentConfig& cfg, const ProblemSet& set,
                       const ParameterGrid& grid);

enum class ReportFormat { Csv, Json, Markdown };

/**
 * Writes <prefix>.{csv|json|md}; CSV also emits <prefix>_curves.csv (tidy
 * accuracy-vs-tokens rows) and, when online outcomes exist,
 * <prefix>_outcomes.jsonl. Output bytes are a pure function of the report.
 */
std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& out_prefix);

// --- problem-set persistence -------------------------------------------------

/// Loads a set from a manifest (set.json), a single .jsonl pool, or a
/// directory of *.jsonl pools (sorted by filename).
ProblemSet load_problem_set(const std::filesystem::path& path);

/// Writes pools plus a set.json manifest into `dir`.
void save_problem_set(const ProblemSet& set, const std::filesystem::path& dir);

// --- config (de)serialization ------------------------------------------------

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
ParameterGrid parameter_grid_from_json(const nlohmann::json& j);

/// Rebuilds a report from its emitted JSON form (online outcome records live
/// in the side-car JSONL and are not restored).
RunReport report_from_json(const nlohmann::json& j);

}  // namespace deepconf::harness
