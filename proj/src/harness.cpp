#include "deepconf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "deepconf/errors.hpp"
#include "deepconf/rng.hpp"
#include "deepconf/trace_io.hpp"
#include "deepconf/voting.hpp"

namespace deepconf::harness {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Names and labels
// ---------------------------------------------------------------------------

std::string_view method_kind_name(MethodKind k) {
  switch (k) {
    case MethodKind::Pass1: return "pass1";
    case MethodKind::Cons: return "cons";
    case MethodKind::Measure: return "measure";
    case MethodKind::MeasureTopEta: return "measure_top_eta";
    case MethodKind::OnlineLow: return "online_low";
    case MethodKind::OnlineHigh: return "online_high";
    case MethodKind::OnlineBudgetOnly: return "online_budget_only";
  }
  return "?";
}

MethodKind method_kind_from_name(std::string_view name) {
  if (name == "pass1") return MethodKind::Pass1;
  if (name == "cons") return MethodKind::Cons;
  if (name == "measure") return MethodKind::Measure;
  if (name == "measure_top_eta") return MethodKind::MeasureTopEta;
  if (name == "online_low") return MethodKind::OnlineLow;
  if (name == "online_high") return MethodKind::OnlineHigh;
  if (name == "online_budget_only") return MethodKind::OnlineBudgetOnly;
  throw ConfigError("unknown method kind '" + std::string(name) + "'");
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string fmt_eta(double eta) {
  // 10.0 -> "10" for compact labels
  if (eta == std::floor(eta)) return std::to_string(static_cast<long long>(eta));
  return fmt_double(eta);
}

}  // namespace

std::string MethodSpec::label() const {
  if (!name.empty()) return name;
  std::string base;
  switch (kind) {
    case MethodKind::Pass1: return "pass@1";
    case MethodKind::Cons: base = "cons"; break;
    case MethodKind::Measure:
      base = std::string(metrics::measure_name(measure));
      break;
    case MethodKind::MeasureTopEta:
      base = std::string(metrics::measure_name(measure)) + "+top" + fmt_eta(eta);
      break;
    case MethodKind::OnlineLow: base = "deepconf-low"; break;
    case MethodKind::OnlineHigh: base = "deepconf-high"; break;
    case MethodKind::OnlineBudgetOnly:
      base = "budget-only-top" + fmt_eta(eta);
      break;
  }
  return base + "@" + std::to_string(K);
}

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ConfigError("no methods configured");
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  metric_cfg.validate();
  for (const MethodSpec& m : methods) {
    if (m.kind != MethodKind::Pass1) {
      if (m.K < 1) throw ConfigError("method '" + m.label() + "' needs K >= 1");
    }
    if (m.kind == MethodKind::MeasureTopEta || m.kind == MethodKind::OnlineBudgetOnly) {
      if (!(m.eta > 0.0 && m.eta <= 100.0)) {
        throw ConfigError("method '" + m.label() + "' eta must be in (0, 100]");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Method resolution
// ---------------------------------------------------------------------------

namespace {

struct ResolvedMethod {
  MethodSpec spec;
  std::string label;
  bool is_online = false;
  online::OnlineConfig online;  // resolved; meaningful when is_online
  double offline_eta = 100.0;   // retention for offline voting kinds
};

ResolvedMethod resolve_method(const MethodSpec& spec, const ExperimentConfig& cfg) {
  ResolvedMethod r;
  r.spec = spec;
  r.label = spec.label();
  switch (spec.kind) {
    case MethodKind::Pass1:
    case MethodKind::Cons:
      break;
    case MethodKind::Measure:
      r.offline_eta = 100.0;
      break;
    case MethodKind::MeasureTopEta:
      r.offline_eta = spec.eta;
      break;
    case MethodKind::OnlineLow:
    case MethodKind::OnlineHigh:
    case MethodKind::OnlineBudgetOnly: {
      r.is_online = true;
      online::OnlineConfig oc = spec.online;
      oc.budget = spec.K;
      oc.metric_cfg = cfg.metric_cfg;
      // The simulator gates on the same confidence form and window that
      // calibrated s, so the threshold and the stream statistic live on one
      // scale. The exclusive Appendix-style form stays available through
      // run_online directly.
      oc.gate_cfg.window_size = cfg.metric_cfg.window_size;
      oc.gate_cfg.top_k = cfg.metric_cfg.top_k;
      oc.gate_cfg.exclude_sampled = false;
      oc.gate_cfg.enabled = spec.online.gate_cfg.enabled;
      if (spec.kind == MethodKind::OnlineLow) {
        oc.eta_percent = 10.0;
        oc.adaptive = true;
      } else if (spec.kind == MethodKind::OnlineHigh) {
        oc.eta_percent = 90.0;
        oc.adaptive = true;
      } else {
        oc.eta_percent = spec.eta;
        oc.adaptive = false;
      }
      if (oc.n_init > oc.budget) oc.n_init = oc.budget;  // small-K sweeps
      r.online = oc;
      break;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Evaluation core
// ---------------------------------------------------------------------------

bool trace_is_correct(const Trace& t, const std::string& gt) {
  if (t.correct.has_value()) return *t.correct;
  return t.answer.has_value() && *t.answer == gt;
}

std::int64_t total_tokens(const TracePool& pool) {
  std::int64_t s = 0;
  for (const Trace& t : pool.traces) s += t.token_count();
  return s;
}

std::string working_set_hash(const TracePool& w) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const Trace& t : w.traces) {
    for (char c : t.trace_id) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    h ^= '\n';
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct MethodSample {
  int accuracy = 0;
  std::int64_t tokens = 0;
};

struct TaskResult {
  std::vector<MethodSample> samples;  // one per method (pass1 slots unused)
  std::vector<ordered_json> outcomes;
  std::vector<std::string> ws_hashes;
};

std::vector<voting::Ballot> unit_ballots(const TracePool& w) {
  std::vector<voting::Ballot> ballots;
  for (const Trace& t : w.traces) {
    if (t.answer) ballots.push_back(voting::Ballot{*t.answer, 1.0, t.trace_id, 0.0});
  }
  return ballots;
}

TaskResult evaluate_task(const TracePool& pool, const std::string& gt, int repeat,
                         const std::vector<ResolvedMethod>& methods,
                         const ExperimentConfig& cfg) {
  TaskResult result;
  result.samples.resize(methods.size());

  const std::uint64_t seed_pr =
      split_seed(split_seed(cfg.base_seed, pool.problem_id), static_cast<std::uint64_t>(repeat));

  std::map<int, TracePool> sets;  // one working set per distinct K
  const auto working_set = [&](int k) -> const TracePool& {
    auto it = sets.find(k);
    if (it == sets.end()) {
      it = sets.emplace(k, subsample(pool, static_cast<std::size_t>(k), seed_pr)).first;
      result.ws_hashes.push_back(pool.problem_id + "|" + std::to_string(repeat) + "|" +
                                 std::to_string(k) + "|" + working_set_hash(it->second));
    }
    return it->second;
  };

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const ResolvedMethod& m = methods[mi];
    MethodSample& sample = result.samples[mi];
    switch (m.spec.kind) {
      case MethodKind::Pass1:
        break;  // computed per problem outside the repeat loop
      case MethodKind::Cons: {
        const TracePool& w = working_set(m.spec.K);
        sample.tokens = total_tokens(w);
        const auto ballots = unit_ballots(w);
        if (ballots.empty()) {
          sample.accuracy = 0;  // nothing answerable: the method produced no answer
          break;
        }
        sample.accuracy = voting::majority_vote(ballots).winner == gt ? 1 : 0;
        break;
      }
      case MethodKind::Measure:
      case MethodKind::MeasureTopEta: {
        const TracePool& w = working_set(m.spec.K);
        sample.tokens = total_tokens(w);
        try {
          const auto vote = voting::offline_deepconf(
              std::span<const Trace>(w.traces.data(), w.traces.size()), cfg.metric_cfg,
              m.spec.measure, m.offline_eta);
          sample.accuracy = vote.winner == gt ? 1 : 0;
        } catch (const EmptyVoteError&) {
          sample.accuracy = 0;
        }
        break;
      }
      case MethodKind::OnlineLow:
      case MethodKind::OnlineHigh:
      case MethodKind::OnlineBudgetOnly: {
        const TracePool& w = working_set(m.spec.K);
        try {
          const online::OnlineOutcome outcome =
              online::run_online(w, m.online, split_seed(seed_pr, "online"));
          sample.accuracy = outcome.final_answer == gt ? 1 : 0;
          sample.tokens = outcome.total_tokens;
          ordered_json rec;
          rec["problem_id"] = pool.problem_id;
          rec["repeat"] = repeat;
          rec["method"] = m.label;
          rec["final_answer"] = outcome.final_answer;
          rec["correct"] = sample.accuracy == 1;
          rec["total_tokens"] = outcome.total_tokens;
          rec["traces_started"] = outcome.traces_started;
          rec["traces_completed"] = outcome.traces_completed;
          rec["traces_gated"] = outcome.traces_gated;
          rec["stopped_by_consensus"] = outcome.stopped_by_consensus;
          rec["threshold_s"] = outcome.threshold_s;
          rec["warmup_fallback"] = outcome.warmup_fallback;
          rec["kept_trace_ids"] = outcome.kept_trace_ids;
          result.outcomes.push_back(std::move(rec));
        } catch (const EmptyVoteError&) {
          // Degenerate set with nothing answerable: score a miss and charge
          // the whole working set (every trace would have been generated).
          sample.accuracy = 0;
          sample.tokens = total_tokens(w);
        }
        break;
      }
    }
  }
  return result;
}

template <typename Fn>
void parallel_for(std::size_t count, int parallelism, Fn&& fn) {
  if (parallelism <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const int n_threads = std::min<int>(parallelism, static_cast<int>(count));
  threads.reserve(static_cast<std::size_t>(n_threads));
  for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double sample_stderr(const std::vector<double>& xs, double mean) {
  const std::size_t r = xs.size();
  if (r < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(r) * static_cast<double>(r - 1)));
}

}  // namespace

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

RunReport run_experiment(const ExperimentConfig& cfg, const ProblemSet& set) {
  cfg.validate();
  if (set.pools.empty()) throw ConfigError("problem set is empty");

  std::vector<ResolvedMethod> methods;
  methods.reserve(cfg.methods.size());
  for (const MethodSpec& m : cfg.methods) methods.push_back(resolve_method(m, cfg));

  // Preflight: ground truth and K bounds per pool.
  for (const TracePool& pool : set.pools) {
    if (!pool.ground_truth) {
      throw ScoringError("problem '" + pool.problem_id +
                         "' has no ground truth; accuracy scoring impossible");
    }
    for (const ResolvedMethod& m : methods) {
      if (m.spec.kind != MethodKind::Pass1 &&
          static_cast<std::size_t>(m.spec.K) > pool.size()) {
        throw ConfigError("method '" + m.label + "' K=" + std::to_string(m.spec.K) +
                          " exceeds pool '" + pool.problem_id + "' size " +
                          std::to_string(pool.size()));
      }
    }
  }

  const std::size_t n_problems = set.pools.size();
  const auto repeats = static_cast<std::size_t>(cfg.repeats);
  std::vector<TaskResult> task_results(n_problems * repeats);
  parallel_for(task_results.size(), cfg.parallelism, [&](std::size_t idx) {
    const std::size_t p = idx / repeats;
    const int repeat = static_cast<int>(idx % repeats);
    task_results[idx] =
        evaluate_task(set.pools[p], *set.pools[p].ground_truth, repeat, methods, cfg);
  });

  RunReport report;
  report.base_seed = cfg.base_seed;
  report.config_hash = config_hash(cfg);

  for (const TaskResult& tr : task_results) {
    for (const std::string& h : tr.ws_hashes) report.working_set_hashes.push_back(h);
    for (const ordered_json& rec : tr.outcomes) report.online_outcomes.push_back(rec);
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const ResolvedMethod& m = methods[mi];
    std::vector<ReportRow> method_rows;
    for (std::size_t p = 0; p < n_problems; ++p) {
      const TracePool& pool = set.pools[p];
      ReportRow row;
      row.method = m.label;
      row.problem_id = pool.problem_id;
      row.repeats = cfg.repeats;
      if (m.spec.kind != MethodKind::Pass1) {
        row.params.emplace_back("K", std::to_string(m.spec.K));
      }
      if (m.spec.kind == MethodKind::Pass1) {
        double acc = 0.0;
        for (const Trace& t : pool.traces) acc += trace_is_correct(t, *pool.ground_truth);
        row.mean_accuracy = pool.traces.empty() ? 0.0 : acc / static_cast<double>(pool.size());
        row.stderr_accuracy = 0.0;
        row.mean_tokens = pool.traces.empty()
                              ? 0.0
                              : static_cast<double>(total_tokens(pool)) /
                                    static_cast<double>(pool.size());
      } else {
        std::vector<double> accs;
        accs.reserve(repeats);
        std::int64_t token_sum = 0;
        for (std::size_t r = 0; r < repeats; ++r) {
          const MethodSample& s = task_results[p * repeats + r].samples[mi];
          accs.push_back(static_cast<double>(s.accuracy));
          token_sum += s.tokens;
        }
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= static_cast<double>(repeats);
        row.mean_accuracy = mean;
        row.stderr_accuracy = sample_stderr(accs, mean);
        row.mean_tokens = static_cast<double>(token_sum) / static_cast<double>(repeats);
      }
      method_rows.push_back(std::move(row));
    }
    // Macro average over problems; tokens are summed (total cost of the set).
    ReportRow macro;
    macro.method = m.label;
    macro.problem_id = std::string(kMacroScope);
    macro.repeats = cfg.repeats;
    if (m.spec.kind != MethodKind::Pass1) {
      macro.params.emplace_back("K", std::to_string(m.spec.K));
    }
    double var_sum = 0.0;
    for (const ReportRow& row : method_rows) {
      macro.mean_accuracy += row.mean_accuracy;
      macro.mean_tokens += row.mean_tokens;
      var_sum += row.stderr_accuracy * row.stderr_accuracy;
    }
    macro.mean_accuracy /= static_cast<double>(n_problems);
    macro.stderr_accuracy = std::sqrt(var_sum) / static_cast<double>(n_problems);
    for (ReportRow& row : method_rows) report.rows.push_back(std::move(row));
    report.rows.push_back(std::move(macro));
  }
  return report;
}

// ---------------------------------------------------------------------------
// run_ablation
// ---------------------------------------------------------------------------

namespace {

struct GridPoint {
  std::optional<double> tau;
  std::optional<int> n_init;
  std::optional<double> eta;
  std::optional<int> window_size;
  std::optional<metrics::Measure> measure;
  std::optional<int> K;

  std::vector<std::pair<std::string, std::string>> tags() const {
    std::vector<std::pair<std::string, std::string>> t;
    if (tau) t.emplace_back("tau", fmt_double(*tau));
    if (n_init) t.emplace_back("n_init", std::to_string(*n_init));
    if (eta) t.emplace_back("eta", fmt_double(*eta));
    if (window_size) t.emplace_back("window_size", std::to_string(*window_size));
    if (measure) t.emplace_back("measure", std::string(metrics::measure_name(*measure)));
    if (K) t.emplace_back("K", std::to_string(*K));
    return t;
  }
};

std::vector<GridPoint> expand_grid(const ParameterGrid& grid) {
  std::vector<GridPoint> points{GridPoint{}};
  const auto expand = [&points](const auto& values, auto setter) {
    if (values.empty()) return;
    std::vector<GridPoint> next;
    next.reserve(points.size() * values.size());
    for (const GridPoint& p : points) {
      for (const auto& v : values) {
        GridPoint q = p;
        setter(q, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  };
  expand(grid.tau, [](GridPoint& p, double v) { p.tau = v; });
  expand(grid.n_init, [](GridPoint& p, int v) { p.n_init = v; });
  expand(grid.eta, [](GridPoint& p, double v) { p.eta = v; });
  expand(grid.window_size, [](GridPoint& p, int v) { p.window_size = v; });
  expand(grid.measure, [](GridPoint& p, metrics::Measure v) { p.measure = v; });
  expand(grid.K, [](GridPoint& p, int v) { p.K = v; });
  return points;
}

ExperimentConfig apply_point(const ExperimentConfig& cfg, const GridPoint& point) {
  ExperimentConfig out = cfg;
  if (point.window_size) out.metric_cfg.window_size = *point.window_size;
  for (MethodSpec& m : out.methods) {
    if (point.tau) m.online.tau = *point.tau;
    if (point.n_init) m.online.n_init = *point.n_init;
    if (point.eta &&
        (m.kind == MethodKind::MeasureTopEta || m.kind == MethodKind::OnlineBudgetOnly)) {
      m.eta = *point.eta;
    }
    if (point.measure) m.measure = *point.measure;
    if (point.K && m.kind != MethodKind::Pass1) m.K = *point.K;
  }
  return out;
}

}  // namespace

RunReport run_ablation(const ExperimentConfig& cfg, const ProblemSet& set,
                       const ParameterGrid& grid) {
  const std::vector<GridPoint> points = expand_grid(grid);
  RunReport merged;
  merged.base_seed = cfg.base_seed;
  merged.config_hash = config_hash(cfg);
  for (const GridPoint& point : points) {
    const ExperimentConfig point_cfg = apply_point(cfg, point);
    RunReport part = run_experiment(point_cfg, set);  // same base seed: paired
    const auto tags = point.tags();
    for (ReportRow& row : part.rows) {
      // Grid coordinates override any per-method tags of the same name.
      for (const auto& [key, value] : tags) {
        std::erase_if(row.params, [&](const auto& kv) { return kv.first == key; });
        row.params.emplace_back(key, value);
      }
      merged.rows.push_back(std::move(row));
    }
    for (auto& h : part.working_set_hashes) merged.working_set_hashes.push_back(std::move(h));
    for (auto& rec : part.online_outcomes) {
      for (const auto& [key, value] : tags) rec["grid_" + key] = value;
      merged.online_outcomes.push_back(std::move(rec));
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string>& param_columns() {
  static const std::vector<std::string> cols = {"tau",     "n_init",  "eta",
                                                "window_size", "measure", "K"};
  return cols;
}

std::string param_lookup(const ReportRow& row, const std::string& key) {
  for (const auto& [k, v] : row.params) {
    if (k == key) return v;
  }
  return "";
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write report file: " + path.string());
  out << content;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

std::string report_csv(const RunReport& report) {
  std::string out = "method,problem_id";
  for (const std::string& c : param_columns()) out += "," + c;
  out += ",mean_accuracy,stderr_accuracy,mean_tokens,repeats,config_hash,base_seed\n";
  const std::string provenance =
      "," + report.config_hash + "," + std::to_string(report.base_seed) + "\n";
  for (const ReportRow& row : report.rows) {
    out += csv_escape(row.method) + "," + csv_escape(row.problem_id);
    for (const std::string& c : param_columns()) out += "," + param_lookup(row, c);
    out += "," + fmt_double(row.mean_accuracy) + "," + fmt_double(row.stderr_accuracy) + "," +
           fmt_double(row.mean_tokens) + "," + std::to_string(row.repeats) + provenance;
  }
  return out;
}

std::string curves_csv(const RunReport& report) {
  // Tidy accuracy-vs-tokens rows for plotting scaling curves.
  std::string out = "method,problem_id,K,mean_tokens,mean_accuracy\n";
  for (const ReportRow& row : report.rows) {
    if (row.problem_id == kMacroScope) continue;
    const std::string k = param_lookup(row, "K");
    if (k.empty()) continue;
    out += csv_escape(row.method) + "," + csv_escape(row.problem_id) + "," + k + "," +
           fmt_double(row.mean_tokens) + "," + fmt_double(row.mean_accuracy) + "\n";
  }
  return out;
}

ordered_json report_json(const RunReport& report) {
  ordered_json j;
  j["schema_version"] = report.schema_version;
  j["config_hash"] = report.config_hash;
  j["base_seed"] = report.base_seed;
  ordered_json rows = ordered_json::array();
  for (const ReportRow& row : report.rows) {
    ordered_json r;
    r["method"] = row.method;
    r["problem_id"] = row.problem_id;
    ordered_json params;
    for (const auto& [k, v] : row.params) params[k] = v;
    r["params"] = std::move(params);
    r["mean_accuracy"] = row.mean_accuracy;
    r["stderr_accuracy"] = row.stderr_accuracy;
    r["mean_tokens"] = row.mean_tokens;
    r["repeats"] = row.repeats;
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  j["working_set_hashes"] = report.working_set_hashes;
  return j;
}

std::string method_column_label(const ReportRow& row) {
  std::string label = row.method;
  std::string suffix;
  for (const auto& [k, v] : row.params) {
    if (k == "K") continue;  // already encoded in most method labels
    if (!suffix.empty()) suffix += ",";
    suffix += k + "=" + v;
  }
  if (!suffix.empty()) label += " [" + suffix + "]";
  return label;
}

std::string report_markdown(const RunReport& report) {
  // One row per problem, one column per method (+ grid point), accuracy as a
  // percentage with the tokens alongside.
  std::vector<std::string> columns;
  std::vector<std::string> problems;
  std::map<std::pair<std::string, std::string>, const ReportRow*> cells;
  for (const ReportRow& row : report.rows) {
    const std::string col = method_column_label(row);
    if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
    if (row.problem_id != kMacroScope &&
        std::find(problems.begin(), problems.end(), row.problem_id) == problems.end()) {
      problems.push_back(row.problem_id);
    }
    cells[{col, row.problem_id}] = &row;
  }
  problems.push_back(std::string(kMacroScope));

  std::string out = "# Run report\n\n";
  out += "- config_hash: `" + report.config_hash + "`\n";
  out += "- base_seed: " + std::to_string(report.base_seed) + "\n\n";
  out += "Cells are accuracy % (mean tokens per run; macro row sums tokens across problems).\n\n";
  out += "| problem |";
  for (const std::string& c : columns) out += " " + c + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out += "---|";
  out += "\n";
  char buf[64];
  for (const std::string& p : problems) {
    out += "| " + p + " |";
    for (const std::string& c : columns) {
      const auto it = cells.find({c, p});
      if (it == cells.end()) {
        out += " - |";
        continue;
      }
      std::snprintf(buf, sizeof(buf), "%.1f (%.4g)", it->second->mean_accuracy * 100.0,
                    it->second->mean_tokens);
      out += " " + std::string(buf) + " |";
    }
    out += "\n";
  }
  return out;
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const RunReport& report, ReportFormat format,
                                               const std::filesystem::path& out_prefix) {
  std::vector<std::filesystem::path> written;
  if (out_prefix.has_parent_path()) {
    std::filesystem::create_directories(out_prefix.parent_path());
  }
  switch (format) {
    case ReportFormat::Csv: {
      const auto main_path = out_prefix.string() + ".csv";
      write_file(main_path, report_csv(report));
      written.emplace_back(main_path);
      const auto curves_path = out_prefix.string() + "_curves.csv";
      write_file(curves_path, curves_csv(report));
      written.emplace_back(curves_path);
      break;
    }
    case ReportFormat::Json: {
      const auto path = out_prefix.string() + ".json";
      write_file(path, report_json(report).dump(2) + "\n");
      written.emplace_back(path);
      break;
    }
    case ReportFormat::Markdown: {
      const auto path = out_prefix.string() + ".md";
      write_file(path, report_markdown(report));
      written.emplace_back(path);
      break;
    }
  }
  if (!report.online_outcomes.empty()) {
    std::string lines;
    for (const ordered_json& rec : report.online_outcomes) lines += rec.dump() + "\n";
    const auto path = out_prefix.string() + "_outcomes.jsonl";
    write_file(path, lines);
    written.emplace_back(path);
  }
  return written;
}

// ---------------------------------------------------------------------------
// Problem-set persistence
// ---------------------------------------------------------------------------

ProblemSet load_problem_set(const std::filesystem::path& path) {
  ProblemSet set;
  if (std::filesystem::is_directory(path)) {
    const auto manifest = path / "set.json";
    if (std::filesystem::exists(manifest)) return load_problem_set(manifest);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw IoError("no .jsonl pools in " + path.string());
    set.name = path.filename().string();
    for (const auto& f : files) set.pools.push_back(load_pool(f));
  } else if (path.extension() == ".jsonl") {
    set.name = path.stem().string();
    set.pools.push_back(load_pool(path));
  } else {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open problem set: " + path.string());
    json manifest;
    try {
      manifest = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError("invalid set manifest " + path.string() + ": " + e.what());
    }
    set.name = manifest.value("name", path.stem().string());
    if (manifest.contains("metadata")) {
      for (const auto& [k, v] : manifest.at("metadata").items()) {
        set.metadata[k] = v.get<std::string>();
      }
    }
    const auto base = path.parent_path();
    for (const auto& rel : manifest.at("pools")) {
      set.pools.push_back(load_pool(base / rel.get<std::string>()));
    }
  }
  set.validate();
  return set;
}

void save_problem_set(const ProblemSet& set, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ordered_json manifest;
  manifest["name"] = set.name;
  ordered_json meta;
  for (const auto& [k, v] : set.metadata) meta[k] = v;
  manifest["metadata"] = std::move(meta);
  ordered_json pool_files = ordered_json::array();
  for (const TracePool& pool : set.pools) {
    const std::string file = pool.problem_id + ".jsonl";
    save_pool(pool, dir / file);
    pool_files.push_back(file);
  }
  manifest["pools"] = std::move(pool_files);
  write_file(dir / "set.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Config (de)serialization + hash
// ---------------------------------------------------------------------------

namespace {

json metric_cfg_to_json(const metrics::MetricConfig& m) {
  json j;
  j["top_k"] = m.top_k;
  j["window_size"] = m.window_size;
  j["bottom_fraction"] = m.bottom_fraction;
  j["tail_tokens"] = m.tail_tokens;
  if (m.tail_fraction) j["tail_fraction"] = *m.tail_fraction;
  if (m.head_fraction) j["head_fraction"] = *m.head_fraction;
  return j;
}

metrics::MetricConfig metric_cfg_from_json(const json& j) {
  metrics::MetricConfig m;
  m.top_k = j.value("top_k", m.top_k);
  m.window_size = j.value("window_size", m.window_size);
  m.bottom_fraction = j.value("bottom_fraction", m.bottom_fraction);
  m.tail_tokens = j.value("tail_tokens", m.tail_tokens);
  if (j.contains("tail_fraction")) m.tail_fraction = j.at("tail_fraction").get<double>();
  if (j.contains("head_fraction")) m.head_fraction = j.at("head_fraction").get<double>();
  return m;
}

json method_to_json(const MethodSpec& m) {
  json j;
  j["kind"] = std::string(method_kind_name(m.kind));
  if (!m.name.empty()) j["name"] = m.name;
  j["measure"] = std::string(metrics::measure_name(m.measure));
  j["eta"] = m.eta;
  j["K"] = m.K;
  j["n_init"] = m.online.n_init;
  j["tau"] = m.online.tau;
  j["strict_empty_vote"] = m.online.strict_empty_vote;
  j["gate_enabled"] = m.online.gate_cfg.enabled;
  return j;
}

MethodSpec method_from_json(const json& j) {
  MethodSpec m;
  m.kind = method_kind_from_name(j.at("kind").get<std::string>());
  m.name = j.value("name", std::string());
  if (j.contains("measure")) {
    m.measure = metrics::measure_from_name(j.at("measure").get<std::string>());
  }
  m.eta = j.value("eta", m.eta);
  m.K = j.value("K", m.K);
  m.online.n_init = j.value("n_init", m.online.n_init);
  m.online.tau = j.value("tau", m.online.tau);
  m.online.strict_empty_vote = j.value("strict_empty_vote", m.online.strict_empty_vote);
  m.online.gate_cfg.enabled = j.value("gate_enabled", true);
  return m;
}

}  // namespace

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["problem_set"] = cfg.problem_set;
  j["repeats"] = cfg.repeats;
  j["base_seed"] = cfg.base_seed;
  j["parallelism"] = cfg.parallelism;
  j["metric"] = metric_cfg_to_json(cfg.metric_cfg);
  json methods = json::array();
  for (const MethodSpec& m : cfg.methods) methods.push_back(method_to_json(m));
  j["methods"] = std::move(methods);
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  cfg.problem_set = j.value("problem_set", std::string());
  cfg.repeats = j.value("repeats", cfg.repeats);
  cfg.base_seed = j.value("base_seed", cfg.base_seed);
  cfg.parallelism = j.value("parallelism", cfg.parallelism);
  if (j.contains("metric")) cfg.metric_cfg = metric_cfg_from_json(j.at("metric"));
  if (j.contains("methods")) {
    for (const auto& mj : j.at("methods")) cfg.methods.push_back(method_from_json(mj));
  }
  return cfg;
}

ParameterGrid parameter_grid_from_json(const json& j) {
  ParameterGrid g;
  if (j.contains("tau")) g.tau = j.at("tau").get<std::vector<double>>();
  if (j.contains("n_init")) g.n_init = j.at("n_init").get<std::vector<int>>();
  if (j.contains("eta")) g.eta = j.at("eta").get<std::vector<double>>();
  if (j.contains("window_size")) g.window_size = j.at("window_size").get<std::vector<int>>();
  if (j.contains("measure")) {
    for (const auto& m : j.at("measure")) {
      g.measure.push_back(metrics::measure_from_name(m.get<std::string>()));
    }
  }
  if (j.contains("K")) g.K = j.at("K").get<std::vector<int>>();
  return g;
}

RunReport report_from_json(const json& j) {
  RunReport report;
  report.schema_version = j.value("schema_version", 1);
  report.config_hash = j.value("config_hash", std::string());
  report.base_seed = j.value("base_seed", std::uint64_t{0});
  if (j.contains("rows")) {
    for (const auto& rj : j.at("rows")) {
      ReportRow row;
      row.method = rj.at("method").get<std::string>();
      row.problem_id = rj.at("problem_id").get<std::string>();
      if (rj.contains("params")) {
        for (const auto& [k, v] : rj.at("params").items()) {
          row.params.emplace_back(k, v.get<std::string>());
        }
      }
      row.mean_accuracy = rj.at("mean_accuracy").get<double>();
      row.stderr_accuracy = rj.at("stderr_accuracy").get<double>();
      row.mean_tokens = rj.at("mean_tokens").get<double>();
      row.repeats = rj.at("repeats").get<int>();
      report.rows.push_back(std::move(row));
    }
  }
  if (j.contains("working_set_hashes")) {
    report.working_set_hashes = j.at("working_set_hashes").get<std::vector<std::string>>();
  }
  return report;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // nlohmann::json keeps keys sorted, so dump() is canonical.
  const std::string canonical = experiment_config_to_json(cfg).dump();
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical)));
  return buf;
}

}  // namespace deepconf::harness
