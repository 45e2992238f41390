// deepconf command-line front end.
//
// Verbs:
//   synth-pool     generate synthetic trace pools
//   ingest         normalize + validate external trace JSONL into a pool set
//   generate-pool  build pools from a live chat-completions endpoint
//   offline        filtered/weighted voting experiments over stored pools
//   online         gated adaptive generation (simulated over pools)
//   ablate         parameter sweeps with paired seeds
//   report         re-emit a saved report in another format
//
// Exit codes: 0 success, 2 config error, 3 data validation error,
// 4 scoring error, 1 anything else.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "deepconf/answer.hpp"
#include "deepconf/client.hpp"
#include "deepconf/errors.hpp"
#include "deepconf/harness.hpp"
#include "deepconf/kernels.hpp"
#include "deepconf/synth.hpp"
#include "deepconf/trace_io.hpp"

using namespace deepconf;
using nlohmann::json;

namespace {

struct RunOpts {
  std::string pools;
  std::string config;
  std::string out = "report";
  std::uint64_t seed = 0;
  int repeats = 64;
  int parallelism = 1;
  int top_k = 0;  // 0 = use the smallest candidate count in the set
  int window = 2048;
  std::vector<std::string> formats = {"csv", "json", "md"};
};

void add_run_options(CLI::App* cmd, RunOpts& opts) {
  cmd->add_option("--pools", opts.pools, "Problem set: directory, set.json, or one .jsonl")
      ->required();
  cmd->add_option("--config", opts.config, "JSON config file; flags override its fields");
  cmd->add_option("--out", opts.out, "Report path prefix");
  cmd->add_option("--seed", opts.seed, "Base seed for the seed-splitting scheme");
  cmd->add_option("--repeats", opts.repeats, "Independent runs with fresh resampling");
  cmd->add_option("--parallelism", opts.parallelism, "Worker threads over (problem, repeat)");
  cmd->add_option("--top-k", opts.top_k, "Candidates per token (0 = auto from the data)");
  cmd->add_option("--window", opts.window, "Group window size in tokens");
  cmd->add_option("--format", opts.formats, "Report formats: csv, json, md")
      ->check(CLI::IsMember({"csv", "json", "md"}));
}

int resolve_top_k(const ProblemSet& set, int requested) {
  if (requested > 0) return requested;
  int smallest = 0;
  for (const TracePool& pool : set.pools) {
    for (const Trace& t : pool.traces) {
      for (const TokenRecord& r : t.tokens) {
        if (smallest == 0 || r.candidate_count() < smallest) smallest = r.candidate_count();
      }
    }
  }
  if (smallest == 0) throw ConfigError("cannot infer top_k from an empty problem set");
  return smallest;
}

harness::ExperimentConfig base_experiment_config(const RunOpts& opts, const ProblemSet& set) {
  harness::ExperimentConfig cfg;
  if (!opts.config.empty()) {
    std::ifstream in(opts.config);
    if (!in) throw ConfigError("cannot open config file: " + opts.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }
    cfg = harness::experiment_config_from_json(j);
  }
  cfg.problem_set = opts.pools;
  cfg.base_seed = opts.seed;
  cfg.repeats = opts.repeats;
  cfg.parallelism = opts.parallelism;
  cfg.metric_cfg.window_size = opts.window;
  cfg.metric_cfg.top_k = resolve_top_k(set, opts.top_k);
  return cfg;
}

void emit_all(const harness::RunReport& report, const RunOpts& opts) {
  std::set<std::string> written;
  for (const std::string& fmt : opts.formats) {
    const auto format = fmt == "csv"    ? harness::ReportFormat::Csv
                        : fmt == "json" ? harness::ReportFormat::Json
                                        : harness::ReportFormat::Markdown;
    for (const auto& path : harness::emit_report(report, format, opts.out)) {
      if (written.insert(path.string()).second) {
        std::cout << "wrote " << path.string() << "\n";
      }
    }
  }
  std::cout << "config_hash " << report.config_hash << "\n";
}

// --- subcommand bodies -------------------------------------------------------

int run_synth_pool(const std::string& out_dir, synth::SynthConfig cfg) {
  const ProblemSet set = synth::make_problem_set(cfg);
  harness::save_problem_set(set, out_dir);
  std::cout << "wrote " << set.pools.size() << " pools under " << out_dir << "\n";
  return 0;
}

int run_ingest(const std::vector<std::string>& inputs, const std::string& out_dir,
               const std::string& logprob_base, bool keep_boxed, bool case_fold,
               const std::string& set_name) {
  NormalizeOptions norm;
  norm.strip_boxed = !keep_boxed;
  norm.case_fold = case_fold;
  double scale = 1.0;
  if (logprob_base == "10") {
    scale = std::log(10.0);
  } else if (logprob_base == "2") {
    scale = std::log(2.0);
  } else if (logprob_base != "e") {
    throw ConfigError("--logprob-base must be e, 10, or 2");
  }

  ProblemSet set;
  set.name = set_name;
  set.metadata["normalize.strip_boxed"] = norm.strip_boxed ? "true" : "false";
  set.metadata["normalize.case_fold"] = norm.case_fold ? "true" : "false";
  set.metadata["logprob_base"] = logprob_base;
  for (const std::string& input : inputs) {
    TracePool pool = load_pool(input);
    if (scale != 1.0) rescale_logprobs(pool, scale);
    if (pool.ground_truth) pool.ground_truth = normalize_answer(*pool.ground_truth, norm);
    for (Trace& t : pool.traces) {
      if (t.answer) t.answer = normalize_answer(*t.answer, norm);
      if (pool.ground_truth) {
        t.correct = t.answer.has_value() && *t.answer == *pool.ground_truth;
      }
    }
    pool.validate();
    set.pools.push_back(std::move(pool));
  }
  set.validate();
  harness::save_problem_set(set, out_dir);
  std::cout << "ingested " << set.pools.size() << " pools into " << out_dir << "\n";
  return 0;
}

int run_generate_pool(const std::string& problems_file, const std::string& out_dir,
                      const std::string& model, const std::string& models_config,
                      std::size_t count, int batch_n, int logprob_candidates,
                      int max_tokens) {
  std::ifstream in(problems_file);
  if (!in) throw ConfigError("cannot open problems file: " + problems_file);
  json problems;
  try {
    problems = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("problems file is not valid JSON: " + std::string(e.what()));
  }

  client::GenRequest tmpl;
  tmpl.model = model;
  tmpl.n = batch_n;
  tmpl.logprob_candidates = logprob_candidates;
  tmpl.max_tokens = max_tokens;
  tmpl.messages = {{"user", "placeholder"}};
  if (!models_config.empty()) {
    std::ifstream mc(models_config);
    if (!mc) throw ConfigError("cannot open models config: " + models_config);
    const json presets = json::parse(mc);
    if (presets.contains(model)) {
      const json& p = presets.at(model);
      tmpl.temperature = p.value("temperature", tmpl.temperature);
      tmpl.top_p = p.value("top_p", tmpl.top_p);
      if (p.contains("top_k") && !p.at("top_k").is_null()) {
        tmpl.top_k = p.at("top_k").get<int>();
      }
      if (max_tokens == 0) tmpl.max_tokens = p.value("max_tokens", 4096);
    }
  }
  if (tmpl.max_tokens < 1) throw ConfigError("max_tokens must be >= 1 (set a preset or flag)");

  client::ChatClient chat(client::transport_from_env());
  std::filesystem::create_directories(out_dir);
  for (const json& pj : problems) {
    client::ProblemPrompt prompt;
    prompt.problem_id = pj.at("problem_id").get<std::string>();
    prompt.statement = pj.at("statement").get<std::string>();
    if (pj.contains("ground_truth") && !pj.at("ground_truth").is_null()) {
      prompt.ground_truth = pj.at("ground_truth").get<std::string>();
    }
    if (pj.contains("system_prompt") && !pj.at("system_prompt").is_null()) {
      prompt.system_prompt = pj.at("system_prompt").get<std::string>();
    }
    const auto out = std::filesystem::path(out_dir) / (prompt.problem_id + ".jsonl");
    const TracePool pool = client::build_pool(chat, prompt, count, tmpl, out);
    std::cout << prompt.problem_id << ": " << pool.size() << " traces\n";
  }
  return 0;
}

std::vector<metrics::Measure> parse_measures(const std::vector<std::string>& names) {
  std::vector<metrics::Measure> out;
  for (const std::string& name : names) out.push_back(metrics::measure_from_name(name));
  return out;
}

int run_offline(const RunOpts& opts, const std::vector<int>& ks,
                const std::vector<std::string>& measure_names,
                const std::vector<double>& etas) {
  const ProblemSet set = harness::load_problem_set(opts.pools);
  harness::ExperimentConfig cfg = base_experiment_config(opts, set);
  if (cfg.methods.empty()) {
    harness::MethodSpec pass1;
    pass1.kind = harness::MethodKind::Pass1;
    cfg.methods.push_back(pass1);
    for (int k : ks) {
      harness::MethodSpec cons;
      cons.kind = harness::MethodKind::Cons;
      cons.K = k;
      cfg.methods.push_back(cons);
      for (const metrics::Measure m : parse_measures(measure_names)) {
        harness::MethodSpec weighted;
        weighted.kind = harness::MethodKind::Measure;
        weighted.measure = m;
        weighted.K = k;
        cfg.methods.push_back(weighted);
        for (double eta : etas) {
          harness::MethodSpec filtered;
          filtered.kind = harness::MethodKind::MeasureTopEta;
          filtered.measure = m;
          filtered.eta = eta;
          filtered.K = k;
          cfg.methods.push_back(filtered);
        }
      }
    }
  }
  emit_all(harness::run_experiment(cfg, set), opts);
  return 0;
}

int run_online_cmd(const RunOpts& opts, const std::vector<int>& budgets,
                   const std::vector<std::string>& variants, int n_init, double tau,
                   double budget_only_eta, bool strict_empty_vote) {
  const ProblemSet set = harness::load_problem_set(opts.pools);
  harness::ExperimentConfig cfg = base_experiment_config(opts, set);
  if (cfg.methods.empty()) {
    for (int budget : budgets) {
      harness::MethodSpec cons;
      cons.kind = harness::MethodKind::Cons;
      cons.K = budget;
      cfg.methods.push_back(cons);
      for (const std::string& variant : variants) {
        harness::MethodSpec m;
        if (variant == "low") {
          m.kind = harness::MethodKind::OnlineLow;
        } else if (variant == "high") {
          m.kind = harness::MethodKind::OnlineHigh;
        } else if (variant == "budget-only") {
          m.kind = harness::MethodKind::OnlineBudgetOnly;
          m.eta = budget_only_eta;
        } else {
          throw ConfigError("unknown online variant '" + variant + "'");
        }
        m.K = budget;
        m.online.n_init = n_init;
        m.online.tau = tau;
        m.online.strict_empty_vote = strict_empty_vote;
        cfg.methods.push_back(m);
      }
    }
  }
  emit_all(harness::run_experiment(cfg, set), opts);
  return 0;
}

harness::ParameterGrid parse_sweeps(const std::vector<std::string>& sweeps) {
  json grid_json = json::object();
  for (const std::string& sweep : sweeps) {
    const auto eq = sweep.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--sweep must look like key=v1,v2,... got '" + sweep + "'");
    }
    const std::string key = sweep.substr(0, eq);
    json values = json::array();
    std::string item;
    std::istringstream stream(sweep.substr(eq + 1));
    while (std::getline(stream, item, ',')) {
      if (key == "measure") {
        values.push_back(item);
      } else if (key == "tau" || key == "eta") {
        values.push_back(std::stod(item));
      } else if (key == "n_init" || key == "window_size" || key == "K") {
        values.push_back(std::stoi(item));
      } else {
        throw ConfigError("unknown sweep dimension '" + key + "'");
      }
    }
    grid_json[key] = std::move(values);
  }
  return harness::parameter_grid_from_json(grid_json);
}

int run_ablate(const RunOpts& opts, const std::vector<std::string>& method_names, int K,
               int n_init, double tau, double eta, const std::vector<std::string>& sweeps) {
  const ProblemSet set = harness::load_problem_set(opts.pools);
  harness::ExperimentConfig cfg = base_experiment_config(opts, set);
  if (cfg.methods.empty()) {
    for (const std::string& name : method_names) {
      harness::MethodSpec m;
      m.kind = harness::method_kind_from_name(name);
      m.K = K;
      m.eta = eta;
      m.online.n_init = n_init;
      m.online.tau = tau;
      cfg.methods.push_back(m);
    }
  }
  emit_all(harness::run_ablation(cfg, set, parse_sweeps(sweeps)), opts);
  return 0;
}

int run_report(const std::string& in_path, const std::string& out_prefix,
               const std::vector<std::string>& formats) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open report: " + in_path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("report is not valid JSON: " + std::string(e.what()));
  }
  const harness::RunReport report = harness::report_from_json(j);
  for (const std::string& fmt : formats) {
    const auto format = fmt == "csv"    ? harness::ReportFormat::Csv
                        : fmt == "json" ? harness::ReportFormat::Json
                                        : harness::ReportFormat::Markdown;
    for (const auto& path : harness::emit_report(report, format, out_prefix)) {
      std::cout << "wrote " << path.string() << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confidence-filtered voting and confidence-gated generation over "
               "LLM reasoning-trace pools"};
  app.require_subcommand(1);

  // synth-pool
  auto* synth_cmd = app.add_subcommand("synth-pool", "Generate synthetic trace pools");
  std::string synth_out;
  synth::SynthConfig synth_cfg;
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--problems", synth_cfg.problems, "Number of problems");
  synth_cmd->add_option("--traces", synth_cfg.traces_per_problem, "Traces per problem");
  synth_cmd->add_option("--candidates", synth_cfg.candidate_count, "Candidates per token");
  synth_cmd->add_option("--min-tokens", synth_cfg.min_tokens, "Minimum trace length");
  synth_cmd->add_option("--max-tokens", synth_cfg.max_tokens, "Maximum trace length");
  synth_cmd->add_option("--hard-fraction", synth_cfg.hard_fraction,
                        "Fraction of problems where the majority answer is wrong");
  synth_cmd->add_option("--dip-depth", synth_cfg.dip_depth, "Confidence drop inside the dip");
  synth_cmd->add_option("--dip-tokens", synth_cfg.dip_tokens, "Dip length in tokens");
  synth_cmd->add_option("--sigma", synth_cfg.sigma, "Per-token confidence noise");
  synth_cmd->add_option("--seed", synth_cfg.seed, "Generator seed");

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Normalize external trace JSONL");
  std::vector<std::string> ingest_inputs;
  std::string ingest_out;
  std::string logprob_base = "e";
  std::string ingest_name = "ingested";
  bool keep_boxed = false;
  bool case_fold = false;
  ingest_cmd->add_option("--in", ingest_inputs, "Input pool .jsonl files")->required();
  ingest_cmd->add_option("--out", ingest_out, "Output directory")->required();
  ingest_cmd->add_option("--logprob-base", logprob_base, "Logprob base of the input: e, 10, 2");
  ingest_cmd->add_option("--name", ingest_name, "Problem set name");
  ingest_cmd->add_flag("--keep-boxed", keep_boxed, "Do not strip surrounding \\boxed{}");
  ingest_cmd->add_flag("--case-fold", case_fold, "Lowercase answers before comparison");

  // generate-pool
  auto* gen_cmd = app.add_subcommand("generate-pool",
                                     "Build pools from a chat-completions endpoint "
                                     "(DEEPCONF_API_BASE / DEEPCONF_API_KEY)");
  std::string gen_problems, gen_out, gen_model;
  std::string gen_models_config = "configs/models.json";
  std::size_t gen_count = 16;
  int gen_batch = 4;
  int gen_logprobs = 20;
  int gen_max_tokens = 0;
  gen_cmd->add_option("--problems", gen_problems, "JSON file with problem prompts")->required();
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();
  gen_cmd->add_option("--model", gen_model, "Model name")->required();
  gen_cmd->add_option("--models-config", gen_models_config, "Per-model sampling presets");
  gen_cmd->add_option("--count", gen_count, "Traces per problem");
  gen_cmd->add_option("--batch-n", gen_batch, "Parallel samples per request");
  gen_cmd->add_option("--logprob-candidates", gen_logprobs, "top_logprobs per token");
  gen_cmd->add_option("--max-tokens", gen_max_tokens, "Max generated tokens (0 = preset)");

  // offline
  auto* offline_cmd = app.add_subcommand("offline", "Offline voting experiments");
  RunOpts offline_opts;
  add_run_options(offline_cmd, offline_opts);
  std::vector<int> offline_ks = {16};
  std::vector<std::string> offline_measures = {"lowest_group"};
  std::vector<double> offline_etas = {10.0, 90.0};
  offline_cmd->add_option("--K", offline_ks, "Working-set sizes");
  offline_cmd->add_option("--measure", offline_measures,
                          "Confidence measures: mean, bottom_q, lowest_group, tail, head");
  offline_cmd->add_option("--eta", offline_etas, "Retention percentages for filtering");

  // online
  auto* online_cmd = app.add_subcommand("online", "Gated adaptive generation over pools");
  RunOpts online_opts;
  add_run_options(online_cmd, online_opts);
  std::vector<int> online_budgets = {32};
  std::vector<std::string> online_variants = {"low", "high"};
  int online_n_init = 16;
  double online_tau = 0.95;
  double online_budget_eta = 10.0;
  bool online_strict = false;
  online_cmd->add_option("--budget", online_budgets, "Trace budgets (working-set sizes)");
  online_cmd->add_option("--variant", online_variants, "Variants: low, high, budget-only");
  online_cmd->add_option("--n-init", online_n_init, "Warmup trace count");
  online_cmd->add_option("--tau", online_tau, "Consensus threshold");
  online_cmd->add_option("--budget-only-eta", online_budget_eta,
                         "Retention for the budget-only variant");
  online_cmd->add_flag("--strict-empty-vote", online_strict,
                       "Error instead of falling back to unfiltered warmup votes");

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "Parameter sweeps with paired seeds");
  RunOpts ablate_opts;
  add_run_options(ablate_cmd, ablate_opts);
  std::vector<std::string> ablate_methods = {"online_low"};
  std::vector<std::string> ablate_sweeps;
  int ablate_K = 32;
  int ablate_n_init = 16;
  double ablate_tau = 0.95;
  double ablate_eta = 10.0;
  ablate_cmd->add_option("--method", ablate_methods, "Method kinds to sweep");
  ablate_cmd->add_option("--K", ablate_K, "Default working-set size");
  ablate_cmd->add_option("--n-init", ablate_n_init, "Default warmup size");
  ablate_cmd->add_option("--tau", ablate_tau, "Default consensus threshold");
  ablate_cmd->add_option("--eta", ablate_eta, "Default retention percentage");
  ablate_cmd->add_option("--sweep", ablate_sweeps,
                         "Grid dimension, e.g. tau=0.85,0.9,0.95,1.0 (repeatable; "
                         "dims: tau, n_init, eta, window_size, measure, K)")
      ->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "Re-emit a saved report");
  std::string report_in, report_out = "report";
  std::vector<std::string> report_formats = {"csv", "json", "md"};
  report_cmd->add_option("--in", report_in, "Report .json produced by a run")->required();
  report_cmd->add_option("--out", report_out, "Output path prefix");
  report_cmd->add_option("--format", report_formats, "Formats: csv, json, md")
      ->check(CLI::IsMember({"csv", "json", "md"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad flags are config errors
  }

  try {
    if (synth_cmd->parsed()) return run_synth_pool(synth_out, synth_cfg);
    if (ingest_cmd->parsed()) {
      return run_ingest(ingest_inputs, ingest_out, logprob_base, keep_boxed, case_fold,
                        ingest_name);
    }
    if (gen_cmd->parsed()) {
      return run_generate_pool(gen_problems, gen_out, gen_model, gen_models_config, gen_count,
                               gen_batch, gen_logprobs, gen_max_tokens);
    }
    if (offline_cmd->parsed()) {
      return run_offline(offline_opts, offline_ks, offline_measures, offline_etas);
    }
    if (online_cmd->parsed()) {
      return run_online_cmd(online_opts, online_budgets, online_variants, online_n_init,
                            online_tau, online_budget_eta, online_strict);
    }
    if (ablate_cmd->parsed()) {
      return run_ablate(ablate_opts, ablate_methods, ablate_K, ablate_n_init, ablate_tau,
                        ablate_eta, ablate_sweeps);
    }
    if (report_cmd->parsed()) return run_report(report_in, report_out, report_formats);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ScoringError& e) {
    std::cerr << "scoring error: " << e.what() << "\n";
    return 4;
  } catch (const EmptyVoteError& e) {
    std::cerr << "scoring error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const BoundsError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const DomainError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
