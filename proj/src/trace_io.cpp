#include "deepconf/trace_io.hpp"

#include <fstream>

#include <json.hpp>

#include "deepconf/errors.hpp"

namespace deepconf {

namespace {

using ordered_json = nlohmann::ordered_json;

Trace trace_from_json(const nlohmann::json& j) {
  Trace t;
  t.trace_id = j.at("trace_id").get<std::string>();
  if (j.contains("answer") && !j.at("answer").is_null()) {
    t.answer = j.at("answer").get<std::string>();
  }
  if (j.contains("correct") && !j.at("correct").is_null()) {
    t.correct = j.at("correct").get<bool>();
  }
  const auto& toks = j.at("tokens");
  if (!toks.is_array()) throw ParseError("'tokens' is not an array");
  t.tokens.reserve(toks.size());
  for (const auto& rec : toks) {
    if (!rec.is_array()) throw ParseError("token record is not an array");
    TokenRecord r;
    r.candidate_logprobs.reserve(rec.size());
    for (const auto& lp : rec) {
      if (!lp.is_number()) throw ParseError("logprob is not a number");
      r.candidate_logprobs.push_back(lp.get<double>());
    }
    t.tokens.push_back(std::move(r));
  }
  return t;
}

ordered_json trace_to_json(const Trace& t) {
  ordered_json j;
  j["trace_id"] = t.trace_id;
  j["answer"] = t.answer.has_value() ? ordered_json(*t.answer) : ordered_json(nullptr);
  j["correct"] = t.correct.has_value() ? ordered_json(*t.correct) : ordered_json(nullptr);
  ordered_json toks = ordered_json::array();
  for (const TokenRecord& r : t.tokens) {
    toks.push_back(r.candidate_logprobs);
  }
  j["tokens"] = std::move(toks);
  return j;
}

}  // namespace

std::string trace_to_jsonl(const Trace& trace) { return trace_to_json(trace).dump(); }

TracePool load_pool(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pool file: " + path.string());

  TracePool pool;
  std::string line;
  std::uint64_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    try {
      if (!header_seen) {
        const int version = j.at("schema_version").get<int>();
        if (version != kPoolSchemaVersion) {
          throw ParseError("unsupported schema_version " + std::to_string(version), lineno);
        }
        pool.problem_id = j.at("problem_id").get<std::string>();
        if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
          pool.ground_truth = j.at("ground_truth").get<std::string>();
        }
        header_seen = true;
      } else {
        pool.traces.push_back(trace_from_json(j));
      }
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("schema mismatch: ") + e.what(), lineno);
    }
  }
  if (!header_seen) throw ParseError("pool file has no header line: " + path.string());
  pool.validate();
  return pool;
}

void save_pool(const TracePool& pool, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write pool file: " + path.string());

  ordered_json header;
  header["problem_id"] = pool.problem_id;
  header["ground_truth"] =
      pool.ground_truth.has_value() ? ordered_json(*pool.ground_truth) : ordered_json(nullptr);
  header["schema_version"] = kPoolSchemaVersion;
  out << header.dump() << '\n';
  for (const Trace& t : pool.traces) {
    out << trace_to_json(t).dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

void rescale_logprobs(TracePool& pool, double factor) {
  for (Trace& t : pool.traces) {
    for (TokenRecord& r : t.tokens) {
      for (double& lp : r.candidate_logprobs) lp *= factor;
    }
  }
}

}  // namespace deepconf
