#include "deepconf/client.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "deepconf/errors.hpp"
#include "deepconf/trace_io.hpp"

namespace deepconf::client {

using nlohmann::json;

void GenRequest::validate() const {
  if (model.empty()) throw ConfigError("GenRequest.model is empty");
  if (messages.empty()) throw ConfigError("GenRequest.messages is empty");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (logprob_candidates < 1) throw ConfigError("logprob_candidates must be >= 1");
  if (gate_cfg && gate_cfg->enabled && logprob_candidates < 2) {
    throw ConfigError("gating requires logprob_candidates >= 2");
  }
  if (gate_cfg) gate_cfg->validate();
}

// ---------------------------------------------------------------------------
// HttpTransport
// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, std::string api_key)
    : api_key_(std::move(api_key)) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("API base URL must include a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    origin_ = base_url;
  } else {
    origin_ = base_url.substr(0, path_start);
    path_prefix_ = base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  }
}

json HttpTransport::post_chat_completions(const json& body) {
  httplib::Client cli(origin_);
  cli.set_read_timeout(600, 0);  // long completions
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const std::string path = path_prefix_ + "/chat/completions";
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("POST " + origin_ + path + " failed: " +
                         httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("POST " + path + " returned HTTP " + std::to_string(res->status) +
                         ": " + res->body.substr(0, 200));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
}

std::unique_ptr<Transport> transport_from_env() {
  const char* base = std::getenv("DEEPCONF_API_BASE");
  if (!base || !*base) {
    throw ConfigError("DEEPCONF_API_BASE is not set");
  }
  const char* key = std::getenv("DEEPCONF_API_KEY");
  return std::make_unique<HttpTransport>(base, key ? key : "");
}

// ---------------------------------------------------------------------------
// ChatClient
// ---------------------------------------------------------------------------

ChatClient::ChatClient(std::shared_ptr<Transport> transport, RetryPolicy retry,
                       NormalizeOptions norm)
    : transport_(std::move(transport)), retry_(retry), norm_(norm) {}

json ChatClient::build_body(const GenRequest& r) const {
  r.validate();
  json body;
  body["model"] = r.model;
  json msgs = json::array();
  for (const auto& [role, content] : r.messages) {
    msgs.push_back({{"role", role}, {"content", content}});
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = r.temperature;
  body["top_p"] = r.top_p;
  body["max_tokens"] = r.max_tokens;
  body["n"] = r.n;
  body["logprobs"] = true;
  body["top_logprobs"] = r.logprob_candidates;
  if (r.top_k) body["top_k"] = *r.top_k;
  if (r.gate_cfg) {
    body["vllm_xargs"] = {
        {"enable_conf", r.gate_cfg->enabled},
        {"window_size", r.gate_cfg->window_size},
        {"threshold", r.gate_cfg->threshold},
    };
  }
  return body;
}

json ChatClient::post_with_retries(const json& body) {
  int backoff_ms = retry_.initial_backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return transport_->post_chat_completions(body);
    } catch (const TransportError&) {
      if (attempt >= retry_.max_attempts) throw;
      if (backoff_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
}

namespace {

/// Candidate list for one position: sampled token's logprob first, then the
/// remaining top candidates in descending order.
TokenRecord record_from_entry(const json& entry) {
  TokenRecord rec;
  const double sampled_lp = entry.at("logprob").get<double>();
  const std::string sampled_token =
      entry.contains("token") ? entry.at("token").get<std::string>() : std::string();
  rec.candidate_logprobs.push_back(sampled_lp);
  if (entry.contains("top_logprobs")) {
    bool sampled_skipped = false;
    std::vector<double> rest;
    for (const auto& cand : entry.at("top_logprobs")) {
      const std::string tok =
          cand.contains("token") ? cand.at("token").get<std::string>() : std::string();
      if (!sampled_skipped && tok == sampled_token) {
        sampled_skipped = true;  // already in slot 0
        continue;
      }
      rest.push_back(cand.at("logprob").get<double>());
    }
    std::sort(rest.begin(), rest.end(), std::greater<>());
    rec.candidate_logprobs.insert(rec.candidate_logprobs.end(), rest.begin(), rest.end());
  }
  return rec;
}

}  // namespace

GenResult ChatClient::generate(const GenRequest& request) {
  request.validate();
  const json body = build_body(request);
  const json resp = post_with_retries(body);

  GenResult result;
  try {
    const std::string resp_id =
        resp.contains("id") ? resp.at("id").get<std::string>() : std::string("gen");
    const auto& choices = resp.at("choices");
    std::size_t index = 0;
    for (const auto& choice : choices) {
      if (!choice.contains("logprobs") || choice.at("logprobs").is_null() ||
          !choice.at("logprobs").contains("content")) {
        throw ProtocolError("logprobs not enabled in response");
      }
      Trace t;
      t.trace_id = choices.size() == 1 ? resp_id : resp_id + "/" + std::to_string(index);
      for (const auto& entry : choice.at("logprobs").at("content")) {
        t.tokens.push_back(record_from_entry(entry));
      }
      const std::string content = choice.contains("message")
                                      ? choice.at("message").value("content", std::string())
                                      : std::string();
      if (auto boxed = extract_boxed(content)) {
        t.answer = normalize_answer(*boxed, norm_);
      }
      std::string reason = choice.value("finish_reason", std::string());
      if (choice.contains("stop_reason") && choice.at("stop_reason").is_string()) {
        const std::string stop = choice.at("stop_reason").get<std::string>();
        if (gate::is_gate_stop_reason(stop)) reason = stop;
      }
      result.traces.push_back(std::move(t));
      result.finish_reasons.push_back(std::move(reason));
      ++index;
    }
    if (resp.contains("usage") && resp.at("usage").contains("completion_tokens")) {
      result.usage_tokens = resp.at("usage").at("completion_tokens").get<std::int64_t>();
    } else {
      for (const Trace& t : result.traces) result.usage_tokens += t.token_count();
    }
  } catch (const ProtocolError&) {
    throw;
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("unexpected response shape: ") + e.what());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Prompt construction + pool building
// ---------------------------------------------------------------------------

GenRequest make_request(const ProblemPrompt& problem, GenRequest base) {
  base.messages.clear();
  if (problem.system_prompt) {
    base.messages.emplace_back("system", *problem.system_prompt);
  }
  std::string user = problem.statement;
  if (problem.append_boxed_instruction) {
    user += "\n\n";
    user += kBoxedInstruction;
  }
  base.messages.emplace_back("user", std::move(user));
  return base;
}

TracePool build_pool(ChatClient& client, const ProblemPrompt& problem, std::size_t count,
                     const GenRequest& request_template, const std::filesystem::path& out) {
  TracePool pool;
  pool.problem_id = problem.problem_id;
  if (problem.ground_truth) {
    pool.ground_truth = normalize_answer(*problem.ground_truth, client.normalize_options());
  }
  if (std::filesystem::exists(out)) {
    pool = load_pool(out);  // resume from what is already persisted
  }
  std::unordered_set<std::string> seen;
  for (const Trace& t : pool.traces) seen.insert(t.trace_id);

  while (pool.size() < count) {
    GenRequest req = make_request(problem, request_template);
    req.n = static_cast<int>(
        std::min<std::size_t>(static_cast<std::size_t>(request_template.n), count - pool.size()));
    GenResult batch = client.generate(req);
    for (Trace& t : batch.traces) {
      if (!seen.insert(t.trace_id).second) {
        std::cerr << "build_pool: dropping duplicate trace_id '" << t.trace_id << "'\n";
        continue;
      }
      if (pool.ground_truth) {
        t.correct = t.answer.has_value() && *t.answer == *pool.ground_truth;
      }
      pool.traces.push_back(std::move(t));
    }
    save_pool(pool, out);
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Live session
// ---------------------------------------------------------------------------

GenerationSession::GenerationSession(ChatClient& client, ProblemPrompt problem,
                                     GenRequest request_template)
    : client_(client), problem_(std::move(problem)), template_(std::move(request_template)) {
  template_.n = 1;
}

std::optional<GenerationSession::Produced> GenerationSession::produce(const gate::GateConfig* g) {
  GenRequest req = make_request(problem_, template_);
  if (g != nullptr) {
    req.gate_cfg = *g;
  } else {
    req.gate_cfg.reset();
  }
  GenResult res = client_.generate(req);
  if (res.traces.empty()) return std::nullopt;
  Produced p;
  p.trace = std::move(res.traces.front());
  p.finish_reason = res.finish_reasons.front();
  p.gated = gate::is_gate_stop_reason(p.finish_reason);
  return p;
}

namespace {

class SessionTraceSource final : public online::TraceSource {
public:
  explicit SessionTraceSource(GenerationSession& session) : session_(session) {}

  std::optional<Drawn> next(const gate::GateConfig* g) override {
    auto produced = session_.produce(g);
    if (!produced) return std::nullopt;
    return Drawn{std::move(produced->trace), produced->gated};
  }

private:
  GenerationSession& session_;
};

}  // namespace

online::OnlineOutcome run_online_live(GenerationSession& session,
                                      const online::OnlineConfig& cfg) {
  SessionTraceSource source(session);
  return online::run_with_source(source, cfg);
}

}  // namespace deepconf::client
