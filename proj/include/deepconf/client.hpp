#pragma once

/**
 * Client for OpenAI-compatible chat-completions endpoints that return
 * per-token candidate log-probabilities. Used to pre-generate trace pools
 * and to drive live gated runs.
 *
 * All network traffic goes through the Transport interface; tests inject
 * scripted transports, so nothing here ever requires a live model. The
 * gate knobs ride along under the "vllm_xargs" extension map with the
 * serving-side names (enable_conf / window_size / threshold).
 *
 * Endpoint configuration comes from the environment:
 *   DEEPCONF_API_BASE  e.g. http://localhost:8000/v1
 *   DEEPCONF_API_KEY   optional bearer token
 */

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "deepconf/answer.hpp"
#include "deepconf/gate.hpp"
#include "deepconf/online.hpp"
#include "deepconf/trace.hpp"

namespace deepconf::client {

/// Instruction appended to math prompts when requested; the final answer is
/// then expected inside \boxed{...}.
inline constexpr std::string_view kBoxedInstruction =
    "Please reason step by step, and put your final answer within \\boxed{}.";

struct GenRequest {
  std::string model;
  std::vector<std::pair<std::string, std::string>> messages;  // (role, content)
  double temperature = 1.0;
  double top_p = 1.0;
  std::optional<int> top_k;
  int max_tokens = 4096;
  int n = 1;                    // parallel samples per call
  int logprob_candidates = 20;  // top_logprobs
  std::optional<gate::GateConfig> gate_cfg;

  /// ConfigError on bad knobs; gating requires logprob_candidates >= 2.
  void validate() const;
};

struct GenResult {
  std::vector<Trace> traces;
  std::vector<std::string> finish_reasons;  // one per trace, gate marker wins
  std::int64_t usage_tokens = 0;
};

/// Narrow seam over the wire. Implementations throw TransportError on
/// network-level failure (retried by ChatClient).
class Transport {
public:
  virtual ~Transport() = default;
  virtual nlohmann::json post_chat_completions(const nlohmann::json& body) = 0;
};

/// cpp-httplib transport against DEEPCONF_API_BASE-style URLs.
class HttpTransport final : public Transport {
public:
  HttpTransport(std::string base_url, std::string api_key);
  nlohmann::json post_chat_completions(const nlohmann::json& body) override;

private:
  std::string origin_;       // scheme://host[:port]
  std::string path_prefix_;  // e.g. /v1
  std::string api_key_;
};

/// Builds an HttpTransport from the environment; ConfigError when
/// DEEPCONF_API_BASE is unset.
std::unique_ptr<Transport> transport_from_env();

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 250;  // doubled per retry
};

class ChatClient {
public:
  explicit ChatClient(std::shared_ptr<Transport> transport, RetryPolicy retry = {},
                      NormalizeOptions norm = {});

  /// One API call: issues the request (with retries), maps every returned
  /// choice into a Trace. ProtocolError when the response lacks logprobs.
  GenResult generate(const GenRequest& request);

  /// The exact JSON body generate() would send (fixture tests use this).
  nlohmann::json build_body(const GenRequest& request) const;

  const NormalizeOptions& normalize_options() const { return norm_; }

private:
  nlohmann::json post_with_retries(const nlohmann::json& body);

  std::shared_ptr<Transport> transport_;
  RetryPolicy retry_;
  NormalizeOptions norm_;
};

/// One benchmark problem as sent to the model.
struct ProblemPrompt {
  std::string problem_id;
  std::string statement;
  std::optional<std::string> system_prompt;
  std::optional<std::string> ground_truth;   // raw; normalized at ingestion
  bool append_boxed_instruction = true;
};

/// Fills the message list of `base` from the prompt spec.
GenRequest make_request(const ProblemPrompt& problem, GenRequest base);

/**
 * Generates traces until the pool at `out` holds `count`, saving after every
 * batch. Resumable: existing traces are loaded first and only the missing
 * ones are requested; duplicate trace ids from the server are dropped with
 * a warning. Idempotent once complete.
 */
TracePool build_pool(ChatClient& client, const ProblemPrompt& problem, std::size_t count,
                     const GenRequest& request_template, const std::filesystem::path& out);

/// Sequential single-trace generation against one problem, for live online
/// runs. Each produce() issues one n=1 request; gate knobs are attached when
/// a gate is supplied.
class GenerationSession {
public:
  GenerationSession(ChatClient& client, ProblemPrompt problem, GenRequest request_template);

  struct Produced {
    Trace trace;
    std::string finish_reason;
    bool gated = false;
  };

  std::optional<Produced> produce(const gate::GateConfig* g);

private:
  ChatClient& client_;
  ProblemPrompt problem_;
  GenRequest template_;
};

/// Live counterpart of run_online: same engine, traces produced on demand.
/// Failures surface as RunAbortError carrying the partial accounting.
online::OnlineOutcome run_online_live(GenerationSession& session, const online::OnlineConfig& cfg);

}  // namespace deepconf::client
