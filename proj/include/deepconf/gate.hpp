#pragma once

/**
 * Confidence-gated early stopping for one generation stream.
 *
 * The gate keeps a bounded FIFO of per-token confidences and a compensated
 * running sum. After each fed token it answers continue/stop: stop fires
 * only when the window is full AND the window mean is below the threshold.
 * A stopped gate refuses further feeds.
 *
 * Token confidence inside the gate defaults to the "exclude sampled" form:
 * the sampled token (slot 0) is dropped and the remaining candidates are
 * averaged; a record with a single candidate scores 0. Setting
 * exclude_sampled = false switches to the plain top-k mean used by the
 * offline metrics.
 *
 * One GateState per stream, single owner; states may move between threads
 * but are never shared mutably.
 */

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deepconf/kernels.hpp"
#include "deepconf/trace.hpp"

namespace deepconf::gate {

struct GateConfig {
  bool enabled = true;
  int window_size = 2048;
  double threshold = 17.0;
  int top_k = 20;              // cap on candidates entering the confidence
  bool exclude_sampled = true;

  void validate() const;  // ConfigError; top_k >= 2 required when excluding
};

enum class GateAction { Continue, Stop };

struct GateDecision {
  GateAction action = GateAction::Continue;
  std::optional<double> window_mean;  // mean over current window contents
  std::int64_t token_index = 0;       // 0-based index of the token just fed
};

class GateState {
public:
  explicit GateState(GateConfig cfg);

  /// Scores one token and updates the window. StateError once stopped.
  GateDecision feed(const TokenRecord& record);

  std::int64_t tokens_seen() const { return tokens_seen_; }
  bool stopped() const { return stopped_; }
  const std::optional<std::string>& stop_reason() const { return stop_reason_; }
  const GateConfig& config() const { return cfg_; }

  // Diagnostics.
  std::size_t window_fill() const { return fill_; }
  double running_sum() const { return sum_.value(); }
  std::vector<double> window_contents() const;  // oldest first

private:
  GateConfig cfg_;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // slot of the oldest entry
  std::size_t fill_ = 0;
  kernels::DdAccumulator sum_;
  std::int64_t tokens_seen_ = 0;
  bool stopped_ = false;
  std::optional<std::string> stop_reason_;
};

/// Per-token confidence under the gate's rule (shared by feed and replay).
double gate_token_confidence(const TokenRecord& record, const GateConfig& cfg);

/**
 * Index of the first token at which feeding the trace would stop, or nullopt
 * when the stream completes. Batch implementation over prefix sums; agrees
 * with sequential feed() replay.
 */
std::optional<std::int64_t> first_stop_index(const Trace& trace, const GateConfig& cfg);

/// Stop-reason annotation, e.g. threshold 17 -> "<gconf<17>". The threshold
/// is rendered with shortest round-trip precision.
std::string stop_reason_string(double threshold);

/// True when a finish/stop reason marks a gate-terminated stream.
bool is_gate_stop_reason(std::string_view reason);

/// Flat key/value form of the gate knobs: enable_conf, window_size,
/// threshold (the names the serving-side extension map uses).
std::map<std::string, std::string> gate_params(const GateConfig& cfg);

/// Parses the flat map back, starting from `defaults` for absent keys.
GateConfig gate_config_from_params(const std::map<std::string, std::string>& params,
                                   GateConfig defaults = {});

}  // namespace deepconf::gate
