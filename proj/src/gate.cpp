#include "deepconf/gate.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "deepconf/errors.hpp"

namespace deepconf::gate {

void GateConfig::validate() const {
  if (window_size < 1) throw ConfigError("gate window_size must be >= 1");
  if (top_k < 1) throw ConfigError("gate top_k must be >= 1");
  if (exclude_sampled && top_k < 2) {
    throw ConfigError("gate top_k must be >= 2 when exclude_sampled is set");
  }
  // +/-inf are legal (always-stop / never-stop); NaN would make the stop
  // comparison silently false forever.
  if (std::isnan(threshold)) throw ConfigError("gate threshold is NaN");
}

double gate_token_confidence(const TokenRecord& record, const GateConfig& cfg) {
  const int count = std::min(record.candidate_count(), cfg.top_k);
  const auto& lp = record.candidate_logprobs;
  if (cfg.exclude_sampled) {
    if (count <= 1) return 0.0;  // nothing left after dropping the sampled token
    double s = 0.0;
    for (int j = 1; j < count; ++j) s += lp[j];
    return -s / static_cast<double>(count - 1);
  }
  double s = 0.0;
  for (int j = 0; j < count; ++j) s += lp[j];
  return -s / static_cast<double>(count);
}

GateState::GateState(GateConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.enabled) ring_.assign(static_cast<std::size_t>(cfg_.window_size), 0.0);
}

std::vector<double> GateState::window_contents() const {
  std::vector<double> out;
  out.reserve(fill_);
  for (std::size_t i = 0; i < fill_; ++i) {
    out.push_back(ring_[(head_ + i) % ring_.size()]);
  }
  return out;
}

GateDecision GateState::feed(const TokenRecord& record) {
  if (stopped_) throw StateError("gate already stopped; no further feeds accepted");

  GateDecision d;
  d.token_index = tokens_seen_;
  ++tokens_seen_;
  if (!cfg_.enabled) return d;

  const double conf = gate_token_confidence(record, cfg_);
  const std::size_t cap = ring_.size();
  if (fill_ < cap) {
    ring_[(head_ + fill_) % cap] = conf;
    ++fill_;
    sum_.add(conf);
  } else {
    sum_.sub(ring_[head_]);
    ring_[head_] = conf;
    head_ = (head_ + 1) % cap;
    sum_.add(conf);
  }

  const double mean = sum_.value() / static_cast<double>(fill_);
  d.window_mean = mean;
  if (fill_ == cap && mean < cfg_.threshold) {
    d.action = GateAction::Stop;
    stopped_ = true;
    stop_reason_ = stop_reason_string(cfg_.threshold);
  }
  return d;
}

std::optional<std::int64_t> first_stop_index(const Trace& trace, const GateConfig& cfg) {
  cfg.validate();
  if (!cfg.enabled) return std::nullopt;
  const std::size_t n = trace.tokens.size();
  const auto w = static_cast<std::size_t>(cfg.window_size);
  if (n < w) return std::nullopt;  // the window never fills

  std::vector<double> series(n);
  for (std::size_t i = 0; i < n; ++i) {
    series[i] = gate_token_confidence(trace.tokens[i], cfg);
  }
  std::vector<double> hi(n + 1);
  std::vector<double> lo(n + 1);
  kernels::prefix_sums_dd(series.data(), n, hi.data(), lo.data());
  std::vector<double> means(n - w + 1);
  kernels::window_means(hi.data(), lo.data(), means.size(), cfg.window_size, means.data());
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i] < cfg.threshold) {
      return static_cast<std::int64_t>(i + w - 1);  // window filled at this token
    }
  }
  return std::nullopt;
}

std::string stop_reason_string(double threshold) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), threshold);
  return "<gconf<" + std::string(buf, res.ptr) + ">";
}

bool is_gate_stop_reason(std::string_view reason) {
  return reason.substr(0, 7) == "<gconf<";
}

std::map<std::string, std::string> gate_params(const GateConfig& cfg) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), cfg.threshold);
  return {
      {"enable_conf", cfg.enabled ? "true" : "false"},
      {"window_size", std::to_string(cfg.window_size)},
      {"threshold", std::string(buf, res.ptr)},
  };
}

GateConfig gate_config_from_params(const std::map<std::string, std::string>& params,
                                   GateConfig defaults) {
  GateConfig cfg = defaults;
  if (auto it = params.find("enable_conf"); it != params.end()) {
    if (it->second == "true" || it->second == "1") {
      cfg.enabled = true;
    } else if (it->second == "false" || it->second == "0") {
      cfg.enabled = false;
    } else {
      throw ConfigError("enable_conf must be a boolean, got '" + it->second + "'");
    }
  }
  if (auto it = params.find("window_size"); it != params.end()) {
    int v = 0;
    const auto res = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
    if (res.ec != std::errc{} || res.ptr != it->second.data() + it->second.size()) {
      throw ConfigError("window_size must be an integer, got '" + it->second + "'");
    }
    cfg.window_size = v;
  }
  if (auto it = params.find("threshold"); it != params.end()) {
    try {
      cfg.threshold = std::stod(it->second);
    } catch (const std::exception&) {
      throw ConfigError("threshold must be a number, got '" + it->second + "'");
    }
  }
  cfg.validate();
  return cfg;
}

}  // namespace deepconf::gate
