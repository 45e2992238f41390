#pragma once

/**
 * Bit-exact JSONL persistence for trace pools.
 *
 * File layout, one JSON object per line:
 *   line 1:  {"problem_id": str, "ground_truth": str|null, "schema_version": 1}
 *   line 2+: {"trace_id": str, "answer": str|null, "correct": bool|null,
 *             "tokens": [[lp0, lp1, ...], ...]}
 *
 * Field order is fixed and floats are written with shortest round-trip
 * precision, so saving the same pool twice yields byte-identical files and
 * load(save(p)) reproduces p exactly.
 */

#include <filesystem>
#include <string>

#include "deepconf/trace.hpp"

namespace deepconf {

inline constexpr int kPoolSchemaVersion = 1;

/// Parses and validates a pool. ParseError carries the 1-based line number;
/// ValidationError names the offending trace_id.
TracePool load_pool(const std::filesystem::path& path);

/// Writes the pool in the canonical layout above. The pool must be valid.
void save_pool(const TracePool& pool, const std::filesystem::path& path);

/// One trace as its canonical JSONL line (no trailing newline).
std::string trace_to_jsonl(const Trace& trace);

/**
 * Multiplies every stored logprob by `factor`; used at ingestion to convert
 * log10/log2 inputs to nats before validation. Everything downstream assumes
 * natural log.
 */
void rescale_logprobs(TracePool& pool, double factor);

}  // namespace deepconf
