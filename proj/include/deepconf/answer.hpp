#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace deepconf {

/**
 * Answer canonicalization applied once at ingestion. Votes compare the
 * resulting strings byte-wise, so two traces agree iff their normalized
 * answers are identical.
 *
 * Default rule: trim ASCII whitespace, unwrap a surrounding \boxed{...},
 * trim again. Comparison stays case-sensitive unless case_fold is set
 * (useful for letter-answer benchmarks where casing is presentation noise).
 */
struct NormalizeOptions {
  bool strip_boxed = true;
  bool case_fold = false;
};

/// Canonical form of an extracted answer string.
std::string normalize_answer(std::string_view raw, const NormalizeOptions& opts = {});

/// Inner text of the last balanced \boxed{...} in a completion, or nullopt
/// when the text contains none. The result is not normalized.
std::optional<std::string> extract_boxed(std::string_view text);

}  // namespace deepconf
