#include "deepconf/answer.hpp"

#include <cctype>

namespace deepconf {

namespace {

std::string_view trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

constexpr std::string_view kBoxedPrefix = "\\boxed{";

/// If s is exactly \boxed{...} with balanced braces, return the inner text.
std::optional<std::string_view> unwrap_boxed(std::string_view s) {
  if (s.size() < kBoxedPrefix.size() + 1 || s.substr(0, kBoxedPrefix.size()) != kBoxedPrefix ||
      s.back() != '}') {
    return std::nullopt;
  }
  int depth = 0;
  for (std::size_t i = kBoxedPrefix.size() - 1; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}') {
      --depth;
      // The opening brace must close at the final character, otherwise the
      // \boxed{} does not span the whole string.
      if (depth == 0) {
        if (i + 1 != s.size()) return std::nullopt;
        return s.substr(kBoxedPrefix.size(), i - kBoxedPrefix.size());
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::string normalize_answer(std::string_view raw, const NormalizeOptions& opts) {
  std::string_view s = trim(raw);
  if (opts.strip_boxed) {
    if (auto inner = unwrap_boxed(s)) {
      s = trim(*inner);
    }
  }
  std::string out(s);
  if (opts.case_fold) {
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

std::optional<std::string> extract_boxed(std::string_view text) {
  const std::size_t start = text.rfind(kBoxedPrefix);
  if (start == std::string_view::npos) return std::nullopt;
  int depth = 0;
  for (std::size_t i = start + kBoxedPrefix.size() - 1; i < text.size(); ++i) {
    if (text[i] == '{') ++depth;
    if (text[i] == '}') {
      --depth;
      if (depth == 0) {
        const std::size_t inner = start + kBoxedPrefix.size();
        return std::string(text.substr(inner, i - inner));
      }
    }
  }
  return std::nullopt;  // unbalanced
}

}  // namespace deepconf
