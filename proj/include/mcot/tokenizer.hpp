#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mcot {

/// Fallback token counter used whenever a backend reports no usage.
///
/// A token is either a maximal run of word bytes (ASCII letters, digits,
/// underscore, or any byte >= 0x80) or a single ASCII punctuation character.
/// Whitespace separates tokens and is never counted. Counts are additive over
/// concatenation whenever the joined pieces meet at whitespace or punctuation.
std::size_t count_tokens(std::string_view text);

std::vector<std::string> tokenize(std::string_view text);

inline constexpr const char* kFallbackTokenizerName = "ws-punct-v1";

}  // namespace mcot
