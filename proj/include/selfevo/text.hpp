#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace selfevo::text {

/// Unicode NFC normalization of a UTF-8 string. Invalid UTF-8 sequences are
/// replaced with U+FFFD.
std::string nfc(std::string_view utf8);

/// Trims Unicode whitespace on both ends.
std::string trim(std::string_view utf8);

/// Word tokens used for corpus statistics and length filtering: NFC, then
/// split on maximal runs of Unicode whitespace. Case is preserved.
std::vector<std::string> whitespace_tokens(std::string_view utf8);

/// Number of whitespace tokens.
std::size_t token_length(std::string_view utf8);

/// Tokens used by every evaluation metric: NFC, lowercase, split on
/// whitespace, and every punctuation code point becomes its own token.
std::vector<std::string> metric_tokens(std::string_view utf8);

/// Joins tokens with a single space.
std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ");

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace selfevo::text
