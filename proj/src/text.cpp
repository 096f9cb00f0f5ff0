#include "selfevo/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <cstdio>
#include <stdexcept>

namespace selfevo::text {
namespace {

const icu::Normalizer2& nfc_instance() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || norm == nullptr) {
    throw std::runtime_error("ICU NFC normalizer unavailable");
  }
  return *norm;
}

icu::UnicodeString to_unicode(std::string_view utf8) {
  return icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

icu::UnicodeString normalized(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = nfc_instance().normalize(to_unicode(utf8), status);
  if (U_FAILURE(status)) {
    throw std::runtime_error("NFC normalization failed");
  }
  return out;
}

template <typename Fn>
void for_each_code_point(const icu::UnicodeString& s, Fn&& fn) {
  for (int32_t i = 0; i < s.length();) {
    UChar32 c = s.char32At(i);
    fn(c, i);
    i += U16_LENGTH(c);
  }
}

}  // namespace

std::string nfc(std::string_view utf8) { return to_utf8(normalized(utf8)); }

std::string trim(std::string_view utf8) {
  icu::UnicodeString s = to_unicode(utf8);
  int32_t begin = 0;
  int32_t end = s.length();
  while (begin < end) {
    UChar32 c = s.char32At(begin);
    if (!u_isUWhiteSpace(c)) break;
    begin += U16_LENGTH(c);
  }
  while (end > begin) {
    int32_t prev = s.moveIndex32(end, -1);
    if (!u_isUWhiteSpace(s.char32At(prev))) break;
    end = prev;
  }
  return to_utf8(s.tempSubStringBetween(begin, end));
}

std::vector<std::string> whitespace_tokens(std::string_view utf8) {
  icu::UnicodeString s = normalized(utf8);
  std::vector<std::string> tokens;
  int32_t start = -1;
  for_each_code_point(s, [&](UChar32 c, int32_t i) {
    if (u_isUWhiteSpace(c)) {
      if (start >= 0) {
        tokens.push_back(to_utf8(s.tempSubStringBetween(start, i)));
        start = -1;
      }
    } else if (start < 0) {
      start = i;
    }
  });
  if (start >= 0) tokens.push_back(to_utf8(s.tempSubStringBetween(start)));
  return tokens;
}

std::size_t token_length(std::string_view utf8) { return whitespace_tokens(utf8).size(); }

std::vector<std::string> metric_tokens(std::string_view utf8) {
  icu::UnicodeString s = normalized(utf8);
  s.toLower(icu::Locale::getRoot());
  std::vector<std::string> tokens;
  int32_t start = -1;
  auto flush = [&](int32_t end) {
    if (start >= 0) {
      tokens.push_back(to_utf8(s.tempSubStringBetween(start, end)));
      start = -1;
    }
  };
  for_each_code_point(s, [&](UChar32 c, int32_t i) {
    if (u_isUWhiteSpace(c)) {
      flush(i);
    } else if (u_ispunct(c)) {
      flush(i);
      tokens.push_back(to_utf8(s.tempSubStringBetween(i, i + U16_LENGTH(c))));
    } else if (start < 0) {
      start = i;
    }
  });
  flush(s.length());
  return tokens;
}

std::string join(const std::vector<std::string>& tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += sep;
    out += tokens[i];
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace selfevo::text
