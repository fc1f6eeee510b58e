#include "blm/text.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <cctype>

#include "blm/error.hpp"

namespace blm {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

icu::UnicodeString nfc(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw Error(Errc::IoError, "ICU NFC normalizer unavailable");
  const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString out = norm->normalize(src, status);
  if (U_FAILURE(status)) throw Error(Errc::ParseError, "invalid text for NFC normalization");
  return out;
}

}  // namespace

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string utf8;
  nfc(text).toUTF8String(utf8);
  return collapse_whitespace(utf8);
}

std::string casefold(std::string_view text) {
  icu::UnicodeString u = nfc(text);
  u.foldCase();
  std::string utf8;
  u.toUTF8String(utf8);
  return collapse_whitespace(utf8);
}

std::string finish_sentence(std::string_view text) {
  std::string s = collapse_whitespace(text);
  if (s.empty()) return s;
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  if (s.back() != '.') s.push_back('.');
  return s;
}

}  // namespace blm
