#include "hebtts/text_norm.hpp"

#include "hebtts/unicode.hpp"

namespace hebtts {

std::string strip_diacritics(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : unicode::decode_utf8(text)) {
    if (!unicode::is_hebrew_diacritic(cp)) unicode::append_utf8(out, cp);
  }
  return out;
}

std::string normalize_for_scoring(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char32_t cp : unicode::decode_utf8(text)) {
    if (unicode::is_hebrew_diacritic(cp) || unicode::is_punctuation(cp)) {
      continue;
    }
    if (unicode::is_whitespace(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    unicode::append_utf8(out, cp);
  }
  return out;
}

}  // namespace hebtts
