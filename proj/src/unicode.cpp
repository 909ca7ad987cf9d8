#include "hebtts/unicode.hpp"

namespace hebtts::unicode {

namespace {
constexpr char32_t kReplacement = 0xFFFD;
}

std::vector<char32_t> decode_utf8(std::string_view text) {
  std::vector<char32_t> out;
  out.reserve(text.size());
  size_t i = 0;
  while (i < text.size()) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    size_t n = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
      n = 1;
    } else if ((b0 & 0xE0) == 0xC0) {
      cp = b0 & 0x1F;
      n = 2;
    } else if ((b0 & 0xF0) == 0xE0) {
      cp = b0 & 0x0F;
      n = 3;
    } else if ((b0 & 0xF8) == 0xF0) {
      cp = b0 & 0x07;
      n = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + n > text.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (size_t k = 1; k < n; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    // Reject overlong forms and surrogate range.
    if (ok) {
      if ((n == 2 && cp < 0x80) || (n == 3 && cp < 0x800) ||
          (n == 4 && cp < 0x10000) || cp > 0x10FFFF ||
          (cp >= 0xD800 && cp <= 0xDFFF)) {
        ok = false;
      }
    }
    if (!ok) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += n;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::string encode_utf8(const std::vector<char32_t>& codepoints) {
  std::string out;
  out.reserve(codepoints.size());
  for (char32_t cp : codepoints) append_utf8(out, cp);
  return out;
}

bool is_hebrew_diacritic(char32_t cp) {
  if (cp >= 0x0591 && cp <= 0x05BD) return true;
  switch (cp) {
    case 0x05BF:
    case 0x05C1:
    case 0x05C2:
    case 0x05C4:
    case 0x05C5:
    case 0x05C7:
      return true;
    default:
      return false;
  }
}

bool is_punctuation(char32_t cp) {
  // ASCII
  if ((cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
      (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E)) {
    return true;
  }
  // Hebrew punctuation: maqaf, paseq, sof pasuq, nun hafukha, geresh,
  // gershayim.
  switch (cp) {
    case 0x05BE:
    case 0x05C0:
    case 0x05C3:
    case 0x05C6:
    case 0x05F3:
    case 0x05F4:
      return true;
    default:
      break;
  }
  // Latin-1 punctuation and quote marks.
  switch (cp) {
    case 0x00A1:
    case 0x00A7:
    case 0x00AB:
    case 0x00B6:
    case 0x00B7:
    case 0x00BB:
    case 0x00BF:
      return true;
    default:
      break;
  }
  // General punctuation block (dashes, quotes, ellipsis, daggers, permille).
  if (cp >= 0x2010 && cp <= 0x2027) return true;
  if (cp >= 0x2030 && cp <= 0x205E) return true;
  // CJK corner brackets and fullwidth forms show up in scraped transcripts.
  if (cp >= 0x3001 && cp <= 0x3011) return true;
  if (cp >= 0xFF01 && cp <= 0xFF0F) return true;
  if (cp >= 0xFF1A && cp <= 0xFF20) return true;
  if (cp >= 0xFF3B && cp <= 0xFF40) return true;
  if (cp >= 0xFF5B && cp <= 0xFF65) return true;
  return false;
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

}  // namespace hebtts::unicode
