#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace hebtts::unicode {

// Decodes UTF-8 into codepoints. Invalid byte sequences decode to U+FFFD,
// one replacement per offending byte.
std::vector<char32_t> decode_utf8(std::string_view text);

std::string encode_utf8(const std::vector<char32_t>& codepoints);
void append_utf8(std::string& out, char32_t cp);

// Hebrew niqqud and cantillation combining marks:
// U+0591..U+05BD, U+05BF, U+05C1, U+05C2, U+05C4, U+05C5, U+05C7.
bool is_hebrew_diacritic(char32_t cp);

// Punctuation removed before scoring: ASCII punctuation/symbols, general
// punctuation block, CJK-adjacent quote marks, and the Hebrew punctuation
// characters maqaf, paseq, sof pasuq, nun hafukha, geresh, gershayim.
bool is_punctuation(char32_t cp);

bool is_whitespace(char32_t cp);

}  // namespace hebtts::unicode
