#pragma once

#include <string>
#include <string_view>

namespace hebtts {

// Removes Hebrew niqqud and cantillation marks. Every other codepoint is
// passed through unchanged, so mixed-script text is legal.
std::string strip_diacritics(std::string_view text);

// Full scoring normalization: diacritics stripped, punctuation removed,
// whitespace runs collapsed to single spaces, no leading/trailing space.
// Idempotent.
std::string normalize_for_scoring(std::string_view text);

}  // namespace hebtts
