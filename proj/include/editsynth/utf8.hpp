#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace editsynth::utf8 {

// Decodes UTF-8 into codepoints. Invalid bytes map to 0xDC00+byte
// (surrogate-escape) so that encode(decode(s)) == s for any byte string.
std::vector<char32_t> decode(std::string_view s);

void append(std::string& out, char32_t cp);

std::string encode(const std::vector<char32_t>& cps);

}  // namespace editsynth::utf8
