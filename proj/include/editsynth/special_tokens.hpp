#pragma once

#include <array>
#include <string_view>

namespace editsynth {

// Reserved marker strings. Bit-exact: file formats and wire payloads use
// these spellings verbatim.
inline constexpr std::string_view kBlankToken = "[BLANK]";
inline constexpr std::string_view kSepToken = "[SEP]";
inline constexpr std::string_view kMaskToken = "[MASK]";

inline constexpr std::array<std::string_view, 3> kReservedTokens = {
    kBlankToken, kSepToken, kMaskToken};

inline bool contains_reserved_token(std::string_view text) {
  for (auto t : kReservedTokens)
    if (text.find(t) != std::string_view::npos) return true;
  return false;
}

}  // namespace editsynth
