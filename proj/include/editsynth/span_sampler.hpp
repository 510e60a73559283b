#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "editsynth/bpe.hpp"
#include "editsynth/rng.hpp"

namespace editsynth {

struct Span {
  std::size_t start = 0;  // 0-based token index
  std::size_t len = 0;    // token count
};

struct SpanSelection {
  std::vector<Span> spans;  // sorted by start, pairwise gap >= 1 token
  std::size_t total_tokens() const {
    std::size_t t = 0;
    for (const auto& s : spans) t += s.len;
    return t;
  }
};

struct SamplerConfig {
  double budget = 0.30;              // target fraction of tokens selected
  std::size_t span_min = 1;
  std::size_t span_max = 6;
  std::size_t min_snippet_tokens = 8;
  int max_rejections = 50;           // consecutive rejected draws before giving up
};

// Rejection-sampled span selection: draw (length, start) uniformly, reject
// draws that overlap or touch an accepted span or would push the selected
// token total past ceil(budget * n). Deterministic given the rng state.
SpanSelection sample_spans(std::size_t n_tokens, const SamplerConfig& cfg, Rng& rng);

inline SpanSelection sample_spans(const TokenSequence& tokens, const SamplerConfig& cfg,
                                  Rng& rng) {
  return sample_spans(tokens.size(), cfg, rng);
}

struct BlankedCode {
  TokenSequence tokens;                      // each span replaced by one marker
  std::vector<TokenSequence> originals;      // removed spans, in start order
  std::vector<std::size_t> blank_positions;  // marker indices into tokens
  std::string marker;

  std::size_t blank_count() const { return originals.size(); }
};

// Replaces each selected span with a single marker token ("[BLANK]" or
// "[MASK]"). Restoring the originals reproduces the input exactly.
BlankedCode blank(const TokenSequence& tokens, const SpanSelection& sel,
                  std::string_view marker);

TokenSequence restore(const BlankedCode& blanked);

}  // namespace editsynth
