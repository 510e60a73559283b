#include "editsynth/span_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "editsynth/special_tokens.hpp"

namespace editsynth {

namespace {

// Overlapping or touching (gap < 1 token).
bool conflicts(const Span& a, std::size_t start, std::size_t len) {
  return !(start + len + 1 <= a.start || a.start + a.len + 1 <= start);
}

}  // namespace

SpanSelection sample_spans(std::size_t n_tokens, const SamplerConfig& cfg, Rng& rng) {
  if (n_tokens < cfg.min_snippet_tokens)
    throw std::invalid_argument("sample_spans: snippet too short (" +
                                std::to_string(n_tokens) + " < " +
                                std::to_string(cfg.min_snippet_tokens) + " tokens)");
  if (cfg.span_min < 1 || cfg.span_min > cfg.span_max)
    throw std::invalid_argument("sample_spans: need 1 <= span_min <= span_max");
  if (!(cfg.budget > 0.0 && cfg.budget < 1.0))
    throw std::invalid_argument("sample_spans: budget must be in (0,1)");

  const auto budget_tokens = static_cast<std::size_t>(
      std::ceil(cfg.budget * static_cast<double>(n_tokens)));
  if (budget_tokens < cfg.span_min)
    throw std::invalid_argument(
        "sample_spans: span_min exceeds the token budget ceil(budget*n)");

  SpanSelection sel;
  std::size_t selected = 0;
  int rejections = 0;
  while (rejections < cfg.max_rejections && selected < budget_tokens) {
    const std::size_t len =
        cfg.span_min + rng.next_below(cfg.span_max - cfg.span_min + 1);
    if (len > n_tokens) {
      ++rejections;
      continue;
    }
    const std::size_t start = rng.next_below(n_tokens - len + 1);
    bool ok = selected + len <= budget_tokens;
    for (const auto& s : sel.spans) {
      if (!ok) break;
      if (conflicts(s, start, len)) ok = false;
    }
    if (!ok) {
      ++rejections;
      continue;
    }
    sel.spans.push_back({start, len});
    selected += len;
    rejections = 0;
  }

  if (sel.spans.empty()) {
    // ~2^-50 fallback; keeps "at least one span" unconditional.
    const std::size_t len = cfg.span_min;
    sel.spans.push_back({rng.next_below(n_tokens - len + 1), len});
  }

  std::sort(sel.spans.begin(), sel.spans.end(),
            [](const Span& a, const Span& b) { return a.start < b.start; });
  return sel;
}

BlankedCode blank(const TokenSequence& tokens, const SpanSelection& sel,
                  std::string_view marker) {
  if (marker != kBlankToken && marker != kMaskToken)
    throw std::invalid_argument("blank: marker must be [BLANK] or [MASK]");
  std::size_t prev_end_plus_gap = 0;
  for (const auto& s : sel.spans) {
    if (s.len == 0 || s.start + s.len > tokens.size())
      throw std::invalid_argument("blank: span out of range");
    if (s.start < prev_end_plus_gap)
      throw std::invalid_argument("blank: spans overlap or touch");
    prev_end_plus_gap = s.start + s.len + 1;
  }

  BlankedCode out;
  out.marker = std::string(marker);
  std::size_t pos = 0;
  for (const auto& s : sel.spans) {
    for (; pos < s.start; ++pos) out.tokens.push_back(tokens[pos]);
    out.blank_positions.push_back(out.tokens.size());
    out.tokens.emplace_back(marker);
    out.originals.emplace_back(tokens.begin() + static_cast<std::ptrdiff_t>(s.start),
                               tokens.begin() + static_cast<std::ptrdiff_t>(s.start + s.len));
    pos = s.start + s.len;
  }
  for (; pos < tokens.size(); ++pos) out.tokens.push_back(tokens[pos]);
  return out;
}

TokenSequence restore(const BlankedCode& blanked) {
  TokenSequence out;
  std::size_t next_blank = 0;
  for (std::size_t i = 0; i < blanked.tokens.size(); ++i) {
    if (next_blank < blanked.blank_positions.size() &&
        i == blanked.blank_positions[next_blank]) {
      const auto& orig = blanked.originals[next_blank];
      out.insert(out.end(), orig.begin(), orig.end());
      ++next_blank;
    } else {
      out.push_back(blanked.tokens[i]);
    }
  }
  return out;
}

}  // namespace editsynth
