#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "editsynth/rng.hpp"
#include "editsynth/span_sampler.hpp"

namespace editsynth {

struct Candidate {
  std::vector<std::string> tokens;
  double score = 0.0;  // log-probability; higher = more probable
};

// Anything that can propose ranked completions for a blank. Implementations
// must be deterministic given their state and the inputs, and must return at
// most k candidates of exactly target_len tokens, sorted by descending score
// (ties broken by lexicographically smaller token list).
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<Candidate> candidates(const BlankedCode& blanked,
                                            std::size_t blank_index, std::size_t k,
                                            std::size_t target_len) const = 0;
};

// Picks a uniformly random candidate whose tokens differ from the original
// span. Returns nullopt when every candidate equals the original; the caller
// must drop that span.
std::optional<std::vector<std::string>> pick_inferior(
    const std::vector<Candidate>& cands, const std::vector<std::string>& original,
    Rng& rng);

// Add-alpha-smoothed n-gram language model over BPE tokens.
//
// Sequences are padded with "<s>"/"</s>" sentinels for context; sentinels
// and reserved markers are never proposed as candidate tokens. For any
// context the smoothed next-token distribution sums to 1.
class NGramModel final : public Generator {
 public:
  static NGramModel train(const std::vector<TokenSequence>& corpus, int order,
                          double alpha = 0.1);

  std::vector<Candidate> candidates(const BlankedCode& blanked, std::size_t blank_index,
                                    std::size_t k, std::size_t target_len) const override;

  // Smoothed log P(next | context); context uses the last order-1 tokens.
  double log_prob(const std::vector<std::string>& context, const std::string& next) const;

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  // Next-token event space (all trained tokens plus "</s>").
  const std::vector<std::string>& next_space() const { return next_space_; }
  std::vector<std::vector<std::string>> contexts() const;

  std::string to_json() const;
  static NGramModel from_json(std::string_view text);
  void save(const std::string& path) const;
  static NGramModel load(const std::string& path);

  static constexpr const char* kBos = "<s>";
  static constexpr const char* kEos = "</s>";

 private:
  NGramModel() = default;
  void rebuild_derived();
  std::vector<std::string> left_context(const BlankedCode& blanked,
                                        std::size_t blank_pos) const;
  // Top successors of a context: observed tokens by count desc (ties lex),
  // padded from the global unigram ranking. Proposal order only; scores
  // always come from log_prob.
  std::vector<std::string> expansion(const std::vector<std::string>& context,
                                     std::size_t width) const;

  struct VecHash {
    std::size_t operator()(const std::vector<std::string>& v) const;
  };

  int order_ = 0;
  double alpha_ = 0.1;
  std::unordered_map<std::vector<std::string>, std::map<std::string, std::uint64_t>, VecHash>
      context_counts_;
  std::unordered_map<std::vector<std::string>, std::uint64_t, VecHash> context_totals_;
  std::map<std::string, std::uint64_t> unigrams_;  // next-token marginals

  std::vector<std::string> next_space_;   // sorted
  std::vector<std::string> top_unigrams_; // count desc, ties lex
};

// Fixed candidate table loaded from a JSON file; used for hermetic tests and
// the "mock:<path>" generator spec.
class MockGenerator final : public Generator {
 public:
  explicit MockGenerator(std::map<std::size_t, std::vector<Candidate>> table)
      : by_len_(std::move(table)) {}
  static MockGenerator load(const std::string& path);

  std::vector<Candidate> candidates(const BlankedCode& blanked, std::size_t blank_index,
                                    std::size_t k, std::size_t target_len) const override;

 private:
  std::map<std::size_t, std::vector<Candidate>> by_len_;
};

// Client for an external generator service speaking the wire protocol
//   POST /complete {"prefix_tokens":[...],"suffix_tokens":[...],
//                   "k":int,"target_len":int}
//   -> {"candidates":[{"tokens":[...],"score":float},...]}
// Transport failures and 5xx responses are retried up to max_attempts.
class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(std::string endpoint, int timeout_seconds = 30,
                         int max_attempts = 3);

  std::vector<Candidate> candidates(const BlankedCode& blanked, std::size_t blank_index,
                                    std::size_t k, std::size_t target_len) const override;

 private:
  std::string endpoint_;
  int timeout_seconds_;
  int max_attempts_;
};

// Normalizes a raw candidate list to the Generator contract: drops rows of
// the wrong length, sorts by (score desc, tokens lex asc), truncates to k.
std::vector<Candidate> normalize_candidates(std::vector<Candidate> cands, std::size_t k,
                                            std::size_t target_len);

}  // namespace editsynth
