#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace editsynth {

using TokenSequence = std::vector<std::string>;

// Splits text into pre-tokens whose concatenation reproduces the input
// byte-for-byte. A single space preceding a word or punctuation run is
// absorbed into that pre-token (" foo", " ++"); any other whitespace run
// becomes its own pre-token. BPE merges never cross pre-token boundaries.
std::vector<std::string> pre_tokenize(std::string_view text);

// Byte-pair-encoding subword vocabulary over code and comments.
//
// Immutable after training; encode/decode are pure and safe to call from
// any number of threads.
class BpeVocab {
 public:
  static BpeVocab train(const std::vector<std::string>& corpus,
                        std::size_t vocab_size,
                        std::vector<std::string> special_tokens);

  // Special-token substrings are emitted as single atomic tokens; characters
  // outside the training alphabet become "<unk-char:HEX>" tokens, so encode
  // never fails.
  TokenSequence encode(std::string_view text) const;

  // Inverse of encode on encoder outputs. Throws on tokens the vocabulary
  // has never seen.
  std::string decode(const TokenSequence& tokens) const;

  // Like decode, but also reports the byte range each token occupies in the
  // result (a special token's range includes the separating space inserted
  // before it, if any).
  std::string decode_with_offsets(
      const TokenSequence& tokens,
      std::vector<std::pair<std::size_t, std::size_t>>* offsets) const;

  bool is_special(std::string_view token) const;
  std::optional<int> token_id(std::string_view token) const;
  std::size_t size() const { return token_of_.size(); }

  const std::vector<std::string>& special_tokens() const { return specials_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const {
    return merges_;
  }
  const std::vector<char32_t>& alphabet() const { return alphabet_; }

  // Vocab file: {"version","special_tokens","alphabet","merges","vocab"}.
  // Byte-identical for identical trainings.
  std::string to_json() const;
  static BpeVocab from_json(std::string_view text);
  void save(const std::string& path) const;
  static BpeVocab load(const std::string& path);

 private:
  BpeVocab() = default;
  void rebuild_lookups();
  void add_token(const std::string& token);
  std::vector<std::string> split_symbols(std::string_view pre_token) const;
  std::vector<std::string> apply_merges(std::vector<std::string> symbols) const;

  struct PairHash {
    std::size_t operator()(const std::pair<std::string, std::string>& p) const;
  };

  std::vector<std::string> specials_;  // sorted
  std::vector<char32_t> alphabet_;     // sorted
  std::vector<std::pair<std::string, std::string>> merges_;  // rank order
  std::unordered_map<std::string, int> id_of_;
  std::vector<std::string> token_of_;

  std::unordered_set<char32_t> alphabet_set_;
  std::unordered_map<std::pair<std::string, std::string>, std::size_t, PairHash> rank_of_;
};

}  // namespace editsynth
