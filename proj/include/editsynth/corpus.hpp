#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace editsynth {

class BpeVocab;

struct CodeSnippet {
  std::string id;
  std::string code;
  std::optional<std::string> comment;
  std::string lang = "java";
};

struct LoadSummary {
  std::size_t lines = 0;
  std::size_t loaded = 0;
  std::size_t skipped = 0;
};

// Whitespace runs collapsed to a single space, ends trimmed, case kept.
// This is the snippet-equality relation used by all dedup paths.
std::string normalize_code(std::string_view code);

// One JSON record per line, keys "id" (optional), "code" (required),
// "comment" (optional), "lang" (optional, default "java"). Records failing
// validation are counted and skipped; more than 50% malformed lines is an
// error. Missing ids are synthesized from a content hash of the code.
std::vector<CodeSnippet> load_jsonl(const std::string& path, LoadSummary* summary = nullptr);

void save_jsonl(const std::string& path, const std::vector<CodeSnippet>& snippets);

// Keeps the first occurrence of each normalized code text.
std::vector<CodeSnippet> dedup_within(std::vector<CodeSnippet> snippets);

// Removes from train every snippet whose normalized code appears in test.
std::vector<CodeSnippet> dedup_against(std::vector<CodeSnippet> train,
                                       const std::vector<CodeSnippet>& test);

struct CorpusSplit {
  std::vector<CodeSnippet> train;
  std::vector<CodeSnippet> dev;
  std::uint64_t seed = 0;
};

// Deterministic partition with |dev| = round(dev_fraction * N).
CorpusSplit split(const std::vector<CodeSnippet>& snippets, double dev_fraction,
                  std::uint64_t seed);

struct CorpusStats {
  std::size_t total = 0;
  std::size_t with_comment = 0;
  std::size_t without_comment = 0;
  std::size_t duplicates = 0;
  // Token-count buckets of width 16 ("0-15", "16-31", ..., "512+");
  // present only when a vocab was supplied.
  std::map<std::string, std::size_t> token_length_histogram;
  std::string to_json() const;
};

CorpusStats stats(const std::vector<CodeSnippet>& snippets, const BpeVocab* vocab = nullptr);

}  // namespace editsynth
