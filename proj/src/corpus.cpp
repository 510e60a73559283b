#include "editsynth/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "editsynth/bpe.hpp"
#include "editsynth/rng.hpp"
#include "json.hpp"

namespace editsynth {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

char hex_digit(std::uint64_t v) {
  return v < 10 ? static_cast<char>('0' + v) : static_cast<char>('a' + v - 10);
}

std::string content_hash(std::string_view code) {
  const std::uint64_t h = fnv1a64(code);
  std::string out = "h";
  for (int shift = 60; shift >= 0; shift -= 4) out.push_back(hex_digit((h >> shift) & 0xF));
  return out;
}

std::optional<CodeSnippet> parse_record(const std::string& line) {
  ordered_json j = ordered_json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("code") || !j["code"].is_string()) return std::nullopt;
  CodeSnippet s;
  s.code = j["code"].get<std::string>();
  if (normalize_code(s.code).empty()) return std::nullopt;
  if (j.contains("id")) {
    if (!j["id"].is_string()) return std::nullopt;
    s.id = j["id"].get<std::string>();
  }
  if (j.contains("comment") && !j["comment"].is_null()) {
    if (!j["comment"].is_string()) return std::nullopt;
    s.comment = j["comment"].get<std::string>();
  }
  if (j.contains("lang")) {
    if (!j["lang"].is_string()) return std::nullopt;
    s.lang = j["lang"].get<std::string>();
  }
  return s;
}

}  // namespace

std::string normalize_code(std::string_view code) {
  std::string out;
  out.reserve(code.size());
  bool pending_space = false;
  for (char c : code) {
    if (is_ws(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::vector<CodeSnippet> load_jsonl(const std::string& path, LoadSummary* summary) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path);

  std::vector<CodeSnippet> out;
  LoadSummary sum;
  std::unordered_set<std::string> explicit_ids;
  std::unordered_map<std::string, std::size_t> hash_uses;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++sum.lines;
    auto rec = parse_record(line);
    if (!rec) {
      ++sum.skipped;
      continue;
    }
    if (rec->id.empty()) {
      std::string h = content_hash(rec->code);
      const auto uses = ++hash_uses[h];
      if (uses > 1) h += "-" + std::to_string(uses);
      rec->id = std::move(h);
    } else if (!explicit_ids.insert(rec->id).second) {
      throw std::runtime_error("corpus file has duplicate id: " + rec->id);
    }
    out.push_back(std::move(*rec));
    ++sum.loaded;
  }
  if (sum.lines > 0 && sum.skipped * 2 > sum.lines)
    throw std::runtime_error("corpus unusable: " + std::to_string(sum.skipped) + " of " +
                             std::to_string(sum.lines) + " lines malformed");
  if (summary) *summary = sum;
  return out;
}

void save_jsonl(const std::string& path, const std::vector<CodeSnippet>& snippets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& s : snippets) {
    ordered_json j;
    j["id"] = s.id;
    j["code"] = s.code;
    if (s.comment) j["comment"] = *s.comment;
    j["lang"] = s.lang;
    out << j.dump() << "\n";
  }
}

std::vector<CodeSnippet> dedup_within(std::vector<CodeSnippet> snippets) {
  std::unordered_set<std::string> seen;
  std::vector<CodeSnippet> out;
  out.reserve(snippets.size());
  for (auto& s : snippets)
    if (seen.insert(normalize_code(s.code)).second) out.push_back(std::move(s));
  return out;
}

std::vector<CodeSnippet> dedup_against(std::vector<CodeSnippet> train,
                                       const std::vector<CodeSnippet>& test) {
  std::unordered_set<std::string> banned;
  banned.reserve(test.size());
  for (const auto& s : test) banned.insert(normalize_code(s.code));
  std::vector<CodeSnippet> out;
  out.reserve(train.size());
  for (auto& s : train)
    if (!banned.count(normalize_code(s.code))) out.push_back(std::move(s));
  return out;
}

CorpusSplit split(const std::vector<CodeSnippet>& snippets, double dev_fraction,
                  std::uint64_t seed) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0))
    throw std::invalid_argument("split: dev_fraction must be in (0,1)");
  if (snippets.size() < 2) throw std::invalid_argument("split: need at least 2 snippets");

  const std::size_t n = snippets.size();
  const auto dev_n = static_cast<std::size_t>(
      std::llround(dev_fraction * static_cast<double>(n)));

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.next_below(i + 1)]);

  std::vector<std::size_t> dev_idx(idx.begin(), idx.begin() + dev_n);
  std::vector<std::size_t> train_idx(idx.begin() + dev_n, idx.end());
  std::sort(dev_idx.begin(), dev_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  CorpusSplit out;
  out.seed = seed;
  for (auto i : train_idx) out.train.push_back(snippets[i]);
  for (auto i : dev_idx) out.dev.push_back(snippets[i]);
  return out;
}

CorpusStats stats(const std::vector<CodeSnippet>& snippets, const BpeVocab* vocab) {
  CorpusStats st;
  st.total = snippets.size();
  std::unordered_set<std::string> seen;
  for (const auto& s : snippets) {
    if (s.comment)
      ++st.with_comment;
    else
      ++st.without_comment;
    if (!seen.insert(normalize_code(s.code)).second) ++st.duplicates;
    if (vocab) {
      const std::size_t len = vocab->encode(s.code).size();
      std::string bucket;
      if (len >= 512) {
        bucket = "512+";
      } else {
        const std::size_t lo = len / 16 * 16;
        bucket = std::to_string(lo) + "-" + std::to_string(lo + 15);
      }
      ++st.token_length_histogram[bucket];
    }
  }
  return st;
}

std::string CorpusStats::to_json() const {
  ordered_json j;
  j["total"] = total;
  j["with_comment"] = with_comment;
  j["without_comment"] = without_comment;
  j["duplicates"] = duplicates;
  ordered_json hist = ordered_json::object();
  for (const auto& [k, v] : token_length_histogram) hist[k] = v;
  j["token_length_histogram"] = std::move(hist);
  return j.dump(2) + "\n";
}

}  // namespace editsynth
