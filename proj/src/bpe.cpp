#include "editsynth/bpe.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "editsynth/rng.hpp"
#include "editsynth/special_tokens.hpp"
#include "editsynth/utf8.hpp"
#include "json.hpp"

namespace editsynth {

namespace {

using ordered_json = nlohmann::ordered_json;

bool is_ws(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '_';
}

constexpr std::string_view kUnkPrefix = "<unk-char:";

std::string unk_token(char32_t cp) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "<unk-char:%X>", static_cast<unsigned>(cp));
  return buf;
}

std::optional<char32_t> parse_unk_token(std::string_view tok) {
  if (tok.size() <= kUnkPrefix.size() + 1 || tok.substr(0, kUnkPrefix.size()) != kUnkPrefix ||
      tok.back() != '>')
    return std::nullopt;
  char32_t cp = 0;
  for (char c : tok.substr(kUnkPrefix.size(), tok.size() - kUnkPrefix.size() - 1)) {
    cp <<= 4;
    if (c >= '0' && c <= '9') cp |= static_cast<char32_t>(c - '0');
    else if (c >= 'A' && c <= 'F') cp |= static_cast<char32_t>(c - 'A' + 10);
    else return std::nullopt;
  }
  return cp;
}

// Segments of text around verbatim special-token occurrences. Earliest match
// wins; at the same position the longest special wins.
struct Segment {
  std::string_view text;
  bool special;
};

std::vector<Segment> split_on_specials(std::string_view text,
                                       const std::vector<std::string>& specials) {
  std::vector<Segment> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t best_pos = std::string_view::npos;
    std::size_t best_len = 0;
    for (const auto& s : specials) {
      if (s.empty()) continue;
      const auto p = text.find(s, pos);
      if (p == std::string_view::npos) continue;
      if (p < best_pos || (p == best_pos && s.size() > best_len)) {
        best_pos = p;
        best_len = s.size();
      }
    }
    if (best_pos == std::string_view::npos) {
      out.push_back({text.substr(pos), false});
      break;
    }
    if (best_pos > pos) out.push_back({text.substr(pos, best_pos - pos), false});
    out.push_back({text.substr(best_pos, best_len), true});
    pos = best_pos + best_len;
  }
  return out;
}

}  // namespace

std::vector<std::string> pre_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t begin = i;
    if (is_ws(text[i])) {
      std::size_t j = i;
      while (j < n && is_ws(text[j])) ++j;
      if (j < n && text[j - 1] == ' ') {
        // last space of the run joins the following token
        if (j - 1 > i) out.emplace_back(text.substr(i, j - 1 - i));
        begin = j - 1;
        i = j;
      } else {
        out.emplace_back(text.substr(i, j - i));
        i = j;
        continue;
      }
    }
    std::size_t j = i;
    if (is_word(text[j])) {
      while (j < n && is_word(text[j])) ++j;
    } else {
      while (j < n && !is_ws(text[j]) && !is_word(text[j])) ++j;
    }
    out.emplace_back(text.substr(begin, j - begin));
    i = j;
  }
  return out;
}

std::size_t BpeVocab::PairHash::operator()(
    const std::pair<std::string, std::string>& p) const {
  std::uint64_t h = fnv1a64(p.first);
  h ^= fnv1a64(p.second) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return static_cast<std::size_t>(h);
}

void BpeVocab::add_token(const std::string& token) {
  if (id_of_.count(token)) return;
  id_of_.emplace(token, static_cast<int>(token_of_.size()));
  token_of_.push_back(token);
}

void BpeVocab::rebuild_lookups() {
  alphabet_set_.clear();
  for (char32_t cp : alphabet_) alphabet_set_.insert(cp);
  rank_of_.clear();
  for (std::size_t r = 0; r < merges_.size(); ++r) rank_of_.emplace(merges_[r], r);
}

BpeVocab BpeVocab::train(const std::vector<std::string>& corpus,
                         std::size_t vocab_size,
                         std::vector<std::string> special_tokens) {
  std::size_t total_chars = 0;
  for (const auto& u : corpus) total_chars += u.size();
  if (corpus.empty() || total_chars == 0)
    throw std::invalid_argument("train_bpe: empty corpus");

  std::sort(special_tokens.begin(), special_tokens.end());
  special_tokens.erase(std::unique(special_tokens.begin(), special_tokens.end()),
                       special_tokens.end());

  // Pre-token frequencies; special-token occurrences are excluded from the
  // merge statistics so no merge path can ever rebuild one.
  std::unordered_map<std::string, std::uint64_t> word_freq;
  std::unordered_set<char32_t> alpha;
  for (const auto& unit : corpus) {
    for (const auto& seg : split_on_specials(unit, special_tokens)) {
      if (seg.special) continue;
      for (auto& w : pre_tokenize(seg.text)) {
        for (char32_t cp : utf8::decode(w)) alpha.insert(cp);
        ++word_freq[std::move(w)];
      }
    }
  }

  const std::size_t floor = alpha.size() + special_tokens.size();
  if (vocab_size <= floor)
    throw std::invalid_argument(
        "train_bpe: vocab_size too small; minimum is " + std::to_string(floor + 1) +
        " (" + std::to_string(alpha.size()) + " alphabet chars + " +
        std::to_string(special_tokens.size()) + " special tokens + 1)");

  BpeVocab v;
  v.specials_ = special_tokens;
  v.alphabet_.assign(alpha.begin(), alpha.end());
  std::sort(v.alphabet_.begin(), v.alphabet_.end());
  for (const auto& s : v.specials_) v.add_token(s);
  for (char32_t cp : v.alphabet_) {
    std::string t;
    utf8::append(t, cp);
    v.add_token(t);
  }

  struct Word {
    std::vector<std::string> symbols;
    std::uint64_t freq;
  };
  std::vector<Word> words;
  words.reserve(word_freq.size());
  for (const auto& [text, freq] : word_freq) {
    Word w;
    w.freq = freq;
    for (char32_t cp : utf8::decode(text)) {
      std::string s;
      utf8::append(s, cp);
      w.symbols.push_back(std::move(s));
    }
    words.push_back(std::move(w));
  }

  using Pair = std::pair<std::string, std::string>;
  std::unordered_map<Pair, std::int64_t, PairHash> counts;
  std::unordered_map<Pair, std::unordered_set<std::size_t>, PairHash> occurs;

  struct HeapEntry {
    std::int64_t count;
    Pair pair;
    bool operator<(const HeapEntry& o) const {
      if (count != o.count) return count < o.count;
      return pair > o.pair;  // smaller pair wins ties
    }
  };
  std::priority_queue<HeapEntry> heap;

  for (std::size_t wi = 0; wi < words.size(); ++wi) {
    const auto& w = words[wi];
    for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) {
      Pair p{w.symbols[i], w.symbols[i + 1]};
      counts[p] += static_cast<std::int64_t>(w.freq);
      occurs[p].insert(wi);
    }
  }
  for (const auto& [p, c] : counts) heap.push({c, p});

  while (v.size() < vocab_size && !heap.empty()) {
    HeapEntry top = heap.top();
    heap.pop();
    auto it = counts.find(top.pair);
    if (it == counts.end() || it->second != top.count) continue;  // stale
    if (top.count < 2) break;

    const std::string merged = top.pair.first + top.pair.second;
    const bool is_new = !v.id_of_.count(merged);
    if (is_new && v.size() >= vocab_size) break;
    v.merges_.push_back(top.pair);
    if (is_new) v.add_token(merged);

    auto affected = occurs[top.pair];  // copy; mutated below
    std::unordered_map<Pair, std::int64_t, PairHash> delta;
    for (std::size_t wi : affected) {
      auto& w = words[wi];
      bool has = false;
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
        if (w.symbols[i] == top.pair.first && w.symbols[i + 1] == top.pair.second) {
          has = true;
          break;
        }
      if (!has) continue;  // stale occurrence

      std::vector<std::string> merged_syms;
      merged_syms.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size();) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == top.pair.first &&
            w.symbols[i + 1] == top.pair.second) {
          merged_syms.push_back(merged);
          i += 2;
        } else {
          merged_syms.push_back(w.symbols[i]);
          ++i;
        }
      }
      const auto f = static_cast<std::int64_t>(w.freq);
      delta.clear();
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i)
        delta[{w.symbols[i], w.symbols[i + 1]}] -= f;
      for (std::size_t i = 0; i + 1 < merged_syms.size(); ++i)
        delta[{merged_syms[i], merged_syms[i + 1]}] += f;
      for (const auto& [p, d] : delta) {
        if (d == 0) continue;
        auto& c = counts[p];
        c += d;
        if (d > 0) occurs[p].insert(wi);
        if (c <= 0) {
          counts.erase(p);
          occurs.erase(p);
        } else {
          heap.push({c, p});
        }
      }
      w.symbols = std::move(merged_syms);
    }
    counts.erase(top.pair);
    occurs.erase(top.pair);
  }

  v.rebuild_lookups();
  return v;
}

std::vector<std::string> BpeVocab::split_symbols(std::string_view pre_token) const {
  std::vector<std::string> symbols;
  for (char32_t cp : utf8::decode(pre_token)) {
    if (alphabet_set_.count(cp)) {
      std::string s;
      utf8::append(s, cp);
      symbols.push_back(std::move(s));
    } else {
      symbols.push_back(unk_token(cp));
    }
  }
  return symbols;
}

std::vector<std::string> BpeVocab::apply_merges(std::vector<std::string> symbols) const {
  while (symbols.size() > 1) {
    std::size_t best_rank = rank_of_.size();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = rank_of_.find({symbols[i], symbols[i + 1]});
      if (it != rank_of_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == rank_of_.size()) break;
    const auto& [a, b] = merges_[best_rank];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == a && symbols[i + 1] == b) {
        next.push_back(a + b);
        i += 2;
      } else {
        next.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

TokenSequence BpeVocab::encode(std::string_view text) const {
  TokenSequence out;
  for (const auto& seg : split_on_specials(text, specials_)) {
    if (seg.special) {
      out.emplace_back(seg.text);
      continue;
    }
    for (const auto& w : pre_tokenize(seg.text)) {
      auto symbols = apply_merges(split_symbols(w));
      for (auto& s : symbols) out.push_back(std::move(s));
    }
  }
  return out;
}

std::string BpeVocab::decode_with_offsets(
    const TokenSequence& tokens,
    std::vector<std::pair<std::size_t, std::size_t>>* offsets) const {
  std::string out;
  if (offsets) {
    offsets->clear();
    offsets->reserve(tokens.size());
  }
  for (const auto& tok : tokens) {
    const std::size_t begin = out.size();
    if (is_special(tok)) {
      if (!out.empty() && !is_ws(out.back())) out.push_back(' ');
      out += tok;
    } else if (auto cp = parse_unk_token(tok)) {
      utf8::append(out, *cp);
    } else if (id_of_.count(tok)) {
      out += tok;
    } else {
      throw std::invalid_argument("decode: unknown token: " + tok);
    }
    if (offsets) offsets->emplace_back(begin, out.size());
  }
  return out;
}

std::string BpeVocab::decode(const TokenSequence& tokens) const {
  return decode_with_offsets(tokens, nullptr);
}

bool BpeVocab::is_special(std::string_view token) const {
  return std::binary_search(specials_.begin(), specials_.end(), token);
}

std::optional<int> BpeVocab::token_id(std::string_view token) const {
  auto it = id_of_.find(std::string(token));
  if (it == id_of_.end()) return std::nullopt;
  return it->second;
}

std::string BpeVocab::to_json() const {
  ordered_json j;
  j["version"] = 1;
  j["special_tokens"] = specials_;
  ordered_json alpha = ordered_json::array();
  for (char32_t cp : alphabet_) {
    std::string s;
    utf8::append(s, cp);
    alpha.push_back(s);
  }
  j["alphabet"] = std::move(alpha);
  ordered_json merges = ordered_json::array();
  for (const auto& [a, b] : merges_) merges.push_back(ordered_json::array({a, b}));
  j["merges"] = std::move(merges);
  ordered_json vocab = ordered_json::object();
  for (std::size_t id = 0; id < token_of_.size(); ++id)
    vocab[token_of_[id]] = static_cast<int>(id);
  j["vocab"] = std::move(vocab);
  return j.dump(2) + "\n";
}

BpeVocab BpeVocab::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("vocab file: invalid JSON: ") + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw std::runtime_error("vocab file: unsupported version");
  BpeVocab v;
  v.specials_ = j.at("special_tokens").get<std::vector<std::string>>();
  for (const auto& a : j.at("alphabet")) {
    auto cps = utf8::decode(a.get<std::string>());
    if (cps.size() != 1)
      throw std::runtime_error("vocab file: alphabet entry is not a single character");
    v.alphabet_.push_back(cps[0]);
  }
  for (const auto& m : j.at("merges")) {
    if (!m.is_array() || m.size() != 2)
      throw std::runtime_error("vocab file: malformed merge entry");
    v.merges_.emplace_back(m[0].get<std::string>(), m[1].get<std::string>());
  }
  for (auto it = j.at("vocab").begin(); it != j.at("vocab").end(); ++it) {
    const int id = it.value().get<int>();
    if (id != static_cast<int>(v.token_of_.size()))
      throw std::runtime_error("vocab file: token ids must be dense and ordered");
    v.token_of_.push_back(it.key());
    if (!v.id_of_.emplace(it.key(), id).second)
      throw std::runtime_error("vocab file: duplicate token " + it.key());
  }
  v.rebuild_lookups();
  return v;
}

void BpeVocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocab file: " + path);
  out << to_json();
}

BpeVocab BpeVocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocab file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace editsynth
