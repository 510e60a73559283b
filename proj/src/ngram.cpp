#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "editsynth/generator.hpp"
#include "editsynth/special_tokens.hpp"
#include "json.hpp"

namespace editsynth {

namespace {

using ordered_json = nlohmann::ordered_json;

// Breadth-limited search constants. Wide enough that rankings are stable in
// practice; the emitted scores are always exact.
constexpr std::size_t kExpandWidth = 32;

bool lex_less(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

bool candidate_order(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  return lex_less(a.tokens, b.tokens);
}

bool proposable(const std::string& tok) {
  if (tok == NGramModel::kBos || tok == NGramModel::kEos) return false;
  for (auto r : kReservedTokens)
    if (tok == r) return false;
  return true;
}

}  // namespace

std::vector<Candidate> normalize_candidates(std::vector<Candidate> cands, std::size_t k,
                                            std::size_t target_len) {
  std::erase_if(cands, [&](const Candidate& c) { return c.tokens.size() != target_len; });
  std::sort(cands.begin(), cands.end(), candidate_order);
  if (cands.size() > k) cands.resize(k);
  return cands;
}

std::optional<std::vector<std::string>> pick_inferior(
    const std::vector<Candidate>& cands, const std::vector<std::string>& original,
    Rng& rng) {
  if (cands.empty()) throw std::invalid_argument("pick_inferior: no candidates");
  std::vector<const Candidate*> alts;
  alts.reserve(cands.size());
  for (const auto& c : cands)
    if (c.tokens != original) alts.push_back(&c);
  if (alts.empty()) return std::nullopt;
  return alts[rng.next_below(alts.size())]->tokens;
}

std::size_t NGramModel::VecHash::operator()(const std::vector<std::string>& v) const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& s : v) {
    h ^= fnv1a64(s);
    h *= 0x100000001b3ULL;
    h ^= s.size();
  }
  return static_cast<std::size_t>(h);
}

NGramModel NGramModel::train(const std::vector<TokenSequence>& corpus, int order,
                             double alpha) {
  if (order < 2) throw std::invalid_argument("train_ngram: order must be >= 2");
  if (!(alpha > 0.0)) throw std::invalid_argument("train_ngram: alpha must be > 0");
  std::size_t total_tokens = 0;
  for (const auto& seq : corpus) total_tokens += seq.size();
  if (corpus.empty() || total_tokens == 0)
    throw std::invalid_argument("train_ngram: empty corpus");

  NGramModel m;
  m.order_ = order;
  m.alpha_ = alpha;
  const std::size_t ctx_len = static_cast<std::size_t>(order) - 1;
  for (const auto& seq : corpus) {
    std::vector<std::string> padded;
    padded.reserve(seq.size() + ctx_len + 1);
    padded.insert(padded.end(), ctx_len, kBos);
    padded.insert(padded.end(), seq.begin(), seq.end());
    padded.emplace_back(kEos);
    for (std::size_t t = ctx_len; t < padded.size(); ++t) {
      std::vector<std::string> ctx(padded.begin() + static_cast<std::ptrdiff_t>(t - ctx_len),
                                   padded.begin() + static_cast<std::ptrdiff_t>(t));
      ++m.context_counts_[std::move(ctx)][padded[t]];
      ++m.unigrams_[padded[t]];
    }
  }
  m.rebuild_derived();
  return m;
}

void NGramModel::rebuild_derived() {
  context_totals_.clear();
  for (const auto& [ctx, nexts] : context_counts_) {
    std::uint64_t t = 0;
    for (const auto& [tok, c] : nexts) t += c;
    context_totals_[ctx] = t;
  }
  next_space_.clear();
  next_space_.reserve(unigrams_.size() + 1);
  for (const auto& [tok, c] : unigrams_) next_space_.push_back(tok);
  if (!std::binary_search(next_space_.begin(), next_space_.end(), kEos)) {
    next_space_.emplace_back(kEos);
    std::sort(next_space_.begin(), next_space_.end());
  }

  top_unigrams_.clear();
  for (const auto& [tok, c] : unigrams_)
    if (proposable(tok)) top_unigrams_.push_back(tok);
  std::sort(top_unigrams_.begin(), top_unigrams_.end(),
            [this](const std::string& a, const std::string& b) {
              const auto ca = unigrams_.at(a), cb = unigrams_.at(b);
              if (ca != cb) return ca > cb;
              return a < b;
            });
}

double NGramModel::log_prob(const std::vector<std::string>& context,
                            const std::string& next) const {
  const std::size_t ctx_len = static_cast<std::size_t>(order_) - 1;
  std::vector<std::string> ctx;
  if (context.size() >= ctx_len) {
    ctx.assign(context.end() - static_cast<std::ptrdiff_t>(ctx_len), context.end());
  } else {
    ctx.assign(ctx_len - context.size(), kBos);
    ctx.insert(ctx.end(), context.begin(), context.end());
  }
  const double v = static_cast<double>(next_space_.size());
  std::uint64_t count = 0, total = 0;
  if (auto it = context_counts_.find(ctx); it != context_counts_.end()) {
    total = context_totals_.at(ctx);
    if (auto jt = it->second.find(next); jt != it->second.end()) count = jt->second;
  }
  return std::log((static_cast<double>(count) + alpha_) /
                  (static_cast<double>(total) + alpha_ * v));
}

std::vector<std::string> NGramModel::left_context(const BlankedCode& blanked,
                                                  std::size_t blank_pos) const {
  const std::size_t ctx_len = static_cast<std::size_t>(order_) - 1;
  std::vector<std::string> ctx;
  ctx.reserve(ctx_len);
  const std::size_t take = std::min(ctx_len, blank_pos);
  ctx.insert(ctx.end(), ctx_len - take, kBos);
  ctx.insert(ctx.end(),
             blanked.tokens.begin() + static_cast<std::ptrdiff_t>(blank_pos - take),
             blanked.tokens.begin() + static_cast<std::ptrdiff_t>(blank_pos));
  return ctx;
}

std::vector<std::string> NGramModel::expansion(const std::vector<std::string>& context,
                                               std::size_t width) const {
  std::vector<std::string> out;
  out.reserve(width);
  if (auto it = context_counts_.find(context); it != context_counts_.end()) {
    std::vector<std::pair<std::string, std::uint64_t>> observed(it->second.begin(),
                                                                it->second.end());
    std::sort(observed.begin(), observed.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    for (const auto& [tok, c] : observed) {
      if (!proposable(tok)) continue;
      out.push_back(tok);
      if (out.size() >= width) return out;
    }
  }
  for (const auto& tok : top_unigrams_) {
    if (out.size() >= width) break;
    if (std::find(out.begin(), out.end(), tok) == out.end()) out.push_back(tok);
  }
  return out;
}

std::vector<Candidate> NGramModel::candidates(const BlankedCode& blanked,
                                              std::size_t blank_index, std::size_t k,
                                              std::size_t target_len) const {
  if (blank_index >= blanked.blank_count())
    throw std::invalid_argument("candidates: blank_index out of range");
  if (target_len == 0) throw std::invalid_argument("candidates: target_len must be >= 1");
  if (k == 0) return {};

  const std::size_t blank_pos = blanked.blank_positions[blank_index];
  const std::string right = blank_pos + 1 < blanked.tokens.size()
                                ? blanked.tokens[blank_pos + 1]
                                : std::string(kEos);
  const std::size_t ctx_len = static_cast<std::size_t>(order_) - 1;

  struct Hyp {
    double score;
    std::vector<std::string> tokens;
    std::vector<std::string> ctx;
  };
  const std::size_t hyp_cap = std::max<std::size_t>(2 * k, 16);
  std::vector<Hyp> hyps{{0.0, {}, left_context(blanked, blank_pos)}};

  for (std::size_t step = 0; step < target_len; ++step) {
    std::vector<Hyp> next;
    next.reserve(hyps.size() * kExpandWidth);
    for (const auto& h : hyps) {
      for (const auto& tok : expansion(h.ctx, kExpandWidth)) {
        Hyp nh;
        nh.score = h.score + log_prob(h.ctx, tok);
        nh.tokens = h.tokens;
        nh.tokens.push_back(tok);
        nh.ctx = h.ctx;
        nh.ctx.erase(nh.ctx.begin());
        nh.ctx.push_back(tok);
        if (nh.ctx.size() > ctx_len) nh.ctx.erase(nh.ctx.begin());
        next.push_back(std::move(nh));
      }
    }
    std::sort(next.begin(), next.end(), [](const Hyp& a, const Hyp& b) {
      if (a.score != b.score) return a.score > b.score;
      return lex_less(a.tokens, b.tokens);
    });
    if (next.size() > hyp_cap) next.resize(hyp_cap);
    hyps = std::move(next);
  }

  std::vector<Candidate> cands;
  cands.reserve(hyps.size());
  for (auto& h : hyps)
    cands.push_back({std::move(h.tokens), h.score + log_prob(h.ctx, right)});
  cands = normalize_candidates(std::move(cands), k, target_len);

  if (cands.empty()) {
    // Unigram fallback; unreachable for a trained model but keeps the
    // contract total.
    for (const auto& tok : top_unigrams_) {
      if (cands.size() >= k) break;
      Candidate c;
      c.tokens.assign(target_len, tok);
      auto ctx = left_context(blanked, blank_pos);
      for (const auto& t : c.tokens) {
        c.score += log_prob(ctx, t);
        ctx.erase(ctx.begin());
        ctx.push_back(t);
      }
      c.score += log_prob(ctx, right);
      cands.push_back(std::move(c));
    }
  }
  return cands;
}

std::vector<std::vector<std::string>> NGramModel::contexts() const {
  std::vector<std::vector<std::string>> out;
  out.reserve(context_counts_.size());
  for (const auto& [ctx, nexts] : context_counts_) out.push_back(ctx);
  std::sort(out.begin(), out.end());
  return out;
}

std::string NGramModel::to_json() const {
  ordered_json j;
  j["version"] = 1;
  j["order"] = order_;
  j["alpha"] = alpha_;
  ordered_json uni = ordered_json::object();
  for (const auto& [tok, c] : unigrams_) uni[tok] = c;
  j["unigrams"] = std::move(uni);

  auto ctxs = contexts();
  ordered_json arr = ordered_json::array();
  for (const auto& ctx : ctxs) {
    ordered_json e;
    e["context"] = ctx;
    ordered_json counts = ordered_json::object();
    for (const auto& [tok, c] : context_counts_.at(ctx)) counts[tok] = c;
    e["counts"] = std::move(counts);
    arr.push_back(std::move(e));
  }
  j["contexts"] = std::move(arr);
  return j.dump() + "\n";
}

NGramModel NGramModel::from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("model file: invalid JSON: ") + e.what());
  }
  if (!j.contains("version") || j["version"].get<int>() != 1)
    throw std::runtime_error("model file: unsupported version");
  NGramModel m;
  m.order_ = j.at("order").get<int>();
  m.alpha_ = j.at("alpha").get<double>();
  if (m.order_ < 2) throw std::runtime_error("model file: order must be >= 2");
  for (auto it = j.at("unigrams").begin(); it != j.at("unigrams").end(); ++it)
    m.unigrams_[it.key()] = it.value().get<std::uint64_t>();
  for (const auto& e : j.at("contexts")) {
    auto ctx = e.at("context").get<std::vector<std::string>>();
    auto& nexts = m.context_counts_[ctx];
    const auto& counts = e.at("counts");
    for (auto it = counts.begin(); it != counts.end(); ++it)
      nexts[it.key()] = it.value().get<std::uint64_t>();
  }
  m.rebuild_derived();
  return m;
}

void NGramModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << to_json();
}

NGramModel NGramModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace editsynth
