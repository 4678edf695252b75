// Copyright 2026 The HyperLoRA-Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hyperlora/transform.hpp"

#include "hyperlora/io.hpp"
#include "hyperlora/random.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <set>
#include <sstream>

namespace hyperlora::transform {

TokenSentence::TokenSentence(std::vector<std::string> toks, std::vector<std::string> tgs)
    : tokens(std::move(toks)), tags(std::move(tgs)) {
  validate();
}

const std::string& TokenSentence::tag(std::size_t i) const {
  static const std::string kNone;
  return tagged() && i < tags.size() ? tags[i] : kNone;
}

void TokenSentence::validate() const {
  if (tokens.empty()) throw ValidationError("sentence must contain at least one token");
  if (!tags.empty() && tags.size() != tokens.size()) {
    throw ValidationError("tags must align one-to-one with tokens");
  }
}

TokenSentence parse_sentence(std::string_view line, std::size_t line_no) {
  std::vector<std::string> toks;
  std::vector<std::string> tags;
  std::size_t n_tagged = 0;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
    if (pos >= line.size()) break;
    auto end = line.find_first_of(" \t\r", pos);
    if (end == std::string_view::npos) end = line.size();
    auto item = line.substr(pos, end - pos);
    pos = end;
    auto bar = item.rfind('|');
    if (bar != std::string_view::npos && bar > 0 && bar + 1 < item.size()) {
      toks.emplace_back(item.substr(0, bar));
      tags.emplace_back(item.substr(bar + 1));
      ++n_tagged;
    } else {
      toks.emplace_back(item);
      tags.emplace_back();
    }
  }
  if (toks.empty()) throw ParseError("empty sentence", line_no);
  if (n_tagged != 0 && n_tagged != toks.size()) {
    throw ParseError("either every token or no token must carry a |tag", line_no);
  }
  if (n_tagged == 0) tags.clear();
  return TokenSentence(std::move(toks), std::move(tags));
}

std::string join_tokens(const TokenSentence& s) {
  std::string out;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) out += ' ';
    out += s.tokens[i];
  }
  return out;
}

std::string join_tagged(const TokenSentence& s) {
  if (!s.tagged()) return join_tokens(s);
  std::string out;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    if (i) out += ' ';
    out += s.tokens[i];
    out += '|';
    out += s.tags[i];
  }
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool word_in(std::string_view w, std::initializer_list<std::string_view> set) {
  const auto lw = lower(w);
  return std::find(set.begin(), set.end(), std::string_view(lw)) != set.end();
}

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

const std::initializer_list<std::string_view> kBe = {"is", "are", "am"};
const std::initializer_list<std::string_view> kSubjects = {"i",  "you",  "he", "she",
                                                               "we", "they", "it"};

// Small mutable view used by the rule implementations.
struct Editable {
  std::vector<std::string> toks;
  std::vector<std::string> tags;
  bool tagged;

  explicit Editable(const TokenSentence& s) : toks(s.tokens), tags(s.tags), tagged(s.tagged()) {}
  std::size_t size() const { return toks.size(); }
  const std::string& tag(std::size_t i) const {
    static const std::string kNone;
    return tagged ? tags[i] : kNone;
  }
  void erase(std::size_t i) {
    toks.erase(toks.begin() + static_cast<std::ptrdiff_t>(i));
    if (tagged) tags.erase(tags.begin() + static_cast<std::ptrdiff_t>(i));
  }
  TokenSentence finish() && {
    return TokenSentence(std::move(toks), tagged ? std::move(tags) : std::vector<std::string>{});
  }
};

// Rewrites matches until none remain. Each rule's step strictly removes a
// match, so the loop terminates and the result is a fixed point.
template <typename FindFn, typename RewriteFn>
TokenSentence rewrite_all(const TokenSentence& s, FindFn find, RewriteFn rewrite) {
  Editable e(s);
  for (std::size_t guard = 0; guard < 4 * s.size() + 4; ++guard) {
    auto at = find(e);
    if (!at) break;
    rewrite(e, *at);
  }
  return std::move(e).finish();
}

// --- 72: group genitive ------------------------------------------------------
// "the girlfriend of the man I met is ..." -> "the man I met 's girlfriend is ..."
class GroupGenitive final : public RewriteRule {
 public:
  std::string_view id() const override { return "72"; }
  std::string_view description() const override { return "Group genitives"; }

  static std::optional<std::pair<std::size_t, std::size_t>> find(const Editable& e) {
    if (!e.tagged) return std::nullopt;
    for (std::size_t i = 0; i + 3 < e.size(); ++i) {
      if (lower(e.toks[i]) != "the" || e.tag(i + 1) != "NOUN" || lower(e.toks[i + 2]) != "of") {
        continue;
      }
      const auto& first = e.tag(i + 3);
      if (first != "DET" && first != "PRON" && first != "PROPN") continue;
      for (std::size_t j = i + 4; j < e.size(); ++j) {
        if (e.tag(j) == "AUX") return std::make_pair(i, j);
      }
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); },
        [](Editable& e, std::pair<std::size_t, std::size_t> m) {
          const auto [i, aux] = m;
          std::vector<std::string> toks(e.toks.begin(), e.toks.begin() + i);
          std::vector<std::string> tags(e.tags.begin(), e.tags.begin() + i);
          toks.insert(toks.end(), e.toks.begin() + i + 3, e.toks.begin() + aux);
          tags.insert(tags.end(), e.tags.begin() + i + 3, e.tags.begin() + aux);
          toks.push_back("'s");
          tags.push_back("PART");
          toks.push_back(e.toks[i + 1]);
          tags.push_back(e.tags[i + 1]);
          toks.insert(toks.end(), e.toks.begin() + aux, e.toks.end());
          tags.insert(tags.end(), e.tags.begin() + aux, e.tags.end());
          e.toks = std::move(toks);
          e.tags = std::move(tags);
        });
  }
};

// --- 228: no inversion in wh-questions ---------------------------------------
class NoInversionWh final : public RewriteRule {
 public:
  std::string_view id() const override { return "228"; }
  std::string_view description() const override {
    return "No inversion/no auxiliaries in wh-questions";
  }
  static std::optional<std::size_t> find(const Editable& e) {
    for (std::size_t i = 0; i + 2 < e.size(); ++i) {
      if (word_in(e.toks[i], {"what", "where", "why", "who", "how", "when"}) &&
          word_in(e.toks[i + 1], {"is", "are", "am", "was", "were", "do", "does", "did", "can",
                                  "will"}) &&
          word_in(e.toks[i + 2], kSubjects)) {
        return i + 1;
      }
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); },
        [](Editable& e, std::size_t i) {
          std::swap(e.toks[i], e.toks[i + 1]);
          if (e.tagged) std::swap(e.tags[i], e.tags[i + 1]);
        });
  }
};

// --- 165: invariant non-concord tags -----------------------------------------
class InvariantTag final : public RewriteRule {
 public:
  std::string_view id() const override { return "165"; }
  std::string_view description() const override { return "Invariant non-concord tags"; }
  static std::optional<std::size_t> find(const Editable& e) {
    const std::size_t n = e.size();
    if (n < 6) return std::nullopt;
    const std::size_t k = n - 5;
    if (e.toks[k] != "," || e.toks[n - 3] != "n't" || e.toks[n - 1] != "?") return std::nullopt;
    if (!word_in(e.toks[k + 1], {"is", "are", "am", "was", "were", "do", "does", "did", "can",
                                 "will"}) ||
        !word_in(e.toks[n - 2], kSubjects)) {
      return std::nullopt;
    }
    if (lower(e.toks[k + 1]) == "is" && lower(e.toks[n - 2]) == "it") return std::nullopt;
    return k + 1;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); },
        [](Editable& e, std::size_t aux) {
          e.toks[aux] = "is";
          e.toks[aux + 2] = "it";
          if (e.tagged) {
            e.tags[aux] = "AUX";
            e.tags[aux + 2] = "PRON";
          }
        });
  }
};

// --- 154: negative concord ---------------------------------------------------
class NegativeConcord final : public RewriteRule {
 public:
  std::string_view id() const override { return "154"; }
  std::string_view description() const override { return "Multiple negation / negative concord"; }
  static std::string_view negated(std::string_view w) {
    const auto lw = lower(w);
    if (lw == "any") return "no";
    if (lw == "anything") return "nothing";
    if (lw == "anybody" || lw == "anyone") return "nobody";
    if (lw == "anywhere") return "nowhere";
    return {};
  }
  static std::optional<std::size_t> find(const Editable& e) {
    bool seen_negator = false;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (seen_negator && !negated(e.toks[i]).empty()) return i;
      if (word_in(e.toks[i], {"n't", "not", "never"})) seen_negator = true;
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); },
        [](Editable& e, std::size_t i) { e.toks[i] = std::string(negated(e.toks[i])); });
  }
};

// --- 174: deletion of auxiliary be before progressive ------------------------
class AuxBeProgressive final : public RewriteRule {
 public:
  std::string_view id() const override { return "174"; }
  std::string_view description() const override {
    return "Deletion of auxiliary be: before progressive";
  }
  static std::optional<std::size_t> find(const Editable& e) {
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      if (!word_in(e.toks[i], {"is", "are", "am", "'s", "'re", "'m"})) continue;
      if (e.tagged && e.tag(i) != "AUX") continue;
      const auto& next = e.toks[i + 1];
      if (!ends_with(next, "ing") || next.size() <= 4) continue;
      if (e.tagged && e.tag(i + 1) != "VERB") continue;
      return i;
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); }, [](Editable& e, std::size_t i) { e.erase(i); });
  }
};

// --- 176: deletion of copula be before NPs -----------------------------------
class CopulaBeforeNp final : public RewriteRule {
 public:
  std::string_view id() const override { return "176"; }
  std::string_view description() const override { return "Deletion of copula be: before NPs"; }
  static std::optional<std::size_t> find(const Editable& e) {
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      if (!word_in(e.toks[i], kBe)) continue;
      if (e.tagged && e.tag(i) != "AUX") continue;
      const bool np = word_in(e.toks[i + 1], {"a", "an", "the"}) ||
                      e.tag(i + 1) == "NOUN" || e.tag(i + 1) == "PROPN";
      if (np) return i;
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); }, [](Editable& e, std::size_t i) { e.erase(i); });
  }
};

// --- 177: deletion of copula be before AdjPs ---------------------------------
class CopulaBeforeAdj final : public RewriteRule {
 public:
  std::string_view id() const override { return "177"; }
  std::string_view description() const override { return "Deletion of copula be: before AdjPs"; }
  static std::optional<std::size_t> find(const Editable& e) {
    if (!e.tagged) return std::nullopt;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      if (!word_in(e.toks[i], kBe) || e.tag(i) != "AUX") continue;
      if (e.tag(i + 1) == "ADJ") return i;
      if (i + 2 < e.size() && e.tag(i + 1) == "ADV" && e.tag(i + 2) == "ADJ") return i;
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); }, [](Editable& e, std::size_t i) { e.erase(i); });
  }
};

// --- 170: invariant present tense (zero third-person -s) ---------------------
class ThirdSingularZero final : public RewriteRule {
 public:
  std::string_view id() const override { return "170"; }
  std::string_view description() const override {
    return "Invariant present tense forms due to zero marking for the third person singular";
  }
  static bool strippable(std::string_view w) {
    return w.size() > 2 && w.back() == 's' && !ends_with(w, "ss") && !ends_with(w, "us") &&
           !ends_with(w, "is");
  }
  static std::string stem(std::string_view w) {
    if (ends_with(w, "ies") && w.size() > 4) return std::string(w.substr(0, w.size() - 3)) + "y";
    for (std::string_view sfx : {"shes", "ches", "xes", "zes", "oes"}) {
      if (ends_with(w, sfx)) return std::string(w.substr(0, w.size() - 2));
    }
    return std::string(w.substr(0, w.size() - 1));
  }
  static std::optional<std::size_t> find(const Editable& e) {
    if (!e.tagged) return std::nullopt;
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      if (word_in(e.toks[i], {"he", "she", "it"}) && e.tag(i + 1) == "VERB" &&
          strippable(e.toks[i + 1])) {
        return i + 1;
      }
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); },
        [](Editable& e, std::size_t i) { e.toks[i] = stem(e.toks[i]); });
  }
};

// --- 132: zero past tense of regular verbs -----------------------------------
// Silent-e stems are not restored ("liked" -> "lik"); the toy lexicon avoids them.
class ZeroPastTense final : public RewriteRule {
 public:
  std::string_view id() const override { return "132"; }
  std::string_view description() const override {
    return "Zero past tense forms of regular verbs";
  }
  static bool strippable(std::string_view w) {
    if (w.size() <= 4 || !ends_with(w, "ed") || ends_with(w, "eed")) return false;
    if (ends_with(w, "ied")) return true;
    const char last = w[w.size() - 3];
    return last != 'e' && last != 'd';
  }
  static std::string stem(std::string_view w) {
    if (ends_with(w, "ied")) return std::string(w.substr(0, w.size() - 3)) + "y";
    std::string s(w.substr(0, w.size() - 2));
    if (s.size() >= 3 && s[s.size() - 1] == s[s.size() - 2] &&
        std::string_view("bdgmnprt").find(s.back()) != std::string_view::npos) {
      s.pop_back();
    }
    return s;
  }
  static std::optional<std::size_t> find(const Editable& e) {
    if (!e.tagged) return std::nullopt;
    for (std::size_t i = 1; i < e.size(); ++i) {
      const auto& prev = e.tag(i - 1);
      if (e.tag(i) == "VERB" && (prev == "PRON" || prev == "NOUN" || prev == "PROPN") &&
          strippable(e.toks[i])) {
        return i;
      }
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override { return find(Editable(s)).has_value(); }
  TokenSentence apply(const TokenSentence& s) const override {
    return rewrite_all(
        s, [](const Editable& e) { return find(e); },
        [](Editable& e, std::size_t i) { e.toks[i] = stem(e.toks[i]); });
  }
};

// --- 62: zero article where StE has definite article -------------------------
class ZeroDefiniteArticle final : public RewriteRule {
 public:
  std::string_view id() const override { return "62"; }
  std::string_view description() const override {
    return "Use of zero article where StE has definite article";
  }
  static std::optional<std::size_t> find(const Editable& e) {
    if (e.size() < 2) return std::nullopt;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (lower(e.toks[i]) == "the" && (!e.tagged || e.tag(i) == "DET")) return i;
    }
    return std::nullopt;
  }
  bool applicable(const TokenSentence& s) const override {
    Editable e(s);
    if (!find(e)) return false;
    // must leave at least one token behind
    return std::any_of(e.toks.begin(), e.toks.end(), [](const auto& t) { return lower(t) != "the"; });
  }
  TokenSentence apply(const TokenSentence& s) const override {
    if (!applicable(s)) return s;
    return rewrite_all(
        s, [](const Editable& e) { return find(e); }, [](Editable& e, std::size_t i) { e.erase(i); });
  }
};

std::vector<std::unique_ptr<RewriteRule>> make_catalog() {
  std::vector<std::unique_ptr<RewriteRule>> rules;
  rules.push_back(std::make_unique<GroupGenitive>());
  rules.push_back(std::make_unique<NoInversionWh>());
  rules.push_back(std::make_unique<InvariantTag>());
  rules.push_back(std::make_unique<NegativeConcord>());
  rules.push_back(std::make_unique<AuxBeProgressive>());
  rules.push_back(std::make_unique<CopulaBeforeNp>());
  rules.push_back(std::make_unique<CopulaBeforeAdj>());
  rules.push_back(std::make_unique<ThirdSingularZero>());
  rules.push_back(std::make_unique<ZeroPastTense>());
  rules.push_back(std::make_unique<ZeroDefiniteArticle>());
  return rules;
}

}  // namespace

std::span<const std::unique_ptr<RewriteRule>> rule_catalog() {
  static const auto catalog = make_catalog();
  return catalog;
}

const RewriteRule* find_rule(std::string_view id) {
  for (const auto& r : rule_catalog()) {
    if (r->id() == id) return r.get();
  }
  return nullptr;
}

double RuleStream::draw(std::size_t rule_index) const {
  return keyed_uniform(seed_, {0x7472616e73666f72ULL, sentence_, rule_index});
}

TransformOutcome transform_sentence(const TokenSentence& s,
                                    const typology::DialectFeatureVector& dialect,
                                    const RuleStream& stream) {
  s.validate();
  TransformOutcome out{s, {}};
  const auto catalog = rule_catalog();
  for (std::size_t r = 0; r < catalog.size(); ++r) {
    const auto& rule = *catalog[r];
    const double rate = dialect.rate_of(rule.id());
    if (rate <= 0.0 || !rule.applicable(out.sentence)) continue;
    if (stream.draw(r) < rate) {
      out.sentence = rule.apply(out.sentence);
      out.applied.emplace_back(rule.id());
    }
  }
  return out;
}

std::uint64_t ParallelCorpus::sae_hash() const {
  std::uint64_t h = fnv1a("sae");
  for (const auto& p : pairs) h = fnv1a(join_tokens(p.sae) + "\n", h);
  return h;
}

std::uint64_t ParallelCorpus::content_hash() const {
  std::uint64_t h = fnv1a(dialect_id);
  for (const auto& p : pairs) {
    h = fnv1a(join_tokens(p.sae) + "\t" + join_tokens(p.dialect) + "\t", h);
    for (const auto& r : p.applied_rules) h = fnv1a(r + ",", h);
    h = fnv1a(std::string("\n"), h);
  }
  return h;
}

ParallelCorpus build_parallel_corpus(std::span<const TokenSentence> sentences,
                                     const typology::DialectFeatureVector& dialect,
                                     std::uint64_t seed) {
  if (sentences.empty()) throw ArgumentError("cannot build a parallel corpus from no sentences");
  ParallelCorpus corpus{dialect.dialect_id(), seed, {}};
  corpus.pairs.reserve(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto outcome = transform_sentence(sentences[i], dialect, RuleStream(seed, i));
    corpus.pairs.push_back({sentences[i], std::move(outcome.sentence), std::move(outcome.applied)});
  }
  return corpus;
}

CorpusStats corpus_stats(const ParallelCorpus& corpus) {
  CorpusStats stats;
  if (corpus.pairs.empty()) return stats;
  std::size_t changed = 0;
  std::set<std::string> applied;
  for (const auto& p : corpus.pairs) {
    if (p.dialect.tokens != p.sae.tokens) ++changed;
    applied.insert(p.applied_rules.begin(), p.applied_rules.end());
  }
  stats.pct_transformed = 100.0 * static_cast<double>(changed) / static_cast<double>(corpus.pairs.size());
  stats.applied_feature_count = applied.size();
  return stats;
}

std::vector<TokenSentence> load_corpus(const std::filesystem::path& path) {
  auto in = io::open_read(path);
  std::vector<TokenSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_sentence(line, line_no));
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, std::span<const TokenSentence> sentences) {
  auto out = io::open_write(path);
  for (const auto& s : sentences) out << join_tagged(s) << '\n';
}

void save_parallel_corpus(const std::filesystem::path& path, const ParallelCorpus& corpus) {
  auto out = io::open_write(path);
  for (const auto& p : corpus.pairs) {
    out << join_tokens(p.sae) << '\t' << join_tokens(p.dialect) << '\t';
    for (std::size_t i = 0; i < p.applied_rules.size(); ++i) {
      if (i) out << ',';
      out << p.applied_rules[i];
    }
    out << '\n';
  }
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& path, std::string dialect_id) {
  auto in = io::open_read(path);
  ParallelCorpus corpus{std::move(dialect_id), 0, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw ParseError("expected sae<TAB>dialect<TAB>rules", line_no);
    }
    ParallelPair p;
    p.sae = parse_sentence(std::string_view(line).substr(0, t1), line_no);
    p.dialect = parse_sentence(std::string_view(line).substr(t1 + 1, t2 - t1 - 1), line_no);
    std::stringstream rules(line.substr(t2 + 1));
    std::string r;
    while (std::getline(rules, r, ',')) {
      if (!r.empty()) p.applied_rules.push_back(r);
    }
    corpus.pairs.push_back(std::move(p));
  }
  if (corpus.pairs.empty()) throw ParseError("parallel corpus is empty", line_no);
  return corpus;
}

namespace {

struct Lexicon {
  std::array<std::string_view, 10> people{"man",     "woman",  "girl",    "boy",    "teacher",
                                          "doctor",  "friend", "neighbor", "student", "driver"};
  std::array<std::string_view, 10> things{"house", "car",  "book", "phone", "garden",
                                          "dog",   "shop", "road", "film",  "song"};
  std::array<std::string_view, 7> positive{"good", "great", "happy", "nice",
                                           "beautiful", "kind", "lovely"};
  std::array<std::string_view, 7> negative{"bad", "sad", "terrible", "ugly",
                                           "rude", "awful", "boring"};
  std::array<std::string_view, 8> present3{"likes",  "wants", "watches", "reads",
                                           "fixes",  "carries", "buys",  "visits"};
  std::array<std::string_view, 8> past{"visited", "watched", "cleaned", "opened",
                                       "called",  "helped",  "fixed",   "stopped"};
  std::array<std::string_view, 7> progressive{"reading",  "watching", "cleaning", "fixing",
                                              "visiting", "calling",  "helping"};
};

const Lexicon& lexicon() {
  static const Lexicon lex;
  return lex;
}

class SentenceBuilder {
 public:
  void add(std::string_view tok, std::string_view tag) {
    toks_.emplace_back(tok);
    tags_.emplace_back(tag);
  }
  TokenSentence build() && { return TokenSentence(std::move(toks_), std::move(tags_)); }

 private:
  std::vector<std::string> toks_;
  std::vector<std::string> tags_;
};

template <typename Arr>
std::string_view pick(CounterRng& rng, const Arr& arr) {
  return arr[rng.below(arr.size())];
}

struct Subject {
  std::string_view pron;
  std::string_view be;
  std::string_view do_neg;
};

Subject pick_subject(CounterRng& rng) {
  static constexpr std::array<Subject, 6> kSubj{{{"i", "am", "do"},
                                                  {"you", "are", "do"},
                                                  {"he", "is", "does"},
                                                  {"she", "is", "does"},
                                                  {"we", "are", "do"},
                                                  {"they", "are", "do"}}};
  return kSubj[rng.below(kSubj.size())];
}

std::string_view pick_adj(CounterRng& rng) {
  const auto& lex = lexicon();
  return rng.uniform() < 0.5 ? pick(rng, lex.positive) : pick(rng, lex.negative);
}

void object_np(SentenceBuilder& b, CounterRng& rng) {
  b.add("the", "DET");
  if (rng.uniform() < 0.7) b.add(pick_adj(rng), "ADJ");
  b.add(pick(rng, lexicon().things), "NOUN");
}

TokenSentence toy_sentence(CounterRng& rng) {
  const auto& lex = lexicon();
  SentenceBuilder b;
  switch (rng.below(8)) {
    case 0: {  // group genitive + copula before NP
      b.add("the", "DET");
      b.add(pick(rng, lex.people), "NOUN");
      b.add("of", "ADP");
      b.add("the", "DET");
      b.add(pick(rng, lex.people), "NOUN");
      if (rng.uniform() < 0.5) {
        auto s = pick_subject(rng);
        b.add(s.pron, "PRON");
        b.add("met", "VERB");
      }
      b.add("is", "AUX");
      b.add("a", "DET");
      if (rng.uniform() < 0.5) b.add("real", "ADJ");
      b.add(pick_adj(rng), "ADJ");
      b.add(pick(rng, lex.people), "NOUN");
      break;
    }
    case 1: {  // copula before adjective
      if (rng.uniform() < 0.5) {
        b.add("the", "DET");
        b.add(pick(rng, lex.things), "NOUN");
        b.add("is", "AUX");
      } else {
        auto s = pick_subject(rng);
        b.add(s.pron, "PRON");
        b.add(s.be, "AUX");
      }
      if (rng.uniform() < 0.4) b.add("very", "ADV");
      b.add(pick_adj(rng), "ADJ");
      break;
    }
    case 2: {  // progressive
      auto s = pick_subject(rng);
      b.add(s.pron, "PRON");
      b.add(s.be, "AUX");
      b.add(pick(rng, lex.progressive), "VERB");
      object_np(b, rng);
      break;
    }
    case 3: {  // negation + indefinite
      auto s = pick_subject(rng);
      b.add(s.pron, "PRON");
      switch (rng.below(3)) {
        case 0:
          b.add(s.do_neg, "AUX");
          b.add("n't", "PART");
          b.add("have", "VERB");
          b.add("any", "DET");
          if (rng.uniform() < 0.6) b.add(pick_adj(rng), "ADJ");
          b.add(pick(rng, lex.things) == "dog" ? "dogs" : "money", "NOUN");
          break;
        case 1:
          b.add("did", "AUX");
          b.add("n't", "PART");
          b.add("see", "VERB");
          b.add("anything", "PRON");
          b.add(pick_adj(rng), "ADJ");
          break;
        default:
          b.add("never", "ADV");
          b.add("met", "VERB");
          b.add("anybody", "PRON");
          b.add(pick_adj(rng), "ADJ");
          break;
      }
      break;
    }
    case 4: {  // wh-question
      static constexpr std::array<std::string_view, 4> kWh{"what", "where", "why", "who"};
      auto wh = kWh[rng.below(kWh.size())];
      auto s = pick_subject(rng);
      b.add(wh, wh == "where" || wh == "why" ? "ADV" : "PRON");
      b.add(s.be, "AUX");
      b.add(s.pron, "PRON");
      b.add(pick(rng, lex.progressive), "VERB");
      if (wh != "what" && wh != "who") object_np(b, rng);
      b.add("?", "PUNCT");
      return std::move(b).build();
    }
    case 5: {  // tag question
      auto s = pick_subject(rng);
      if (s.pron == "i") s = {"you", "are", "do"};
      b.add(s.pron, "PRON");
      b.add(s.be, "AUX");
      b.add(pick_adj(rng), "ADJ");
      b.add(",", "PUNCT");
      b.add(s.be, "AUX");
      b.add("n't", "PART");
      b.add(s.pron, "PRON");
      b.add("?", "PUNCT");
      return std::move(b).build();
    }
    case 6: {  // third person singular present
      static constexpr std::array<std::string_view, 3> k3{"he", "she", "it"};
      b.add(k3[rng.below(k3.size())], "PRON");
      b.add(pick(rng, lex.present3), "VERB");
      object_np(b, rng);
      break;
    }
    default: {  // regular past tense
      auto s = pick_subject(rng);
      b.add(s.pron, "PRON");
      b.add(pick(rng, lex.past), "VERB");
      object_np(b, rng);
      if (rng.uniform() < 0.3) b.add("yesterday", "ADV");
      break;
    }
  }
  b.add(".", "PUNCT");
  return std::move(b).build();
}

}  // namespace

std::vector<TokenSentence> toy_sentences(std::size_t n, std::uint64_t seed) {
  std::vector<TokenSentence> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng rng(seed, i);
    out.push_back(toy_sentence(rng));
  }
  return out;
}

int sentiment_label(const TokenSentence& s) {
  const auto& lex = lexicon();
  int score = 0;
  for (const auto& t : s.tokens) {
    const auto lt = lower(t);
    if (std::find(lex.positive.begin(), lex.positive.end(), lt) != lex.positive.end()) ++score;
    if (std::find(lex.negative.begin(), lex.negative.end(), lt) != lex.negative.end()) --score;
  }
  return score > 0 ? 1 : (score < 0 ? -1 : 0);
}

}  // namespace hyperlora::transform
