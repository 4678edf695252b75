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

#include "support.hpp"

#include <doctest.h>

#include <set>

using namespace hyperlora;
using namespace hyperlora::transform;

namespace {

typology::DialectFeatureVector uniform_rate(double rate) {
  const auto& like = test::ewave().at("CollSgE");
  return like.with_rates("uniform", std::vector<double>(like.size(), rate));
}

}  // namespace

TEST_CASE("sentence parsing and joining") {
  const auto s = parse_sentence("the|DET dog|NOUN barks|VERB");
  CHECK(s.tokens == std::vector<std::string>{"the", "dog", "barks"});
  CHECK(s.tags == std::vector<std::string>{"DET", "NOUN", "VERB"});
  CHECK(join_tagged(s) == "the|DET dog|NOUN barks|VERB");
  CHECK(join_tokens(s) == "the dog barks");
  CHECK_FALSE(parse_sentence("plain words here").tagged());
  CHECK_THROWS_AS(parse_sentence("the|DET dog"), ParseError);
  CHECK_THROWS_AS(parse_sentence("   "), ParseError);
}

TEST_CASE("every catalog rule is idempotent, non-emptying and an identity when not applicable") {
  const auto sentences = toy_sentences(600, 21);
  std::set<std::string> ids;
  for (const auto& rule : rule_catalog()) {
    CAPTURE(rule->id());
    CHECK(ids.insert(std::string(rule->id())).second);
    CHECK(find_rule(rule->id()) == rule.get());
    std::size_t applicable = 0;
    for (const auto& s : sentences) {
      const auto once = rule->apply(s);
      CHECK(once.size() > 0);
      CHECK(rule->apply(once) == once);
      if (rule->applicable(s)) {
        ++applicable;
      } else {
        CHECK(once == s);
      }
    }
    CHECK(applicable > 0);
  }
  CHECK(find_rule("no-such-rule") == nullptr);
}

TEST_CASE("zero rates leave text untouched, full rates apply every applicable rule") {
  const auto sentences = toy_sentences(200, 4);
  const auto none = build_parallel_corpus(sentences, uniform_rate(0.0), 1);
  for (const auto& p : none.pairs) {
    CHECK(p.dialect == p.sae);
    CHECK(p.applied_rules.empty());
  }
  CHECK(corpus_stats(none).pct_transformed == 0.0);

  const auto all = build_parallel_corpus(sentences, uniform_rate(1.0), 1);
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    // Replaying the catalog by hand must give the same text and rule list.
    TokenSentence s = sentences[i];
    std::vector<std::string> applied;
    for (const auto& rule : rule_catalog()) {
      if (rule->applicable(s)) {
        s = rule->apply(s);
        applied.emplace_back(rule->id());
      }
    }
    CHECK(all.pairs[i].dialect == s);
    CHECK(all.pairs[i].applied_rules == applied);
  }
}

TEST_CASE("parallel corpora are deterministic under the seed") {
  const auto sentences = toy_sentences(300, 8);
  const auto& d = test::ewave().at("JamE");
  const auto a = build_parallel_corpus(sentences, d, 77);
  const auto b = build_parallel_corpus(sentences, d, 77);
  const auto c = build_parallel_corpus(sentences, d, 78);
  CHECK(a.content_hash() == b.content_hash());
  CHECK(a.content_hash() != c.content_hash());
  CHECK(a.sae_hash() == c.sae_hash());
  CHECK(a.dialect_id == "JamE");
  CHECK(toy_sentences(50, 3) == toy_sentences(50, 3));
}

TEST_CASE("corpus statistics match a recount") {
  const auto corpus = build_parallel_corpus(toy_sentences(400, 2), test::ewave().at("MalaE"), 5);
  std::size_t changed = 0;
  std::set<std::string> features;
  for (const auto& p : corpus.pairs) {
    bool differs = p.sae.tokens.size() != p.dialect.tokens.size();
    for (std::size_t i = 0; !differs && i < p.sae.tokens.size(); ++i) differs = p.sae.tokens[i] != p.dialect.tokens[i];
    changed += differs ? 1 : 0;
    for (const auto& r : p.applied_rules) features.insert(r);
  }
  const auto stats = corpus_stats(corpus);
  CHECK(stats.pct_transformed == doctest::Approx(100.0 * changed / corpus.pairs.size()));
  CHECK(stats.applied_feature_count == features.size());
  CHECK(changed > 0);
}

TEST_CASE("corpus files round trip") {
  const auto dir = test::scratch_dir("transform-io");
  const auto sentences = toy_sentences(40, 6);
  save_corpus(dir / "plain.txt", sentences);
  CHECK(load_corpus(dir / "plain.txt") == sentences);
  const auto corpus = build_parallel_corpus(sentences, test::ewave().at("AAVE"), 3);
  save_parallel_corpus(dir / "AAVE.tsv", corpus);
  const auto back = load_parallel_corpus(dir / "AAVE.tsv", "AAVE");
  REQUIRE(back.pairs.size() == corpus.pairs.size());
  for (std::size_t i = 0; i < back.pairs.size(); ++i) {
    CHECK(back.pairs[i].sae.tokens == corpus.pairs[i].sae.tokens);
    CHECK(back.pairs[i].dialect.tokens == corpus.pairs[i].dialect.tokens);
    CHECK(back.pairs[i].applied_rules == corpus.pairs[i].applied_rules);
  }
}

TEST_CASE("toy sentiment labels") {
  int pos = 0, neg = 0;
  for (const auto& s : toy_sentences(500, 1)) {
    const int y = sentiment_label(s);
    CHECK((y == -1 || y == 0 || y == 1));
    pos += y == 1;
    neg += y == -1;
  }
  CHECK(pos > 50);
  CHECK(neg > 50);
}
