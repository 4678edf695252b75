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

#pragma once

#include "hyperlora/common.hpp"
#include "hyperlora/typology.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hyperlora::transform {

/// A tokenized sentence with optional coarse part-of-speech tags (UD style:
/// DET, NOUN, PROPN, PRON, VERB, AUX, ADJ, ADV, ADP, PART, PUNCT, ...).
struct TokenSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;  // empty, or same length as tokens

  TokenSentence() = default;
  TokenSentence(std::vector<std::string> toks, std::vector<std::string> tgs = {});

  std::size_t size() const { return tokens.size(); }
  bool tagged() const { return !tags.empty(); }
  const std::string& tag(std::size_t i) const;
  void validate() const;

  bool operator==(const TokenSentence&) const = default;
};

/// Parses "tok|TAG tok|TAG ..." (tags optional, but all-or-none per line).
TokenSentence parse_sentence(std::string_view line, std::size_t line_no = 0);
std::string join_tokens(const TokenSentence& s);
std::string join_tagged(const TokenSentence& s);

/// One morphosyntactic rewrite keyed by an eWAVE feature id.
class RewriteRule {
 public:
  virtual ~RewriteRule() = default;
  virtual std::string_view id() const = 0;
  virtual std::string_view description() const = 0;
  virtual bool applicable(const TokenSentence& s) const = 0;
  /// Rewrites every match. Identity when not applicable; never empties a
  /// sentence; apply(apply(s)) == apply(s).
  virtual TokenSentence apply(const TokenSentence& s) const = 0;
};

/// The fixed catalog, in application order.
std::span<const std::unique_ptr<RewriteRule>> rule_catalog();
const RewriteRule* find_rule(std::string_view id);

/// Random draws for one sentence, keyed by (seed, sentence index, rule index)
/// so that output does not depend on processing order.
class RuleStream {
 public:
  RuleStream(std::uint64_t seed, std::uint64_t sentence_index)
      : seed_(seed), sentence_(sentence_index) {}
  double draw(std::size_t rule_index) const;

 private:
  std::uint64_t seed_;
  std::uint64_t sentence_;
};

struct TransformOutcome {
  TokenSentence sentence;
  std::vector<std::string> applied;  // rule ids in catalog order
};

/// Applies each applicable catalog rule, in catalog order, with probability
/// equal to the dialect's rate for that feature (absent features: rate 0).
TransformOutcome transform_sentence(const TokenSentence& s,
                                    const typology::DialectFeatureVector& dialect,
                                    const RuleStream& stream);

struct ParallelPair {
  TokenSentence sae;
  TokenSentence dialect;
  std::vector<std::string> applied_rules;
};

struct ParallelCorpus {
  std::string dialect_id;
  std::uint64_t seed = 0;
  std::vector<ParallelPair> pairs;

  /// Fingerprint of the SAE side (tokens only).
  std::uint64_t sae_hash() const;
  /// Fingerprint of both sides and applied rules.
  std::uint64_t content_hash() const;
};

ParallelCorpus build_parallel_corpus(std::span<const TokenSentence> sentences,
                                     const typology::DialectFeatureVector& dialect,
                                     std::uint64_t seed);

struct CorpusStats {
  double pct_transformed = 0.0;
  std::size_t applied_feature_count = 0;
};

CorpusStats corpus_stats(const ParallelCorpus& corpus);

/// One sentence per line, space-separated tokens with optional |tag suffix.
std::vector<TokenSentence> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, std::span<const TokenSentence> sentences);

/// sae_tokens<TAB>dialect_tokens<TAB>rule_ids(comma-separated), one pair per line.
void save_parallel_corpus(const std::filesystem::path& path, const ParallelCorpus& corpus);
ParallelCorpus load_parallel_corpus(const std::filesystem::path& path, std::string dialect_id);

/// Deterministic synthetic tagged English sentences drawn from a small
/// template grammar; every catalog rule has templates it applies to.
std::vector<TokenSentence> toy_sentences(std::size_t n, std::uint64_t seed);

/// Sentiment label used by the evaluation probe: +1 / -1 from the toy
/// lexicon's positive and negative words, 0 when neither dominates.
int sentiment_label(const TokenSentence& s);

}  // namespace hyperlora::transform
