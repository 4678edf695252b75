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
#include "hyperlora/io.hpp"
#include "hyperlora/tape.hpp"
#include "hyperlora/transform.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hyperlora::encoder {

struct EncoderConfig {
  int vocab_size = 256;
  int d_model = 32;
  int n_blocks = 2;
  int n_heads = 2;
  int ff_dim = 64;
  int max_len = 24;
  int lora_rank = 4;
  std::uint64_t seed = 0;
  double ln_eps = 1e-5;

  void validate() const;
  int head_dim() const { return d_model / n_heads; }
  void write_meta(std::map<std::string, std::string>& meta) const;
  static EncoderConfig read_meta(const std::map<std::string, std::string>& meta);
  bool operator==(const EncoderConfig&) const = default;
};

/// Token to id map. Id 0 is the reserved unknown token.
class Vocabulary {
 public:
  static constexpr Eigen::Index kUnk = 0;

  Vocabulary();
  /// Keeps the max_size - 1 most frequent tokens (ties by token text).
  static Vocabulary build(std::span<const transform::TokenSentence> sentences, std::size_t max_size);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  Eigen::Index id(std::string_view token) const;
  std::vector<Eigen::Index> ids(const transform::TokenSentence& s) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::string serialize() const;
  static Vocabulary deserialize(const std::string& text);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, Eigen::Index, std::less<>> index_;
};

struct BlockWeights {
  Matrix wq, wk, wv, wo;
  RowVector bq, bk, bv, bo;
  RowVector ln1_gamma, ln1_beta;
  Matrix w1, w2;
  RowVector b1, b2;
  RowVector ln2_gamma, ln2_beta;
};

/// Base encoder parameters. Immutable once built.
class FrozenWeights {
 public:
  static FrozenWeights init(const EncoderConfig& cfg);
  static FrozenWeights from_checkpoint(const io::Checkpoint& ckpt, const EncoderConfig& cfg);
  void write_checkpoint(io::Checkpoint& ckpt) const;

  const Matrix& token_embedding() const { return tok_emb_; }
  const Matrix& position_embedding() const { return pos_emb_; }
  const RowVector& embedding_ln_gamma() const { return emb_ln_gamma_; }
  const RowVector& embedding_ln_beta() const { return emb_ln_beta_; }
  const std::vector<BlockWeights>& blocks() const { return blocks_; }

  /// FNV-1a over every stored double.
  std::uint64_t fingerprint() const;

 private:
  FrozenWeights() = default;
  Matrix tok_emb_, pos_emb_;
  RowVector emb_ln_gamma_, emb_ln_beta_;
  std::vector<BlockWeights> blocks_;
};

/// Low-rank factors for one block: delta_q(x) = (x D_q) U_q, likewise for v.
struct LoraBlock {
  Matrix down_q;  // d_model x r
  Matrix up_q;    // r x d_model
  Matrix down_v;
  Matrix up_v;
};

struct LoRAParamSet {
  std::vector<LoraBlock> blocks;

  static LoRAParamSet zeros(const EncoderConfig& cfg);
  /// Throws ConfigError on any shape mismatch and NumericError on non-finite entries.
  void validate(const EncoderConfig& cfg) const;
};

struct EncoderStack {
  EncoderConfig config;
  std::shared_ptr<const FrozenWeights> weights;
  Vocabulary vocab;

  static EncoderStack create(const EncoderConfig& cfg, Vocabulary vocab);
};

io::Checkpoint encoder_checkpoint(const EncoderStack& stack);
EncoderStack encoder_from_checkpoint(const io::Checkpoint& ckpt);
void save_encoder(const std::filesystem::path& path, const EncoderStack& stack);
EncoderStack load_encoder(const std::filesystem::path& path);

/// Last-layer token representations, len x d_model.
Matrix encode(const EncoderStack& stack, const LoRAParamSet* lora, const transform::TokenSentence& s);

/// Row-concatenation of encode() over the batch, in batch order.
Matrix batch_encode(const EncoderStack& stack, const LoRAParamSet* lora,
                    std::span<const transform::TokenSentence> batch);

// Tape interface used for differentiation.

/// Frozen weights registered once per tape as constants.
struct FrozenVars {
  ad::Var tok_emb, pos_emb, emb_gamma, emb_beta;
  struct Block {
    ad::Var wq, wk, wv, wo, bq, bk, bv, bo, ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };
  std::vector<Block> blocks;
};

FrozenVars register_frozen(ad::Tape& tape, const FrozenWeights& w);

/// Per block: {down_q, up_q, down_v, up_v}.
using LoraVars = std::vector<std::array<ad::Var, 4>>;

ad::Var encode_on_tape(ad::Tape& tape, const EncoderStack& stack, const FrozenVars& frozen,
                       const LoraVars* lora, const transform::TokenSentence& s);

}  // namespace hyperlora::encoder
