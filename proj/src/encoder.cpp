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

#include "hyperlora/encoder.hpp"

#include "hyperlora/random.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hyperlora::encoder {

namespace {

Matrix xavier(CounterRng& rng, int rows, int cols) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-limit, limit);
  return m;
}

Matrix gaussian(CounterRng& rng, int rows, int cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

RowVector gaussian_row(CounterRng& rng, int cols, double scale) {
  RowVector v(cols);
  for (Eigen::Index i = 0; i < cols; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

void EncoderConfig::validate() const {
  if (vocab_size < 2 || d_model < 1 || n_blocks < 1 || n_heads < 1 || ff_dim < 1 || max_len < 1) {
    throw ConfigError("encoder sizes must be positive (vocab_size >= 2)");
  }
  if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
  if (lora_rank < 1 || lora_rank > d_model) throw ConfigError("lora_rank must lie in [1, d_model]");
  if (!(ln_eps > 0.0)) throw ConfigError("ln_eps must be positive");
}

void EncoderConfig::write_meta(std::map<std::string, std::string>& meta) const {
  meta["encoder.vocab_size"] = std::to_string(vocab_size);
  meta["encoder.d_model"] = std::to_string(d_model);
  meta["encoder.n_blocks"] = std::to_string(n_blocks);
  meta["encoder.n_heads"] = std::to_string(n_heads);
  meta["encoder.ff_dim"] = std::to_string(ff_dim);
  meta["encoder.max_len"] = std::to_string(max_len);
  meta["encoder.lora_rank"] = std::to_string(lora_rank);
  meta["encoder.seed"] = std::to_string(seed);
}

EncoderConfig EncoderConfig::read_meta(const std::map<std::string, std::string>& meta) {
  EncoderConfig cfg;
  cfg.vocab_size = static_cast<int>(io::meta_int(meta, "encoder.vocab_size"));
  cfg.d_model = static_cast<int>(io::meta_int(meta, "encoder.d_model"));
  cfg.n_blocks = static_cast<int>(io::meta_int(meta, "encoder.n_blocks"));
  cfg.n_heads = static_cast<int>(io::meta_int(meta, "encoder.n_heads"));
  cfg.ff_dim = static_cast<int>(io::meta_int(meta, "encoder.ff_dim"));
  cfg.max_len = static_cast<int>(io::meta_int(meta, "encoder.max_len"));
  cfg.lora_rank = static_cast<int>(io::meta_int(meta, "encoder.lora_rank"));
  cfg.seed = io::meta_u64(meta, "encoder.seed");
  cfg.validate();
  return cfg;
}

// --- Vocabulary ---------------------------------------------------------------

Vocabulary::Vocabulary() : tokens_{"<unk>"} { index_.emplace("<unk>", kUnk); }

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens) {
    if (t.empty() || t.find_first_of(" \t\n\r") != std::string::npos) {
      throw ValidationError("vocabulary tokens must be non-empty and whitespace-free");
    }
    if (v.index_.contains(t)) throw SchemaError("duplicate vocabulary token '" + t + "'");
    v.index_.emplace(t, static_cast<Eigen::Index>(v.tokens_.size()));
    v.tokens_.push_back(std::move(t));
  }
  return v;
}

Vocabulary Vocabulary::build(std::span<const transform::TokenSentence> sentences, std::size_t max_size) {
  if (max_size < 1) throw ArgumentError("vocabulary needs room for the unknown token");
  std::map<std::string, std::size_t> counts;
  for (const auto& s : sentences) {
    for (const auto& t : s.tokens) ++counts[t];
  }
  counts.erase("<unk>");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > max_size - 1) ranked.resize(max_size - 1);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [t, c] : ranked) tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

Eigen::Index Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<Eigen::Index> Vocabulary::ids(const transform::TokenSentence& s) const {
  std::vector<Eigen::Index> out;
  out.reserve(s.tokens.size());
  for (const auto& t : s.tokens) out.push_back(id(t));
  return out;
}

std::string Vocabulary::serialize() const {
  std::string out;
  for (std::size_t i = 1; i < tokens_.size(); ++i) {
    if (i > 1) out += ' ';
    out += tokens_[i];
  }
  return out;
}

Vocabulary Vocabulary::deserialize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream in(text);
  std::string t;
  while (in >> t) tokens.push_back(t);
  return from_tokens(std::move(tokens));
}

// --- Weights ------------------------------------------------------------------

FrozenWeights FrozenWeights::init(const EncoderConfig& cfg) {
  cfg.validate();
  FrozenWeights w;
  std::uint64_t stream = 0;
  auto next = [&] { return CounterRng(cfg.seed, stream++); };
  const int d = cfg.d_model;
  {
    auto rng = next();
    w.tok_emb_ = gaussian(rng, cfg.vocab_size, d, 1.0);
  }
  {
    auto rng = next();
    w.pos_emb_ = gaussian(rng, cfg.max_len, d, 0.5);
  }
  w.emb_ln_gamma_ = RowVector::Ones(d);
  w.emb_ln_beta_ = RowVector::Zero(d);
  for (int k = 0; k < cfg.n_blocks; ++k) {
    BlockWeights b;
    auto r1 = next();
    b.wq = xavier(r1, d, d);
    b.wk = xavier(r1, d, d);
    b.wv = xavier(r1, d, d);
    b.wo = xavier(r1, d, d);
    b.w1 = xavier(r1, d, cfg.ff_dim);
    b.w2 = xavier(r1, cfg.ff_dim, d);
    auto r2 = next();
    b.bq = gaussian_row(r2, d, 0.02);
    b.bk = gaussian_row(r2, d, 0.02);
    b.bv = gaussian_row(r2, d, 0.02);
    b.bo = gaussian_row(r2, d, 0.02);
    b.b1 = gaussian_row(r2, cfg.ff_dim, 0.02);
    b.b2 = gaussian_row(r2, d, 0.02);
    b.ln1_gamma = RowVector::Ones(d);
    b.ln1_beta = RowVector::Zero(d);
    b.ln2_gamma = RowVector::Ones(d);
    b.ln2_beta = RowVector::Zero(d);
    w.blocks_.push_back(std::move(b));
  }
  return w;
}

void FrozenWeights::write_checkpoint(io::Checkpoint& ckpt) const {
  ckpt.add("encoder/tok_emb", tok_emb_);
  ckpt.add("encoder/pos_emb", pos_emb_);
  ckpt.add("encoder/emb_ln_gamma", emb_ln_gamma_);
  ckpt.add("encoder/emb_ln_beta", emb_ln_beta_);
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto p = "encoder/block" + std::to_string(k) + "/";
    const auto& b = blocks_[k];
    ckpt.add(p + "wq", b.wq);
    ckpt.add(p + "wk", b.wk);
    ckpt.add(p + "wv", b.wv);
    ckpt.add(p + "wo", b.wo);
    ckpt.add(p + "bq", b.bq);
    ckpt.add(p + "bk", b.bk);
    ckpt.add(p + "bv", b.bv);
    ckpt.add(p + "bo", b.bo);
    ckpt.add(p + "ln1_gamma", b.ln1_gamma);
    ckpt.add(p + "ln1_beta", b.ln1_beta);
    ckpt.add(p + "w1", b.w1);
    ckpt.add(p + "b1", b.b1);
    ckpt.add(p + "w2", b.w2);
    ckpt.add(p + "b2", b.b2);
    ckpt.add(p + "ln2_gamma", b.ln2_gamma);
    ckpt.add(p + "ln2_beta", b.ln2_beta);
  }
}

FrozenWeights FrozenWeights::from_checkpoint(const io::Checkpoint& ckpt, const EncoderConfig& cfg) {
  cfg.validate();
  FrozenWeights w;
  auto mat = [&](const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    Matrix m = ckpt.matrix(name);
    if (m.rows() != rows || m.cols() != cols) {
      throw ConfigError("tensor '" + name + "' has shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
    return m;
  };
  auto row = [&](const std::string& name, Eigen::Index cols) {
    RowVector v = ckpt.row_vector(name);
    if (v.size() != cols) throw ConfigError("tensor '" + name + "' has the wrong length");
    return v;
  };
  const int d = cfg.d_model;
  w.tok_emb_ = mat("encoder/tok_emb", cfg.vocab_size, d);
  w.pos_emb_ = mat("encoder/pos_emb", cfg.max_len, d);
  w.emb_ln_gamma_ = row("encoder/emb_ln_gamma", d);
  w.emb_ln_beta_ = row("encoder/emb_ln_beta", d);
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const auto p = "encoder/block" + std::to_string(k) + "/";
    BlockWeights b;
    b.wq = mat(p + "wq", d, d);
    b.wk = mat(p + "wk", d, d);
    b.wv = mat(p + "wv", d, d);
    b.wo = mat(p + "wo", d, d);
    b.bq = row(p + "bq", d);
    b.bk = row(p + "bk", d);
    b.bv = row(p + "bv", d);
    b.bo = row(p + "bo", d);
    b.ln1_gamma = row(p + "ln1_gamma", d);
    b.ln1_beta = row(p + "ln1_beta", d);
    b.w1 = mat(p + "w1", d, cfg.ff_dim);
    b.b1 = row(p + "b1", cfg.ff_dim);
    b.w2 = mat(p + "w2", cfg.ff_dim, d);
    b.b2 = row(p + "b2", d);
    b.ln2_gamma = row(p + "ln2_gamma", d);
    b.ln2_beta = row(p + "ln2_beta", d);
    w.blocks_.push_back(std::move(b));
  }
  return w;
}

std::uint64_t FrozenWeights::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const auto& m) {
    h = fnv1a_bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()), h);
  };
  mix(tok_emb_);
  mix(pos_emb_);
  mix(emb_ln_gamma_);
  mix(emb_ln_beta_);
  for (const auto& b : blocks_) {
    for (const Matrix* m : {&b.wq, &b.wk, &b.wv, &b.wo, &b.w1, &b.w2}) mix(*m);
    for (const RowVector* v : {&b.bq, &b.bk, &b.bv, &b.bo, &b.b1, &b.b2, &b.ln1_gamma, &b.ln1_beta,
                               &b.ln2_gamma, &b.ln2_beta}) {
      mix(*v);
    }
  }
  return h;
}

LoRAParamSet LoRAParamSet::zeros(const EncoderConfig& cfg) {
  cfg.validate();
  LoRAParamSet out;
  const int d = cfg.d_model;
  const int r = cfg.lora_rank;
  for (int k = 0; k < cfg.n_blocks; ++k) {
    out.blocks.push_back({Matrix::Zero(d, r), Matrix::Zero(r, d), Matrix::Zero(d, r), Matrix::Zero(r, d)});
  }
  return out;
}

void LoRAParamSet::validate(const EncoderConfig& cfg) const {
  if (blocks.size() != static_cast<std::size_t>(cfg.n_blocks)) {
    throw ConfigError("LoRA parameter set has " + std::to_string(blocks.size()) + " blocks, encoder has " +
                      std::to_string(cfg.n_blocks));
  }
  const int d = cfg.d_model;
  const int r = cfg.lora_rank;
  for (const auto& b : blocks) {
    auto check = [](const Matrix& m, int rows, int cols, const char* name) {
      if (m.rows() != rows || m.cols() != cols) {
        throw ConfigError(std::string("LoRA factor ") + name + " has the wrong shape");
      }
      if (!m.allFinite()) throw NumericError(std::string("LoRA factor ") + name + " is not finite");
    };
    check(b.down_q, d, r, "D_q");
    check(b.up_q, r, d, "U_q");
    check(b.down_v, d, r, "D_v");
    check(b.up_v, r, d, "U_v");
  }
}

EncoderStack EncoderStack::create(const EncoderConfig& cfg, Vocabulary vocab) {
  cfg.validate();
  if (vocab.size() > static_cast<std::size_t>(cfg.vocab_size)) {
    throw ConfigError("vocabulary has " + std::to_string(vocab.size()) + " entries, encoder holds " +
                      std::to_string(cfg.vocab_size));
  }
  return EncoderStack{cfg, std::make_shared<const FrozenWeights>(FrozenWeights::init(cfg)), std::move(vocab)};
}

io::Checkpoint encoder_checkpoint(const EncoderStack& stack) {
  io::Checkpoint ckpt;
  stack.config.write_meta(ckpt.meta);
  ckpt.meta["encoder.vocab"] = stack.vocab.serialize();
  stack.weights->write_checkpoint(ckpt);
  return ckpt;
}

EncoderStack encoder_from_checkpoint(const io::Checkpoint& ckpt) {
  const auto cfg = EncoderConfig::read_meta(ckpt.meta);
  auto vocab = Vocabulary::deserialize(ckpt.meta_at("encoder.vocab"));
  if (vocab.size() > static_cast<std::size_t>(cfg.vocab_size)) {
    throw ConfigError("stored vocabulary exceeds vocab_size");
  }
  return EncoderStack{cfg, std::make_shared<const FrozenWeights>(FrozenWeights::from_checkpoint(ckpt, cfg)),
                      std::move(vocab)};
}

void save_encoder(const std::filesystem::path& path, const EncoderStack& stack) {
  io::save_checkpoint(path, encoder_checkpoint(stack));
}

EncoderStack load_encoder(const std::filesystem::path& path) {
  return encoder_from_checkpoint(io::load_checkpoint(path));
}

// --- Forward pass -------------------------------------------------------------

FrozenVars register_frozen(ad::Tape& tape, const FrozenWeights& w) {
  FrozenVars v;
  v.tok_emb = tape.constant(w.token_embedding());
  v.pos_emb = tape.constant(w.position_embedding());
  v.emb_gamma = tape.constant(w.embedding_ln_gamma());
  v.emb_beta = tape.constant(w.embedding_ln_beta());
  for (const auto& b : w.blocks()) {
    FrozenVars::Block k;
    k.wq = tape.constant(b.wq);
    k.wk = tape.constant(b.wk);
    k.wv = tape.constant(b.wv);
    k.wo = tape.constant(b.wo);
    k.bq = tape.constant(b.bq);
    k.bk = tape.constant(b.bk);
    k.bv = tape.constant(b.bv);
    k.bo = tape.constant(b.bo);
    k.ln1_g = tape.constant(b.ln1_gamma);
    k.ln1_b = tape.constant(b.ln1_beta);
    k.w1 = tape.constant(b.w1);
    k.b1 = tape.constant(b.b1);
    k.w2 = tape.constant(b.w2);
    k.b2 = tape.constant(b.b2);
    k.ln2_g = tape.constant(b.ln2_gamma);
    k.ln2_b = tape.constant(b.ln2_beta);
    v.blocks.push_back(k);
  }
  return v;
}

ad::Var encode_on_tape(ad::Tape& tape, const EncoderStack& stack, const FrozenVars& frozen,
                       const LoraVars* lora, const transform::TokenSentence& s) {
  const auto& cfg = stack.config;
  s.validate();
  const auto len = static_cast<Eigen::Index>(s.size());
  if (len > cfg.max_len) {
    throw ArgumentError("sentence of length " + std::to_string(len) + " exceeds max_len " +
                        std::to_string(cfg.max_len));
  }
  if (lora && lora->size() != static_cast<std::size_t>(cfg.n_blocks)) {
    throw ConfigError("LoRA variables do not match the number of blocks");
  }
  auto ids = stack.vocab.ids(s);
  for (auto& id : ids) {
    if (id >= cfg.vocab_size) id = Vocabulary::kUnk;
  }
  std::vector<Eigen::Index> positions(static_cast<std::size_t>(len));
  for (Eigen::Index i = 0; i < len; ++i) positions[static_cast<std::size_t>(i)] = i;

  auto x = tape.add(tape.gather_rows(frozen.tok_emb, std::move(ids)),
                    tape.gather_rows(frozen.pos_emb, std::move(positions)));
  x = tape.layer_norm_rows(x, frozen.emb_gamma, frozen.emb_beta, cfg.ln_eps);

  const int dh = cfg.head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const auto& b = frozen.blocks[static_cast<std::size_t>(k)];
    auto q = tape.add_row(tape.matmul(x, b.wq), b.bq);
    auto kk = tape.add_row(tape.matmul(x, b.wk), b.bk);
    auto v = tape.add_row(tape.matmul(x, b.wv), b.bv);
    if (lora) {
      const auto& f = (*lora)[static_cast<std::size_t>(k)];
      q = tape.add(q, tape.matmul(tape.matmul(x, f[0]), f[1]));
      v = tape.add(v, tape.matmul(tape.matmul(x, f[2]), f[3]));
    }
    std::vector<ad::Var> heads;
    for (int h = 0; h < cfg.n_heads; ++h) {
      auto qh = tape.slice_cols(q, h * dh, dh);
      auto kh = tape.slice_cols(kk, h * dh, dh);
      auto vh = tape.slice_cols(v, h * dh, dh);
      auto scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_sqrt);
      heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
    }
    auto attn = heads.size() == 1 ? heads.front() : tape.concat_cols(heads);
    attn = tape.add_row(tape.matmul(attn, b.wo), b.bo);
    x = tape.layer_norm_rows(tape.add(x, attn), b.ln1_g, b.ln1_b, cfg.ln_eps);
    auto ff = tape.gelu(tape.add_row(tape.matmul(x, b.w1), b.b1));
    ff = tape.add_row(tape.matmul(ff, b.w2), b.b2);
    x = tape.layer_norm_rows(tape.add(x, ff), b.ln2_g, b.ln2_b, cfg.ln_eps);
  }
  return x;
}

Matrix encode(const EncoderStack& stack, const LoRAParamSet* lora, const transform::TokenSentence& s) {
  return batch_encode(stack, lora, std::span<const transform::TokenSentence>(&s, 1));
}

Matrix batch_encode(const EncoderStack& stack, const LoRAParamSet* lora,
                    std::span<const transform::TokenSentence> batch) {
  if (batch.empty()) throw ArgumentError("batch_encode needs at least one sentence");
  if (lora) lora->validate(stack.config);
  ad::Tape tape;
  const auto frozen = register_frozen(tape, *stack.weights);
  LoraVars vars;
  if (lora) {
    for (const auto& b : lora->blocks) {
      vars.push_back({tape.constant(b.down_q), tape.constant(b.up_q), tape.constant(b.down_v),
                      tape.constant(b.up_v)});
    }
  }
  std::vector<Matrix> parts;
  Eigen::Index rows = 0;
  for (const auto& s : batch) {
    parts.push_back(tape.value(encode_on_tape(tape, stack, frozen, lora ? &vars : nullptr, s)));
    rows += parts.back().rows();
  }
  Matrix out(rows, stack.config.d_model);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p;
    at += p.rows();
  }
  return out;
}

}  // namespace hyperlora::encoder
