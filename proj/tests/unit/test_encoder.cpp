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

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

using namespace hyperlora;
using namespace hyperlora::encoder;

namespace {

using Rows = std::vector<std::vector<double>>;

Rows to_rows(const Matrix& m) {
  Rows out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

Rows matmul(const Rows& a, const Matrix& b) {
  Rows out(a.size(), std::vector<double>(static_cast<std::size_t>(b.cols()), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a[i].size(); ++k) s += a[i][k] * b(static_cast<Eigen::Index>(k), j);
      out[i][j] = s;
    }
  }
  return out;
}

void add_bias(Rows& x, const RowVector& b) {
  for (auto& row : x) {
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b(static_cast<Eigen::Index>(j));
  }
}

void add(Rows& x, const Rows& y) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < x[i].size(); ++j) x[i][j] += y[i][j];
  }
}

void layer_norm(Rows& x, const RowVector& g, const RowVector& b, double eps) {
  for (auto& row : x) {
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(row.size());
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = (row[j] - mean) / std::sqrt(var + eps) * g(static_cast<Eigen::Index>(j)) + b(static_cast<Eigen::Index>(j));
    }
  }
}

/// Post-LN encoder written out one loop at a time.
Matrix reference_encode(const EncoderStack& stack, const LoRAParamSet* lora, const transform::TokenSentence& s) {
  const auto& cfg = stack.config;
  const auto& w = *stack.weights;
  const std::size_t n = s.size();
  Rows x(n, std::vector<double>(static_cast<std::size_t>(cfg.d_model)));
  for (std::size_t t = 0; t < n; ++t) {
    const auto id = stack.vocab.id(s.tokens[t]);
    for (int j = 0; j < cfg.d_model; ++j) {
      x[t][j] = w.token_embedding()(id, j) + w.position_embedding()(static_cast<Eigen::Index>(t), j);
    }
  }
  layer_norm(x, w.embedding_ln_gamma(), w.embedding_ln_beta(), cfg.ln_eps);
  const int dh = cfg.head_dim();
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const auto& b = w.blocks()[static_cast<std::size_t>(k)];
    Rows q = matmul(x, b.wq), kk = matmul(x, b.wk), v = matmul(x, b.wv);
    add_bias(q, b.bq);
    add_bias(kk, b.bk);
    add_bias(v, b.bv);
    if (lora) {
      const auto& f = lora->blocks[static_cast<std::size_t>(k)];
      add(q, matmul(matmul(x, f.down_q), f.up_q));
      add(v, matmul(matmul(x, f.down_v), f.up_v));
    }
    Rows heads(n, std::vector<double>(static_cast<std::size_t>(cfg.d_model), 0.0));
    for (int h = 0; h < cfg.n_heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> score(n);
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (int c = 0; c < dh; ++c) dot += q[i][h * dh + c] * kk[j][h * dh + c];
          score[j] = dot / std::sqrt(static_cast<double>(dh));
          mx = std::max(mx, score[j]);
        }
        double z = 0.0;
        for (auto& sc : score) z += (sc = std::exp(sc - mx));
        for (std::size_t j = 0; j < n; ++j) {
          for (int c = 0; c < dh; ++c) heads[i][h * dh + c] += score[j] / z * v[j][h * dh + c];
        }
      }
    }
    Rows attn = matmul(heads, b.wo);
    add_bias(attn, b.bo);
    add(x, attn);
    layer_norm(x, b.ln1_gamma, b.ln1_beta, cfg.ln_eps);
    Rows ff = matmul(x, b.w1);
    add_bias(ff, b.b1);
    for (auto& row : ff) {
      for (auto& u : row) u = 0.5 * u * (1.0 + std::erf(u / std::sqrt(2.0)));
    }
    Rows out = matmul(ff, b.w2);
    add_bias(out, b.b2);
    add(x, out);
    layer_norm(x, b.ln2_gamma, b.ln2_beta, cfg.ln_eps);
  }
  Matrix m(static_cast<Eigen::Index>(n), cfg.d_model);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.d_model; ++j) m(static_cast<Eigen::Index>(i), j) = x[i][j];
  }
  return m;
}

EncoderStack toy_stack(std::uint64_t seed = 3) {
  EncoderConfig cfg;
  cfg.seed = seed;
  return EncoderStack::create(cfg, Vocabulary::build(transform::toy_sentences(200, 1), 256));
}

LoRAParamSet random_lora(const EncoderConfig& cfg, std::uint64_t seed) {
  auto lora = LoRAParamSet::zeros(cfg);
  CounterRng rng(seed);
  for (auto& b : lora.blocks) {
    for (Matrix* m : {&b.down_q, &b.up_q, &b.down_v, &b.up_v}) {
      for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = rng.uniform(-0.3, 0.3);
    }
  }
  return lora;
}

}  // namespace

TEST_CASE("encoder matches a straight-line reference") {
  const auto stack = toy_stack();
  const auto lora = random_lora(stack.config, 8);
  for (const auto& s : transform::toy_sentences(20, 13)) {
    const Matrix ref = reference_encode(stack, nullptr, s);
    CHECK((encode(stack, nullptr, s) - ref).cwiseAbs().maxCoeff() < 1e-12);
    const Matrix ref_lora = reference_encode(stack, &lora, s);
    CHECK((encode(stack, &lora, s) - ref_lora).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((ref_lora - ref).cwiseAbs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("a zero adapter is bit-identical to the frozen base") {
  const auto stack = toy_stack();
  const auto zero = LoRAParamSet::zeros(stack.config);
  const auto sentences = transform::toy_sentences(30, 2);
  const Matrix base = batch_encode(stack, nullptr, sentences);
  const Matrix adapted = batch_encode(stack, &zero, sentences);
  CHECK(std::memcmp(base.data(), adapted.data(), sizeof(double) * static_cast<std::size_t>(base.size())) == 0);
}

TEST_CASE("batch_encode concatenates per-sentence encodings") {
  const auto stack = toy_stack();
  const auto sentences = transform::toy_sentences(5, 9);
  const Matrix all = batch_encode(stack, nullptr, sentences);
  Eigen::Index at = 0;
  for (const auto& s : sentences) {
    const Matrix one = encode(stack, nullptr, s);
    CHECK(all.middleRows(at, one.rows()) == one);
    at += one.rows();
  }
  CHECK(at == all.rows());
  // Each row is LayerNorm output with unit gain: norm sqrt(d_model).
  CHECK(all.row(0).norm() == doctest::Approx(std::sqrt(32.0)).epsilon(1e-3));
}

TEST_CASE("vocabulary") {
  const auto sentences = transform::toy_sentences(100, 1);
  const auto v = Vocabulary::build(sentences, 20);
  CHECK(v.size() == 20);
  CHECK(v.id("definitely-not-a-token") == Vocabulary::kUnk);
  CHECK(v.id(v.tokens()[5]) == 5);
  const auto back = Vocabulary::deserialize(v.serialize());
  CHECK(back.tokens() == v.tokens());
}

TEST_CASE("encoder weights are seeded and persist") {
  const auto a = toy_stack(3), b = toy_stack(3), c = toy_stack(4);
  CHECK(a.weights->fingerprint() == b.weights->fingerprint());
  CHECK(a.weights->fingerprint() != c.weights->fingerprint());
  const auto dir = test::scratch_dir("encoder");
  save_encoder(dir / "enc.ckpt", a);
  const auto back = load_encoder(dir / "enc.ckpt");
  CHECK(back.weights->fingerprint() == a.weights->fingerprint());
  CHECK(back.config == a.config);
  const auto s = transform::toy_sentences(1, 4)[0];
  CHECK(encode(back, nullptr, s) == encode(a, nullptr, s));
}

TEST_CASE("encoder input validation") {
  const auto stack = toy_stack();
  std::vector<std::string> long_tokens(static_cast<std::size_t>(stack.config.max_len) + 1, "the");
  CHECK_THROWS_AS(encode(stack, nullptr, transform::TokenSentence(long_tokens)), ArgumentError);
  LoRAParamSet bad = LoRAParamSet::zeros(stack.config);
  bad.blocks[0].up_q = Matrix::Zero(3, 3);
  CHECK_THROWS_AS(encode(stack, &bad, transform::toy_sentences(1, 1)[0]), ConfigError);
  EncoderConfig cfg;
  cfg.n_heads = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
