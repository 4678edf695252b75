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

#include "hyperlora/grad.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace hyperlora;

namespace {

struct Fixture {
  std::vector<transform::TokenSentence> sae, dialect;
  encoder::EncoderStack stack;
  grad::LossContext ctx;
  const typology::DialectFeatureVector* features = nullptr;

  explicit Fixture(const char* dialect_id, bool identical = false) {
    features = &test::ewave().at(dialect_id);
    const auto& d = identical ? features->with_rates("none", std::vector<double>(features->size(), 0.0)) : *features;
    const auto corpus = transform::build_parallel_corpus(transform::toy_sentences(24, 3), d, 5);
    std::vector<transform::TokenSentence> all;
    for (const auto& p : corpus.pairs) {
      sae.push_back(p.sae);
      dialect.push_back(p.dialect);
      all.push_back(p.sae);
      all.push_back(p.dialect);
    }
    stack = encoder::EncoderStack::create({}, encoder::Vocabulary::build(all, 256));
    ctx.stack = &stack;
    ctx.hypernet = hypernet::HypernetConfig::for_encoder(stack.config, static_cast<int>(features->size()));
  }

  std::span<const transform::TokenSentence> batch(std::size_t n) const { return {dialect.data(), n}; }
  ot::PointCloud reference(std::size_t n) const {
    return ot::PointCloud(encoder::batch_encode(stack, nullptr, std::span(sae.data(), n)));
  }
};

}  // namespace

TEST_CASE("gradients agree with central differences") {
  Fixture f("MalaE");
  f.ctx.hypernet.init = hypernet::InitScheme::SmallUniform;
  f.ctx.hypernet.seed = 2;
  const auto hw = hypernet::HypernetWeights::init(f.ctx.hypernet);
  const auto report = grad::finite_diff_check(hw, *f.features, f.batch(3), f.reference(3), f.ctx, 30, 1);
  REQUIRE(report.probes.size() == 30);
  CHECK(report.max_rel_error <= 1e-4);
}

TEST_CASE("loss_and_grad and loss_value agree") {
  Fixture f("JamE");
  f.ctx.hypernet.init = hypernet::InitScheme::SmallUniform;
  const auto hw = hypernet::HypernetWeights::init(f.ctx.hypernet);
  const auto ref = f.reference(4);
  const auto g = grad::loss_and_grad(hw, *f.features, f.batch(4), ref, f.ctx);
  CHECK(g.loss == doctest::Approx(grad::loss_value(hw, *f.features, f.batch(4), ref, f.ctx)).epsilon(1e-13));
  CHECK(g.loss > 0.0);
  for (std::size_t i = 0; i < 8; ++i) CHECK(g.grads.tensors()[i]->rows() == hw.tensors()[i]->rows());
  CHECK(g.grads.all_finite());
}

TEST_CASE("identical clouds give zero loss and zero gradient") {
  Fixture f("MalaE", true);
  const auto hw = hypernet::HypernetWeights::init(f.ctx.hypernet);
  const auto g = grad::loss_and_grad(hw, *f.features, f.batch(4), f.reference(4), f.ctx);
  CHECK(std::abs(g.loss) < 1e-9);
  double largest = 0.0;
  for (const auto* t : g.grads.tensors()) largest = std::max(largest, t->cwiseAbs().maxCoeff());
  CHECK(largest < 1e-8);
}

TEST_CASE("the frozen encoder is untouched by differentiation") {
  Fixture f("AAVE");
  const auto before = f.stack.weights->fingerprint();
  f.ctx.hypernet.init = hypernet::InitScheme::SmallUniform;
  const auto hw = hypernet::HypernetWeights::init(f.ctx.hypernet);
  grad::loss_and_grad(hw, *f.features, f.batch(3), f.reference(3), f.ctx);
  CHECK(f.stack.weights->fingerprint() == before);
}

TEST_CASE("relative error definition") {
  CHECK(grad::relative_error(1.0, 1.0) == 0.0);
  CHECK(grad::relative_error(2.0, 1.0) == doctest::Approx(0.5));
  CHECK(grad::relative_error(0.0, 1e-12) == doctest::Approx(1e-4));
}
