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

#include "hyperlora/hypernet.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace hyperlora;
using namespace hyperlora::hypernet;

namespace {

HypernetConfig small_config(InitScheme init, std::uint64_t seed = 1) {
  auto cfg = HypernetConfig::for_encoder(encoder::EncoderConfig{}, 236);
  cfg.init = init;
  cfg.seed = seed;
  return cfg;
}

RowVector mlp(const Mlp& m, const RowVector& x) {
  RowVector h = x * m.w_in + m.b_in;
  for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = h(i) > 0.0 ? h(i) : 0.0;
  return h * m.w_out + m.b_out;
}

}  // namespace

TEST_CASE("positional inputs append a one-hot of block and role") {
  const auto cfg = small_config(InitScheme::SmallUniform);
  const auto& d = test::ewave().at("MalaE");
  const RowVector x = positional_input(d, 1, Role::Value, cfg);
  REQUIRE(x.size() == cfg.input_dim());
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(x(static_cast<Eigen::Index>(i)) == d.rates()[i]);
  for (int j = 0; j < 2 * cfg.n_blocks; ++j) CHECK(x(static_cast<Eigen::Index>(d.size()) + j) == (j == 3 ? 1.0 : 0.0));
  const Matrix all = hypernet_inputs(d, cfg);
  CHECK(all.row(3) == x);
}

TEST_CASE("generated factors match the two MLPs applied per position") {
  const auto cfg = small_config(InitScheme::SmallUniform);
  const auto hw = HypernetWeights::init(cfg);
  const auto& d = test::ewave().at("JamE");
  const auto lora = generate_lora(hw, d, cfg);
  REQUIRE(lora.blocks.size() == static_cast<std::size_t>(cfg.n_blocks));
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const auto& b = lora.blocks[static_cast<std::size_t>(k)];
    const RowVector dq = mlp(hw.down, positional_input(d, k, Role::Query, cfg));
    const RowVector uq = mlp(hw.up, positional_input(d, k, Role::Query, cfg));
    const RowVector dv = mlp(hw.down, positional_input(d, k, Role::Value, cfg));
    for (int i = 0; i < cfg.d_model; ++i) {
      for (int j = 0; j < cfg.rank; ++j) {
        CHECK(b.down_q(i, j) == doctest::Approx(dq(i * cfg.rank + j)).epsilon(1e-12));
        CHECK(b.down_v(i, j) == doctest::Approx(dv(i * cfg.rank + j)).epsilon(1e-12));
        CHECK(b.up_q(j, i) == doctest::Approx(uq(j * cfg.d_model + i)).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("zero-output init generates exactly zero up-projections") {
  const auto cfg = small_config(InitScheme::ZeroOutput);
  const auto hw = HypernetWeights::init(cfg);
  for (const auto& [id, d] : test::ewave()) {
    for (const auto& b : generate_lora(hw, d, cfg).blocks) {
      CHECK(b.up_q.isZero(0.0));
      CHECK(b.up_v.isZero(0.0));
      CHECK_FALSE(b.down_q.isZero(0.0));
    }
  }
}

TEST_CASE("tape generation agrees with direct generation") {
  const auto cfg = small_config(InitScheme::SmallUniform, 4);
  const auto hw = HypernetWeights::init(cfg);
  const auto& d = test::ewave().at("AAVE");
  ad::Tape tape;
  const auto vars = register_params(tape, hw);
  const auto on_tape = generate_on_tape(tape, vars, d, cfg);
  const auto direct = generate_lora(hw, d, cfg);
  for (int k = 0; k < cfg.n_blocks; ++k) {
    const auto& b = direct.blocks[static_cast<std::size_t>(k)];
    const auto& v = on_tape[static_cast<std::size_t>(k)];
    CHECK((tape.value(v[0]) - b.down_q).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((tape.value(v[1]) - b.up_q).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((tape.value(v[2]) - b.down_v).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((tape.value(v[3]) - b.up_v).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("parameter count, seeding and checkpoints") {
  const auto cfg = small_config(InitScheme::SmallUniform, 5);
  const auto hw = HypernetWeights::init(cfg);
  std::size_t count = 0;
  for (const auto* t : hw.tensors()) count += static_cast<std::size_t>(t->size());
  CHECK(param_count(cfg) == count);
  CHECK(hw.param_count() == count);
  const std::size_t in = cfg.input_dim(), hid = cfg.hidden_dim, out = cfg.output_dim();
  CHECK(count == 2 * (in * hid + hid + hid * out + out));

  const auto again = HypernetWeights::init(cfg);
  CHECK(again.down.w_in == hw.down.w_in);
  auto other_cfg = cfg;
  other_cfg.seed = 6;
  CHECK(HypernetWeights::init(other_cfg).down.w_in != hw.down.w_in);

  io::Checkpoint ckpt;
  write_checkpoint(ckpt, hw, cfg);
  const auto back_cfg = HypernetConfig::read_meta(ckpt.meta);
  CHECK(back_cfg.feature_dim == cfg.feature_dim);
  CHECK(back_cfg.init == cfg.init);
  const auto back = read_checkpoint(ckpt, back_cfg);
  for (std::size_t i = 0; i < 8; ++i) CHECK(*back.tensors()[i] == *hw.tensors()[i]);

  auto wrong = cfg;
  wrong.hidden_dim = 7;
  CHECK_THROWS_AS(read_checkpoint(ckpt, wrong), Error);
}

TEST_CASE("feature dimension must match the vectors") {
  auto cfg = small_config(InitScheme::ZeroOutput);
  cfg.feature_dim = 10;
  const auto hw = HypernetWeights::init(cfg);
  CHECK_THROWS_AS(generate_lora(hw, test::ewave().at("MalaE"), cfg), ConfigError);
  CHECK(parse_init_scheme(init_scheme_name(InitScheme::SmallUniform)) == InitScheme::SmallUniform);
  CHECK_THROWS_AS(parse_init_scheme("bogus"), Error);
}
