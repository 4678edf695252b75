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

#include "hyperlora/io.hpp"
#include "hyperlora/trainer.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>

using namespace hyperlora;
using namespace hyperlora::trainer;

namespace {

const std::vector<std::string> kSources = {"JamE", "MalaE", "MaltE"};

Corpora make_corpora(std::size_t n = 12) {
  Corpora out;
  const auto sentences = transform::toy_sentences(n, 31);
  std::uint64_t seed = 40;
  for (const auto& id : kSources) out.emplace(id, transform::build_parallel_corpus(sentences, test::ewave().at(id), seed++));
  return out;
}

struct Setup {
  Corpora corpora = make_corpora();
  encoder::EncoderStack stack = build_source_encoder(corpora);
  TrainConfig cfg;

  Setup() {
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.learning_rate = 1e-3;
    cfg.seed = 9;
  }

  TrainInputs inputs() const {
    TrainInputs in;
    in.stack = &stack;
    in.corpora = corpora;
    in.features = test::ewave();
    in.hypernet = hypernet::HypernetConfig::for_encoder(stack.config, 0);
    in.hypernet.feature_dim = 0;
    in.exclude = "CollSgE";
    return in;
  }
};

bool same_weights(const hypernet::HypernetWeights& a, const hypernet::HypernetWeights& b) {
  for (std::size_t i = 0; i < 8; ++i) {
    if (*a.tensors()[i] != *b.tensors()[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("SAE clouds hold one row per SAE token, in sentence order") {
  Setup s;
  const auto clouds = precompute_sae(s.corpora, s.stack);
  for (const auto& [id, corpus] : s.corpora) {
    const auto& cloud = clouds.at(id);
    std::size_t tokens = 0;
    for (const auto& p : corpus.pairs) tokens += p.sae.size();
    CHECK(static_cast<std::size_t>(cloud.points.rows()) == tokens);
    REQUIRE(cloud.sentences() == corpus.pairs.size());
    const std::vector<std::size_t> ids = {5, 0, 7};
    std::vector<transform::TokenSentence> picked;
    for (auto i : ids) picked.push_back(corpus.pairs[i].sae);
    CHECK(cloud.rows_of(ids) == encoder::batch_encode(s.stack, nullptr, picked));
  }
  // The sources share SAE sides, so their clouds coincide.
  CHECK(clouds.at("JamE").points == clouds.at("MaltE").points);
}

TEST_CASE("SAE cache hits reload bitwise and stale entries are refused") {
  Setup s;
  const auto dir = test::scratch_dir("trainer-cache");
  const auto first = precompute_sae(s.corpora, s.stack, dir);
  CHECK(std::filesystem::exists(dir / "sae-JamE.ckpt"));
  {
    io::FileAccessRecorder rec;
    const auto second = precompute_sae(s.corpora, s.stack, dir);
    CHECK(rec.paths().size() == s.corpora.size());
    for (const auto& [id, cloud] : first) {
      CHECK(second.at(id).points == cloud.points);
      CHECK(second.at(id).offsets == cloud.offsets);
    }
  }
  encoder::EncoderConfig other;
  other.seed = 1;
  const auto other_stack = encoder::EncoderStack::create(other, s.stack.vocab);
  CHECK_THROWS_AS(precompute_sae(s.corpora, other_stack, dir), StaleCacheError);
  auto changed = s.corpora;
  changed.at("MalaE") = transform::build_parallel_corpus(transform::toy_sentences(12, 32), test::ewave().at("MalaE"), 1);
  CHECK_THROWS_AS(precompute_sae(changed, s.stack, dir), StaleCacheError);
}

TEST_CASE("epochs = 0 evaluates the initial weights") {
  Setup s;
  s.cfg.epochs = 0;
  const auto st = train(s.inputs(), s.cfg);
  CHECK(st.best_epoch == 0);
  CHECK(std::isfinite(st.best_loss));
  CHECK(st.best_loss > 0.0);
  CHECK(st.step == 0);
  CHECK(same_weights(st.best_weights, hypernet::HypernetWeights::init(st.hypernet)));
}

TEST_CASE("training is deterministic, keeps the base frozen and tracks the best epoch") {
  Setup s;
  const auto fingerprint = s.stack.weights->fingerprint();
  const auto a = train(s.inputs(), s.cfg);
  const auto b = train(s.inputs(), s.cfg);
  CHECK(s.stack.weights->fingerprint() == fingerprint);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].loss == b.history[i].loss);
    CHECK(a.history[i].dialect_id == b.history[i].dialect_id);
  }
  CHECK(same_weights(a.hw, b.hw));
  // 3 dialects x 12 sentences in batches of 4, two epochs.
  CHECK(a.step == 18);
  CHECK(a.history.size() == 18);
  REQUIRE(a.epoch_losses.size() == 2);
  CHECK(a.best_loss == *std::min_element(a.epoch_losses.begin(), a.epoch_losses.end()));
  CHECK(a.sources == kSources);
  std::map<std::string, int> per_dialect;
  for (const auto& h : a.history) ++per_dialect[h.dialect_id];
  for (const auto& id : kSources) CHECK(per_dialect[id] == 6);

  auto other = s.cfg;
  other.seed = 10;
  const auto c = train(s.inputs(), other);
  bool differs = false;
  for (std::size_t i = 0; i < c.history.size(); ++i) differs |= c.history[i].loss != a.history[i].loss;
  CHECK(differs);
}

TEST_CASE("identical dialect and SAE text makes training a no-op") {
  Setup s;
  const auto& like = test::ewave().at("JamE");
  auto in = s.inputs();
  in.corpora.clear();
  in.corpora.emplace("Flat", transform::build_parallel_corpus(transform::toy_sentences(12, 31),
                                                              like.with_rates("Flat", std::vector<double>(like.size(), 0.0)), 1));
  in.features.emplace("Flat", like.with_rates("Flat", std::vector<double>(like.size(), 0.0)));
  const auto st = train(in, s.cfg);
  REQUIRE_FALSE(st.history.empty());
  CHECK(std::abs(st.history.front().loss) < 1e-12);
  for (const auto& h : st.history) CHECK(std::abs(h.loss) < 1e-6);
}

TEST_CASE("a divergent run stops with the last finite weights") {
  Setup s;
  s.cfg.learning_rate = 1e308;
  const auto st = train(s.inputs(), s.cfg);
  CHECK(st.diverged);
  CHECK_FALSE(st.divergence.empty());
  CHECK(st.hw.all_finite());
}

TEST_CASE("invalid training inputs") {
  Setup s;
  auto in = s.inputs();
  in.exclude = "MalaE";
  CHECK_THROWS_AS(train(in, s.cfg), ArgumentError);
  in = s.inputs();
  in.features.erase("JamE");
  CHECK_THROWS_AS(train(in, s.cfg), SchemaError);
  auto bad = s.cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(s.inputs(), bad), ConfigError);
}

TEST_CASE("run directories round trip") {
  Setup s;
  const auto dir = test::scratch_dir("trainer-run");
  auto in = s.inputs();
  in.run_dir = dir;
  const auto st = train(in, s.cfg);
  const auto best = load_best(dir);
  CHECK(same_weights(best.best_weights, st.best_weights));
  CHECK(best.best_loss == st.best_loss);
  CHECK(best.best_epoch == st.best_epoch);
  CHECK(best.sources == st.sources);
  CHECK(*best.universe == *st.universe);
  const auto history = read_history(dir / "history.tsv");
  REQUIRE(history.size() == st.history.size());
  for (std::size_t i = 0; i < history.size(); ++i) CHECK(history[i].loss == st.history[i].loss);
  const auto stack = load_run_encoder(dir);
  CHECK(stack.weights->fingerprint() == s.stack.weights->fingerprint());
  const auto meta = read_run_config(dir);
  CHECK(TrainConfig::read_meta(meta).learning_rate == s.cfg.learning_rate);
  CHECK(meta.at("run.exclude") == "CollSgE");
}

TEST_CASE("zero-shot adapters are pure functions of the target features") {
  Setup s;
  const auto st = train(s.inputs(), s.cfg);
  const auto& target = test::ewave().at("CollSgE");
  io::FileAccessRecorder rec;
  const auto a = zero_shot_adapt(st, target);
  CHECK(rec.paths().empty());
  const auto direct = hypernet::generate_lora(st.best_weights, test::ewave().at("MalaE"), st.hypernet);
  const auto via = zero_shot_adapt(st, test::ewave().at("MalaE"));
  CHECK(via.blocks[1].up_v == direct.blocks[1].up_v);
  const auto other = typology::parse_feature_vectors("#features=1\nX\tf\tA\n");
  CHECK_THROWS_AS(zero_shot_adapt(st, other.at("X")), SchemaError);
  CHECK(a.blocks.size() == 2);
}

TEST_CASE("loading a corpus directory never opens the excluded file") {
  Setup s;
  const auto dir = test::scratch_dir("trainer-corpora");
  for (const auto& [id, corpus] : s.corpora) transform::save_parallel_corpus(dir / (id + ".tsv"), corpus);
  transform::save_parallel_corpus(
      dir / "CollSgE.tsv",
      transform::build_parallel_corpus(transform::toy_sentences(5, 1), test::ewave().at("CollSgE"), 1));
  io::FileAccessRecorder rec;
  const auto loaded = load_corpora_dir(dir, "CollSgE");
  CHECK(loaded.size() == 3);
  CHECK(loaded.count("CollSgE") == 0);
  for (const auto& p : rec.paths()) CHECK(p.filename() != "CollSgE.tsv");
  CHECK(rec.paths().size() == 3);
}
