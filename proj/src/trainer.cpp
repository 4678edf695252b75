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


#include "hyperlora/trainer.hpp"

#include "hyperlora/io.hpp"
#include "hyperlora/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hyperlora::trainer {

namespace {

constexpr std::uint64_t kBatchStream = 0x62617463685f6964ULL;
constexpr std::uint64_t kOrderStream = 0x65706f63685f6f72ULL;

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(text);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

SaeCloud encode_sae(const transform::ParallelCorpus& corpus, const encoder::EncoderStack& stack) {
  SaeCloud cloud;
  std::vector<Matrix> parts;
  parts.reserve(corpus.pairs.size());
  cloud.offsets.push_back(0);
  for (const auto& p : corpus.pairs) {
    parts.push_back(encoder::encode(stack, nullptr, p.sae));
    cloud.offsets.push_back(cloud.offsets.back() + parts.back().rows());
  }
  cloud.points.resize(cloud.offsets.back(), stack.config.d_model);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    cloud.points.middleRows(cloud.offsets[i], parts[i].rows()) = parts[i];
  }
  return cloud;
}

io::Meta cache_meta(const std::string& dialect, const transform::ParallelCorpus& corpus,
                    const encoder::EncoderStack& stack) {
  return {{"sae.dialect", dialect},
          {"sae.encoder_seed", std::to_string(stack.config.seed)},
          {"sae.encoder_fingerprint", std::to_string(stack.weights->fingerprint())},
          {"sae.corpus_hash", std::to_string(corpus.sae_hash())}};
}

SaeCloud cached_sae(const std::filesystem::path& dir, const std::string& dialect,
                    const transform::ParallelCorpus& corpus, const encoder::EncoderStack& stack) {
  const auto path = dir / ("sae-" + dialect + ".ckpt");
  const auto want = cache_meta(dialect, corpus, stack);
  if (std::filesystem::exists(path)) {
    const auto ckpt = io::load_checkpoint(path);
    for (const auto& [k, v] : want) {
      auto it = ckpt.meta.find(k);
      if (it == ckpt.meta.end() || it->second != v) {
        throw StaleCacheError("cached SAE cloud " + path.string() + " does not match (" + k + ")");
      }
    }
    SaeCloud cloud;
    cloud.points = ckpt.matrix("sae/points");
    const auto off = ckpt.row_vector("sae/offsets");
    for (Eigen::Index i = 0; i < off.size(); ++i) cloud.offsets.push_back(static_cast<Eigen::Index>(off(i)));
    if (cloud.sentences() != corpus.pairs.size() || cloud.offsets.back() != cloud.points.rows()) {
      throw StaleCacheError("cached SAE cloud " + path.string() + " has inconsistent offsets");
    }
    return cloud;
  }
  auto cloud = encode_sae(corpus, stack);
  io::Checkpoint ckpt;
  ckpt.meta = want;
  ckpt.add("sae/points", cloud.points);
  RowVector off(static_cast<Eigen::Index>(cloud.offsets.size()));
  for (std::size_t i = 0; i < cloud.offsets.size(); ++i) off(static_cast<Eigen::Index>(i)) = static_cast<double>(cloud.offsets[i]);
  ckpt.add("sae/offsets", off);
  io::save_checkpoint(path, ckpt);
  return cloud;
}

struct Batch {
  std::string dialect;
  std::vector<std::size_t> ids;
};

void shuffle(std::vector<std::size_t>& v, CounterRng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Every sentence of every source appears in exactly one batch per epoch;
// the batch order is then shuffled across dialects.
std::vector<Batch> epoch_plan(const Corpora& corpora, int batch_size, std::uint64_t seed, int epoch) {
  std::vector<Batch> plan;
  std::uint64_t d_index = 0;
  for (const auto& [id, corpus] : corpora) {
    std::vector<std::size_t> perm(corpus.pairs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    CounterRng rng(seed, keyed_bits(kBatchStream, {static_cast<std::uint64_t>(epoch), d_index++}));
    shuffle(perm, rng);
    for (std::size_t at = 0; at < perm.size(); at += static_cast<std::size_t>(batch_size)) {
      const auto end = std::min(perm.size(), at + static_cast<std::size_t>(batch_size));
      plan.push_back({id, std::vector<std::size_t>(perm.begin() + static_cast<std::ptrdiff_t>(at),
                                                   perm.begin() + static_cast<std::ptrdiff_t>(end))});
    }
  }
  std::vector<std::size_t> order(plan.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  CounterRng rng(seed, keyed_bits(kOrderStream, {static_cast<std::uint64_t>(epoch)}));
  shuffle(order, rng);
  std::vector<Batch> out;
  out.reserve(plan.size());
  for (auto i : order) out.push_back(std::move(plan[i]));
  return out;
}

void adam_step(TrainState& st, const hypernet::HypernetWeights& g, double lr, const TrainConfig& cfg) {
  const double t = static_cast<double>(st.step + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto w = st.hw.tensors();
  auto m = st.adam_m.tensors();
  auto v = st.adam_v.tensors();
  const auto gt = g.tensors();
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i]->array() = cfg.beta1 * m[i]->array() + (1.0 - cfg.beta1) * gt[i]->array();
    v[i]->array() = cfg.beta2 * v[i]->array() + (1.0 - cfg.beta2) * gt[i]->array().square();
    w[i]->array() -= lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + cfg.adam_eps);
  }
}

void write_best(const std::filesystem::path& dir, const TrainState& st) {
  io::Checkpoint ckpt;
  hypernet::write_checkpoint(ckpt, st.best_weights, st.hypernet);
  ckpt.meta["train.best_loss"] = io::format_double(st.best_loss);
  ckpt.meta["train.best_epoch"] = std::to_string(st.best_epoch);
  ckpt.meta["features.ids"] = join(st.universe->ids(), '\t');
  ckpt.meta["run.sources"] = join(st.sources, ',');
  io::save_checkpoint(dir / "best.ckpt", ckpt);
}

void write_last(const std::filesystem::path& dir, const TrainState& st) {
  io::Checkpoint ckpt;
  hypernet::write_checkpoint(ckpt, st.hw, st.hypernet);
  const auto m = st.adam_m.tensors();
  const auto v = st.adam_v.tensors();
  for (std::size_t i = 0; i < m.size(); ++i) {
    ckpt.add(std::string("adam_m/") + hypernet::HypernetWeights::tensor_names()[i], *m[i]);
    ckpt.add(std::string("adam_v/") + hypernet::HypernetWeights::tensor_names()[i], *v[i]);
  }
  ckpt.meta["train.step"] = std::to_string(st.step);
  ckpt.meta["train.diverged"] = st.diverged ? "1" : "0";
  if (st.diverged) ckpt.meta["train.divergence"] = st.divergence;
  ckpt.meta["features.ids"] = join(st.universe->ids(), '\t');
  io::save_checkpoint(dir / "last.ckpt", ckpt);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 0) throw ConfigError("epochs must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (eval_every < 0) throw ConfigError("eval_every must be non-negative");
}

void TrainConfig::write_meta(std::map<std::string, std::string>& meta) const {
  meta["train.learning_rate"] = io::format_double(learning_rate);
  meta["train.schedule"] = "linear";
  meta["train.batch_size"] = std::to_string(batch_size);
  meta["train.epochs"] = std::to_string(epochs);
  meta["train.beta1"] = io::format_double(beta1);
  meta["train.beta2"] = io::format_double(beta2);
  meta["train.adam_eps"] = io::format_double(adam_eps);
  meta["train.seed"] = std::to_string(seed);
  meta["train.eval_every"] = std::to_string(eval_every);
}

TrainConfig TrainConfig::read_meta(const std::map<std::string, std::string>& meta) {
  TrainConfig cfg;
  cfg.learning_rate = io::meta_double(meta, "train.learning_rate");
  if (io::meta_str(meta, "train.schedule") != "linear") throw ConfigError("unknown learning-rate schedule");
  cfg.batch_size = static_cast<int>(io::meta_int(meta, "train.batch_size"));
  cfg.epochs = static_cast<int>(io::meta_int(meta, "train.epochs"));
  cfg.beta1 = io::meta_double(meta, "train.beta1");
  cfg.beta2 = io::meta_double(meta, "train.beta2");
  cfg.adam_eps = io::meta_double(meta, "train.adam_eps");
  cfg.seed = io::meta_u64(meta, "train.seed");
  cfg.eval_every = static_cast<int>(io::meta_int(meta, "train.eval_every"));
  cfg.validate();
  return cfg;
}

Matrix SaeCloud::rows_of(std::span<const std::size_t> sentence_ids) const {
  Eigen::Index n = 0;
  for (auto i : sentence_ids) {
    if (i >= sentences()) throw ArgumentError("sentence index out of range");
    n += offsets[i + 1] - offsets[i];
  }
  Matrix out(n, points.cols());
  Eigen::Index at = 0;
  for (auto i : sentence_ids) {
    const auto len = offsets[i + 1] - offsets[i];
    out.middleRows(at, len) = points.middleRows(offsets[i], len);
    at += len;
  }
  return out;
}

SaeClouds precompute_sae(const Corpora& corpora, const encoder::EncoderStack& stack,
                         const std::optional<std::filesystem::path>& cache_dir) {
  if (corpora.empty()) throw ArgumentError("precompute_sae needs at least one corpus");
  if (!stack.weights) throw ConfigError("encoder stack has no weights");
  SaeClouds out;
  for (const auto& [id, corpus] : corpora) {
    if (corpus.pairs.empty()) throw ArgumentError("corpus '" + id + "' is empty");
    out.emplace(id, cache_dir ? cached_sae(*cache_dir, id, corpus, stack) : encode_sae(corpus, stack));
  }
  return out;
}

TrainState train(const TrainInputs& in, const TrainConfig& cfg) {
  cfg.validate();
  if (!in.stack || !in.stack->weights) throw ConfigError("training needs an encoder");
  if (in.corpora.empty()) throw ArgumentError("training needs at least one source dialect");
  if (!in.exclude.empty() && in.corpora.count(in.exclude)) {
    throw ArgumentError("target dialect '" + in.exclude + "' is among the training sources");
  }
  std::map<std::string, const typology::DialectFeatureVector*> features;
  for (const auto& [id, corpus] : in.corpora) {
    auto it = in.features.find(id);
    if (it == in.features.end()) throw SchemaError("no feature vector for source dialect '" + id + "'");
    if (!features.empty() && !features.begin()->second->comparable_with(it->second)) {
      throw SchemaError("source feature vectors use different feature universes");
    }
    features.emplace(id, &it->second);
  }
  const auto& universe = features.begin()->second->universe_ptr();

  grad::LossContext ctx{in.stack, in.hypernet, in.ot};
  if (ctx.hypernet.feature_dim == 0) ctx.hypernet.feature_dim = static_cast<int>(universe->size());
  if (static_cast<std::size_t>(ctx.hypernet.feature_dim) != universe->size()) {
    throw SchemaError("hypernetwork feature_dim does not match the feature vectors");
  }
  ctx.validate();

  TrainState st;
  st.hypernet = ctx.hypernet;
  st.universe = universe;
  for (const auto& [id, corpus] : in.corpora) st.sources.push_back(id);
  st.hw = hypernet::HypernetWeights::init(st.hypernet);
  st.adam_m = hypernet::HypernetWeights::zeros_like(st.hw);
  st.adam_v = hypernet::HypernetWeights::zeros_like(st.hw);
  st.best_weights = st.hw;

  const auto sae = precompute_sae(in.corpora, *in.stack, in.cache_dir);
  if (in.run_dir) write_run_config(*in.run_dir, in, cfg);

  auto loss_of = [&](const Batch& b, const hypernet::HypernetWeights& hw, bool with_grad, grad::GradReport* report) {
    const auto& corpus = in.corpora.at(b.dialect);
    std::vector<transform::TokenSentence> sentences;
    sentences.reserve(b.ids.size());
    for (auto i : b.ids) sentences.push_back(corpus.pairs[i].dialect);
    const ot::PointCloud reference(sae.at(b.dialect).rows_of(b.ids));
    const auto& d = *features.at(b.dialect);
    if (with_grad) {
      *report = grad::loss_and_grad(hw, d, sentences, reference, ctx);
      return report->loss;
    }
    return grad::loss_value(hw, d, sentences, reference, ctx);
  };

  auto finish = [&]() {
    if (!in.run_dir) return;
    write_last(*in.run_dir, st);
    write_history(*in.run_dir / "history.tsv", st.history);
  };

  auto diverge = [&](std::string why) {
    st.diverged = true;
    st.divergence = std::move(why);
    finish();
  };

  if (cfg.epochs == 0) {
    const auto plan = epoch_plan(in.corpora, cfg.batch_size, cfg.seed, 1);
    double sum = 0.0;
    try {
      for (const auto& b : plan) sum += loss_of(b, st.hw, false, nullptr);
    } catch (const NumericError& e) {
      diverge(e.what());
      return st;
    }
    st.best_loss = sum / static_cast<double>(plan.size());
    st.best_epoch = 0;
    if (in.run_dir) write_best(*in.run_dir, st);
    finish();
    return st;
  }

  std::vector<Batch> monitor_batches;
  for (const auto& [id, corpus] : in.corpora) {
    Batch b{id, {}};
    for (std::size_t i = 0; i < std::min(corpus.pairs.size(), static_cast<std::size_t>(cfg.batch_size)); ++i) {
      b.ids.push_back(i);
    }
    monitor_batches.push_back(std::move(b));
  }

  const auto steps_per_epoch = static_cast<std::int64_t>(epoch_plan(in.corpora, cfg.batch_size, cfg.seed, 1).size());
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto plan = epoch_plan(in.corpora, cfg.batch_size, cfg.seed, epoch);
    double sum = 0.0;
    for (const auto& b : plan) {
      grad::GradReport report;
      try {
        loss_of(b, st.hw, true, &report);
      } catch (const NumericError& e) {
        diverge(e.what());
        return st;
      }
      if (!std::isfinite(report.loss) || !report.grads.all_finite()) {
        diverge("non-finite loss or gradient at step " + std::to_string(st.step));
        return st;
      }
      const double lr = cfg.learning_rate * (1.0 - static_cast<double>(st.step) / total_steps);
      const auto prev = st.hw;
      const auto prev_m = st.adam_m;
      const auto prev_v = st.adam_v;
      adam_step(st, report.grads, lr, cfg);
      if (!st.hw.all_finite()) {
        st.hw = prev;
        st.adam_m = prev_m;
        st.adam_v = prev_v;
        diverge("non-finite weights after step " + std::to_string(st.step));
        return st;
      }
      st.history.push_back({st.step, epoch, b.dialect, report.loss});
      ++st.step;
      sum += report.loss;
      if (cfg.eval_every > 0 && st.step % cfg.eval_every == 0) {
        double m = 0.0;
        for (const auto& mb : monitor_batches) m += loss_of(mb, st.hw, false, nullptr);
        st.monitor.push_back({st.step, m / static_cast<double>(monitor_batches.size())});
      }
    }
    const double mean = sum / static_cast<double>(plan.size());
    st.epoch_losses.push_back(mean);
    if (mean < st.best_loss) {
      st.best_loss = mean;
      st.best_epoch = epoch;
      st.best_weights = st.hw;
      if (in.run_dir) write_best(*in.run_dir, st);
    }
    finish();
  }
  return st;
}

encoder::LoRAParamSet zero_shot_adapt(const TrainState& state, const typology::DialectFeatureVector& target) {
  if (target.size() != static_cast<std::size_t>(state.hypernet.feature_dim)) {
    throw SchemaError("target has " + std::to_string(target.size()) + " features, the hypernetwork expects " +
                      std::to_string(state.hypernet.feature_dim));
  }
  if (state.universe && !(target.universe() == *state.universe)) {
    throw SchemaError("target feature ids differ from the training feature universe");
  }
  return hypernet::generate_lora(state.best_weights, target, state.hypernet);
}

Corpora load_corpora_dir(const std::filesystem::path& dir, std::string_view exclude) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".tsv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  Corpora out;
  for (const auto& f : files) {
    const auto id = f.stem().string();
    if (id == exclude) continue;
    out.emplace(id, transform::load_parallel_corpus(f, id));
  }
  return out;
}

encoder::EncoderStack build_source_encoder(const Corpora& corpora, const encoder::EncoderConfig& cfg) {
  if (corpora.empty()) throw ArgumentError("no corpora to build a vocabulary from");
  std::vector<transform::TokenSentence> all;
  for (const auto& [id, corpus] : corpora) {
    for (const auto& p : corpus.pairs) {
      all.push_back(p.sae);
      all.push_back(p.dialect);
    }
  }
  return encoder::EncoderStack::create(cfg, encoder::Vocabulary::build(all, static_cast<std::size_t>(cfg.vocab_size)));
}

void write_run_config(const std::filesystem::path& run_dir, const TrainInputs& inputs, const TrainConfig& cfg) {
  io::Meta meta;
  cfg.write_meta(meta);
  inputs.stack->config.write_meta(meta);
  meta["encoder.vocab"] = inputs.stack->vocab.serialize();
  meta["encoder.fingerprint"] = std::to_string(inputs.stack->weights->fingerprint());
  auto hcfg = inputs.hypernet;
  if (hcfg.feature_dim == 0 && !inputs.corpora.empty()) {
    hcfg.feature_dim = static_cast<int>(inputs.features.at(inputs.corpora.begin()->first).size());
  }
  hcfg.write_meta(meta);
  inputs.ot.write_meta(meta);
  std::vector<std::string> sources;
  for (const auto& [id, corpus] : inputs.corpora) {
    sources.push_back(id);
    meta["corpus." + id + ".seed"] = std::to_string(corpus.seed);
    meta["corpus." + id + ".content_hash"] = std::to_string(corpus.content_hash());
  }
  meta["run.sources"] = join(sources, ',');
  meta["run.exclude"] = inputs.exclude;
  io::save_meta_file(run_dir / "config.meta", meta);
}

std::map<std::string, std::string> read_run_config(const std::filesystem::path& run_dir) {
  return io::load_meta_file(run_dir / "config.meta");
}

void write_history(const std::filesystem::path& path, std::span<const HistoryRecord> history) {
  auto out = io::open_write(path);
  out << "step\tepoch\tdialect_id\tloss\n";
  for (const auto& h : history) {
    out << h.step << '\t' << h.epoch << '\t' << h.dialect_id << '\t' << io::format_double(h.loss) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<HistoryRecord> read_history(const std::filesystem::path& path) {
  auto in = io::open_read(path);
  std::vector<HistoryRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (++line_no == 1) {
      if (line != "step\tepoch\tdialect_id\tloss") throw ParseError("unexpected history header", line_no);
      continue;
    }
    if (line.empty()) continue;
    const auto f = split(line, '\t');
    if (f.size() != 4) throw ParseError("expected 4 columns", line_no);
    try {
      out.push_back({std::stoll(f[0]), std::stoi(f[1]), f[2], std::stod(f[3])});
    } catch (const std::logic_error&) {
      throw ParseError("bad number", line_no);
    }
  }
  return out;
}

TrainState load_best(const std::filesystem::path& run_dir) {
  const auto ckpt = io::load_checkpoint(run_dir / "best.ckpt");
  TrainState st;
  st.hypernet = hypernet::HypernetConfig::read_meta(ckpt.meta);
  st.best_weights = hypernet::read_checkpoint(ckpt, st.hypernet);
  st.hw = st.best_weights;
  st.best_loss = io::meta_double(ckpt.meta, "train.best_loss");
  st.best_epoch = static_cast<int>(io::meta_int(ckpt.meta, "train.best_epoch"));
  st.universe = std::make_shared<const typology::FeatureUniverse>(split(ckpt.meta_at("features.ids"), '\t'));
  st.sources = split(ckpt.meta_at("run.sources"), ',');
  if (st.universe->size() != static_cast<std::size_t>(st.hypernet.feature_dim)) {
    throw SchemaError("stored feature ids do not match the hypernetwork input size");
  }
  return st;
}

encoder::EncoderStack load_run_encoder(const std::filesystem::path& run_dir) {
  const auto meta = read_run_config(run_dir);
  auto stack = encoder::EncoderStack::create(encoder::EncoderConfig::read_meta(meta),
                                             encoder::Vocabulary::deserialize(io::meta_str(meta, "encoder.vocab")));
  if (std::to_string(stack.weights->fingerprint()) != io::meta_str(meta, "encoder.fingerprint")) {
    throw SchemaError("rebuilt encoder does not match the run's fingerprint");
  }
  return stack;
}

}  // namespace hyperlora::trainer
