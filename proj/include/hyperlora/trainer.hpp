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

#include "hyperlora/encoder.hpp"
#include "hyperlora/grad.hpp"
#include "hyperlora/hypernet.hpp"
#include "hyperlora/ot.hpp"
#include "hyperlora/transform.hpp"
#include "hyperlora/typology.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hyperlora::trainer {

struct TrainConfig {
  double learning_rate = 3e-5;  // decays linearly to 0 over all steps
  int batch_size = 16;
  int epochs = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int eval_every = 0;  // steps between monitoring evaluations; 0 disables

  void validate() const;
  void write_meta(std::map<std::string, std::string>& meta) const;
  static TrainConfig read_meta(const std::map<std::string, std::string>& meta);
};

using Corpora = std::map<std::string, transform::ParallelCorpus>;

/// SAE-side representations of one corpus. Rows of sentence i are
/// [offsets[i], offsets[i + 1]).
struct SaeCloud {
  Matrix points;
  std::vector<Eigen::Index> offsets;

  std::size_t sentences() const { return offsets.empty() ? 0 : offsets.size() - 1; }
  Matrix rows_of(std::span<const std::size_t> sentence_ids) const;
};

using SaeClouds = std::map<std::string, SaeCloud>;

/// Encodes every SAE side without an adapter. With a cache directory, each
/// dialect is stored as sae-<dialect>.ckpt and reused when its recorded
/// encoder seed, encoder fingerprint and corpus hash all match; a mismatch
/// raises StaleCacheError.
SaeClouds precompute_sae(const Corpora& corpora, const encoder::EncoderStack& stack,
                         const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

struct HistoryRecord {
  std::int64_t step = 0;
  int epoch = 0;
  std::string dialect_id;
  double loss = 0.0;
};

struct MonitorRecord {
  std::int64_t step = 0;
  double loss = 0.0;
};

struct TrainState {
  hypernet::HypernetConfig hypernet;
  std::shared_ptr<const typology::FeatureUniverse> universe;
  std::vector<std::string> sources;
  hypernet::HypernetWeights hw;
  hypernet::HypernetWeights adam_m;
  hypernet::HypernetWeights adam_v;
  std::int64_t step = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  int best_epoch = -1;  // 0 is the initial evaluation pass
  hypernet::HypernetWeights best_weights;
  std::vector<HistoryRecord> history;
  std::vector<double> epoch_losses;  // mean training loss of epochs 1..n
  std::vector<MonitorRecord> monitor;
  bool diverged = false;
  std::string divergence;
};

struct TrainInputs {
  const encoder::EncoderStack* stack = nullptr;
  Corpora corpora;  // source dialects only
  typology::FeatureTable features;
  hypernet::HypernetConfig hypernet;  // feature_dim 0 is filled in from the features
  ot::OTConfig ot;
  std::string exclude;  // held-out target; must not be a source
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> run_dir;
};

/// Samples a dialect and a batch per step, aligns the adapted dialect
/// representations with the matching SAE rows and takes an Adam step on the
/// hypernetwork. Stops early with diverged = true and the last finite
/// weights when a loss or update is not finite.
TrainState train(const TrainInputs& inputs, const TrainConfig& cfg);

/// Adapter for a dialect from the best weights; reads no corpus.
encoder::LoRAParamSet zero_shot_adapt(const TrainState& state, const typology::DialectFeatureVector& target);

/// Encoder whose vocabulary covers both sides of the given corpora (at most
/// cfg.vocab_size entries).
encoder::EncoderStack build_source_encoder(const Corpora& corpora, const encoder::EncoderConfig& cfg = {});

/// Loads <dir>/<dialect>.tsv parallel corpora. The excluded dialect's file
/// is never opened.
Corpora load_corpora_dir(const std::filesystem::path& dir, std::string_view exclude);

// Run directory: config.meta, best.ckpt, last.ckpt, history.tsv.

void write_run_config(const std::filesystem::path& run_dir, const TrainInputs& inputs, const TrainConfig& cfg);
std::map<std::string, std::string> read_run_config(const std::filesystem::path& run_dir);
void write_history(const std::filesystem::path& path, std::span<const HistoryRecord> history);
std::vector<HistoryRecord> read_history(const std::filesystem::path& path);

/// Rebuilds the best state of a finished run: weights, hypernetwork
/// configuration and feature universe.
TrainState load_best(const std::filesystem::path& run_dir);

/// Rebuilds the run's encoder from config.meta (seeded weights and vocabulary).
encoder::EncoderStack load_run_encoder(const std::filesystem::path& run_dir);

}  // namespace hyperlora::trainer
