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
#include "hyperlora/ot.hpp"
#include "hyperlora/trainer.hpp"
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

namespace hyperlora::eval {

struct AlignmentResult {
  double s_eps_base = 0.0;
  double s_eps_adapted = 0.0;
};

/// S_eps between the held-out dialect side and its SAE side, encoded
/// without and with the zero-shot adapter, on the full corpus clouds.
AlignmentResult eval_alignment(const encoder::EncoderStack& stack, const trainer::TrainState& state,
                               const typology::DialectFeatureVector& target,
                               const transform::ParallelCorpus& corpus, const ot::OTConfig& cfg = {});

struct ProbeConfig {
  int iterations = 500;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  double train_fraction = 0.5;
};

struct ProbeResult {
  double acc_base = 0.0;
  double acc_adapted = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Logistic probe on mean-pooled representations. It is fit on the SAE side
/// of a seeded split of the corpus and frozen, then scored on the dialect
/// side of the remaining pairs, encoded without and with the adapter.
/// Labels are transform::sentiment_label; pairs labelled 0 are skipped.
ProbeResult eval_probe(const encoder::EncoderStack& stack, const trainer::TrainState& state,
                       const typology::DialectFeatureVector& target, const transform::ParallelCorpus& corpus,
                       std::uint64_t probe_seed, const ProbeConfig& cfg = {});

/// Same, with caller-supplied labels in {-1, +1} (0 skips the pair).
ProbeResult eval_probe(const encoder::EncoderStack& stack, const trainer::TrainState& state,
                       const typology::DialectFeatureVector& target, const transform::ParallelCorpus& corpus,
                       std::span<const int> labels, std::uint64_t probe_seed, const ProbeConfig& cfg = {});

struct BootstrapResult {
  double observed_delta = 0.0;  // mean(a) - mean(b)
  double p_value = 1.0;
  std::size_t n_resamples = 0;
  double alpha = 0.05;
  bool significant = false;
};

/// One-sided paired bootstrap for "a scores higher than b". Resample r draws
/// item indices from CounterRng(seed, r); p is the fraction of resamples
/// whose mean difference is <= 0.
BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b, double alpha = 0.05,
                                 std::size_t n = 10000, std::uint64_t seed = 0);

struct SweepSetup {
  const encoder::EncoderStack* stack = nullptr;
  trainer::Corpora corpora;  // every candidate that may be trained on
  hypernet::HypernetConfig hypernet;
  ot::OTConfig ot;
  trainer::TrainConfig train;
  transform::ParallelCorpus target_corpus;
  std::uint64_t probe_seed = 0;
};

struct SweepRow {
  typology::RankedSourceSet subset;
  bool trained = false;
  double s_eps_base = std::numeric_limits<double>::quiet_NaN();
  double s_eps_adapted = std::numeric_limits<double>::quiet_NaN();
  double acc_base = std::numeric_limits<double>::quiet_NaN();
  double acc_adapted = std::numeric_limits<double>::quiet_NaN();
};

/// Ranks every k-subset of the candidates by typology, trains and evaluates
/// the first `budget` of them. budget 0 needs no setup.
std::vector<SweepRow> sweep_sources(std::span<const typology::DialectFeatureVector> candidates,
                                    const typology::DialectFeatureVector& target, std::size_t k,
                                    std::size_t budget, const SweepSetup* setup = nullptr);

struct DialectRecord {
  std::string dialect_id;
  double s_eps_base = 0.0;
  double s_eps_adapted = 0.0;
  double acc_base = 0.0;
  double acc_adapted = 0.0;

  /// (base - adapted) / base, from the stored values.
  double relative_improvement() const;
};

struct EvalReport {
  std::map<std::string, std::string> meta;
  std::vector<DialectRecord> records;
};

// Reports are TSV files: "# key=value" metadata lines, a header row, then
// one row per record.

void write_eval_report(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_eval_report(const std::filesystem::path& path);
std::string summarize(const EvalReport& report);

void write_sweep_report(const std::filesystem::path& path, std::span<const SweepRow> rows,
                        const std::map<std::string, std::string>& meta);
void write_bootstrap_report(const std::filesystem::path& path, const BootstrapResult& result,
                            const std::map<std::string, std::string>& meta);

}  // namespace hyperlora::eval
