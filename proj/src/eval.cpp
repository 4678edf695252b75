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


#include "hyperlora/eval.hpp"

#include "hyperlora/io.hpp"
#include "hyperlora/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hyperlora::eval {

namespace {

constexpr std::uint64_t kProbeStream = 0x70726f62655f7370ULL;

void split_sides(const transform::ParallelCorpus& corpus, std::vector<transform::TokenSentence>& sae,
                 std::vector<transform::TokenSentence>& dialect) {
  for (const auto& p : corpus.pairs) {
    sae.push_back(p.sae);
    dialect.push_back(p.dialect);
  }
}

void require_held_out(const trainer::TrainState& state, const typology::DialectFeatureVector& target) {
  if (std::find(state.sources.begin(), state.sources.end(), target.dialect_id()) != state.sources.end()) {
    throw ArgumentError("dialect '" + target.dialect_id() + "' was a training source");
  }
}

double divergence(const ot::PointCloud& x, const ot::PointCloud& y, double wyy, const ot::OTConfig& cfg) {
  const double wxy = ot::sinkhorn_w(x, y, cfg).value;
  const double wxx = ot::sinkhorn_w(x, x, cfg).value;
  const double s = wxy - 0.5 * wxx - 0.5 * wyy;
  if (!std::isfinite(s)) throw NumericError("Sinkhorn divergence is not finite");
  return s;
}

RowVector pooled(const encoder::EncoderStack& stack, const encoder::LoRAParamSet* lora,
                 const transform::TokenSentence& s) {
  return encoder::encode(stack, lora, s).colwise().mean();
}

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

std::string fmt(double x) { return std::isnan(x) ? "nan" : io::format_double(x); }

void write_meta_lines(std::ostream& out, const std::map<std::string, std::string>& meta) {
  for (const auto& [k, v] : meta) {
    if (k.find('=') != std::string::npos || k.find('\n') != std::string::npos || v.find('\n') != std::string::npos) {
      throw ArgumentError("metadata entry '" + k + "' cannot be stored as a line");
    }
    out << "# " << k << '=' << v << '\n';
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, '\t')) out.push_back(cur);
  return out;
}

}  // namespace

AlignmentResult eval_alignment(const encoder::EncoderStack& stack, const trainer::TrainState& state,
                               const typology::DialectFeatureVector& target,
                               const transform::ParallelCorpus& corpus, const ot::OTConfig& cfg) {
  if (corpus.pairs.empty()) throw ArgumentError("evaluation corpus is empty");
  require_held_out(state, target);
  const auto lora = trainer::zero_shot_adapt(state, target);
  std::vector<transform::TokenSentence> sae, dialect;
  split_sides(corpus, sae, dialect);
  const ot::PointCloud y(encoder::batch_encode(stack, nullptr, sae));
  const ot::PointCloud xb(encoder::batch_encode(stack, nullptr, dialect));
  const ot::PointCloud xa(encoder::batch_encode(stack, &lora, dialect));
  const double wyy = ot::sinkhorn_w(y, y, cfg).value;
  AlignmentResult out;
  out.s_eps_base = divergence(xb, y, wyy, cfg);
  out.s_eps_adapted = xa.points == xb.points ? out.s_eps_base : divergence(xa, y, wyy, cfg);
  return out;
}

ProbeResult eval_probe(const encoder::EncoderStack& stack, const trainer::TrainState& state,
                       const typology::DialectFeatureVector& target, const transform::ParallelCorpus& corpus,
                       std::uint64_t probe_seed, const ProbeConfig& cfg) {
  std::vector<int> labels;
  labels.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) labels.push_back(transform::sentiment_label(p.sae));
  return eval_probe(stack, state, target, corpus, labels, probe_seed, cfg);
}

ProbeResult eval_probe(const encoder::EncoderStack& stack, const trainer::TrainState& state,
                       const typology::DialectFeatureVector& target, const transform::ParallelCorpus& corpus,
                       std::span<const int> labels, std::uint64_t probe_seed, const ProbeConfig& cfg) {
  if (labels.size() != corpus.pairs.size()) throw ArgumentError("one label per pair is required");
  if (cfg.iterations < 1 || !(cfg.learning_rate > 0.0) || !(cfg.l2 >= 0.0) ||
      !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
    throw ConfigError("invalid probe configuration");
  }
  std::vector<std::size_t> items;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1 && labels[i] != -1) throw ArgumentError("labels must be -1, 0 or +1");
    if (labels[i] != 0) items.push_back(i);
  }
  if (items.size() < 2) throw ArgumentError("probe needs at least two labelled pairs");
  CounterRng rng(probe_seed, kProbeStream);
  for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[rng.below(i)]);
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(items.size()))), 1,
      items.size() - 1);
  const std::span<const std::size_t> train_ids(items.data(), n_train);
  const std::span<const std::size_t> test_ids(items.data() + n_train, items.size() - n_train);

  bool pos = false, neg = false;
  for (auto i : train_ids) (labels[i] > 0 ? pos : neg) = true;
  if (!pos || !neg) throw ArgumentError("probe training data has a single class");

  const auto dim = stack.config.d_model;
  Matrix x(static_cast<Eigen::Index>(n_train), dim);
  Vector y(static_cast<Eigen::Index>(n_train));
  for (std::size_t r = 0; r < n_train; ++r) {
    x.row(static_cast<Eigen::Index>(r)) = pooled(stack, nullptr, corpus.pairs[train_ids[r]].sae);
    y(static_cast<Eigen::Index>(r)) = labels[train_ids[r]] > 0 ? 1.0 : 0.0;
  }
  const RowVector mu = x.colwise().mean();
  const RowVector sd =
      ((x.rowwise() - mu).array().square().colwise().mean().sqrt()).max(1e-12).matrix();
  auto standardize = [&](const RowVector& v) -> RowVector { return ((v - mu).array() / sd.array()).matrix(); };
  for (Eigen::Index r = 0; r < x.rows(); ++r) x.row(r) = standardize(x.row(r));

  Vector w = Vector::Zero(dim);
  double b = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n_train);
  for (int it = 0; it < cfg.iterations; ++it) {
    Vector z = x * w;
    Vector err(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) err(i) = sigmoid(z(i) + b) - y(i);
    w -= cfg.learning_rate * (inv_n * (x.transpose() * err) + cfg.l2 * w);
    b -= cfg.learning_rate * inv_n * err.sum();
  }

  const auto lora = trainer::zero_shot_adapt(state, target);
  auto accuracy = [&](const encoder::LoRAParamSet* adapter) {
    std::size_t hits = 0;
    for (auto i : test_ids) {
      const double score = standardize(pooled(stack, adapter, corpus.pairs[i].dialect)).dot(w) + b;
      if ((score > 0.0) == (labels[i] > 0)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(test_ids.size());
  };
  ProbeResult out;
  out.n_train = n_train;
  out.n_test = test_ids.size();
  out.acc_base = accuracy(nullptr);
  out.acc_adapted = accuracy(&lora);
  return out;
}

BootstrapResult paired_bootstrap(std::span<const double> a, std::span<const double> b, double alpha,
                                 std::size_t n, std::uint64_t seed) {
  if (a.size() != b.size()) throw ArgumentError("paired_bootstrap: sequences differ in length");
  if (a.size() < 2) throw ArgumentError("paired_bootstrap: need at least two items");
  if (n < 1000) throw ArgumentError("paired_bootstrap: need at least 1000 resamples");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ArgumentError("paired_bootstrap: alpha must lie in (0, 1)");
  const std::size_t m = a.size();
  std::vector<double> diff(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) throw NumericError("paired_bootstrap: non-finite score");
    diff[i] = a[i] - b[i];
  }
  BootstrapResult out;
  out.alpha = alpha;
  out.n_resamples = n;
  out.observed_delta = std::accumulate(diff.begin(), diff.end(), 0.0) / static_cast<double>(m);
  std::size_t not_better = 0;
  for (std::size_t r = 0; r < n; ++r) {
    CounterRng rng(seed, r);
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) sum += diff[rng.below(m)];
    if (sum <= 0.0) ++not_better;
  }
  out.p_value = static_cast<double>(not_better) / static_cast<double>(n);
  out.significant = out.p_value < alpha;
  return out;
}

std::vector<SweepRow> sweep_sources(std::span<const typology::DialectFeatureVector> candidates,
                                    const typology::DialectFeatureVector& target, std::size_t k,
                                    std::size_t budget, const SweepSetup* setup) {
  if (budget > 0 && (!setup || !setup->stack)) throw ArgumentError("sweep with a training budget needs a setup");
  const auto ranked = typology::select_sources(candidates, target, k);
  typology::FeatureTable features;
  for (const auto& c : candidates) features.emplace(c.dialect_id(), c);
  std::vector<SweepRow> rows;
  rows.reserve(ranked.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    SweepRow row;
    row.subset = ranked[i];
    if (i < budget) {
      trainer::TrainInputs in;
      in.stack = setup->stack;
      for (const auto& id : row.subset.dialect_ids) {
        auto it = setup->corpora.find(id);
        if (it == setup->corpora.end()) throw ArgumentError("no corpus for candidate '" + id + "'");
        in.corpora.emplace(id, it->second);
      }
      in.features = features;
      in.hypernet = setup->hypernet;
      in.ot = setup->ot;
      in.exclude = target.dialect_id();
      const auto state = trainer::train(in, setup->train);
      if (state.diverged) throw NumericError("training diverged: " + state.divergence);
      const auto align = eval_alignment(*setup->stack, state, target, setup->target_corpus, setup->ot);
      const auto probe = eval_probe(*setup->stack, state, target, setup->target_corpus, setup->probe_seed);
      row.trained = true;
      row.s_eps_base = align.s_eps_base;
      row.s_eps_adapted = align.s_eps_adapted;
      row.acc_base = probe.acc_base;
      row.acc_adapted = probe.acc_adapted;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double DialectRecord::relative_improvement() const {
  return s_eps_base == 0.0 ? 0.0 : (s_eps_base - s_eps_adapted) / s_eps_base;
}

void write_eval_report(const std::filesystem::path& path, const EvalReport& report) {
  auto out = io::open_write(path);
  write_meta_lines(out, report.meta);
  out << "dialect_id\ts_eps_base\ts_eps_adapted\trelative_improvement\tacc_base\tacc_adapted\n";
  for (const auto& r : report.records) {
    out << r.dialect_id << '\t' << fmt(r.s_eps_base) << '\t' << fmt(r.s_eps_adapted) << '\t'
        << fmt(r.relative_improvement()) << '\t' << fmt(r.acc_base) << '\t' << fmt(r.acc_adapted) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

EvalReport read_eval_report(const std::filesystem::path& path) {
  auto in = io::open_read(path);
  EvalReport report;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ParseError("metadata line without '='", line_no);
      report.meta[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    if (!header) {
      if (line.rfind("dialect_id\t", 0) != 0) throw ParseError("missing report header", line_no);
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 6) throw ParseError("expected 6 columns", line_no);
    try {
      report.records.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[4]), std::stod(f[5])});
    } catch (const std::logic_error&) {
      throw ParseError("bad number", line_no);
    }
  }
  return report;
}

std::string summarize(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& r : report.records) {
    out << r.dialect_id << ": S_eps " << r.s_eps_base << " -> " << r.s_eps_adapted << " ("
        << 100.0 * r.relative_improvement() << "% lower), probe accuracy " << r.acc_base << " -> "
        << r.acc_adapted << '\n';
  }
  return out.str();
}

void write_sweep_report(const std::filesystem::path& path, std::span<const SweepRow> rows,
                        const std::map<std::string, std::string>& meta) {
  auto out = io::open_write(path);
  write_meta_lines(out, meta);
  out << "rank\tpareto_rank\tsources\tl1\tcoverage\ttrained\ts_eps_base\ts_eps_adapted\tacc_base\tacc_adapted\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::string ids;
    for (const auto& id : r.subset.dialect_ids) ids += (ids.empty() ? "" : ",") + id;
    out << i << '\t' << r.subset.pareto_rank << '\t' << ids << '\t' << fmt(r.subset.l1) << '\t'
        << fmt(r.subset.coverage) << '\t' << (r.trained ? 1 : 0) << '\t' << fmt(r.s_eps_base) << '\t'
        << fmt(r.s_eps_adapted) << '\t' << fmt(r.acc_base) << '\t' << fmt(r.acc_adapted) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_bootstrap_report(const std::filesystem::path& path, const BootstrapResult& result,
                            const std::map<std::string, std::string>& meta) {
  auto out = io::open_write(path);
  write_meta_lines(out, meta);
  out << "observed_delta\tp_value\tn_resamples\talpha\tsignificant\n";
  out << fmt(result.observed_delta) << '\t' << fmt(result.p_value) << '\t' << result.n_resamples << '\t'
      << fmt(result.alpha) << '\t' << (result.significant ? 1 : 0) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace hyperlora::eval
