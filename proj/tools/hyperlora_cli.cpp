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


// Command-line front end: hyperlora <verb> [options].

#include "hyperlora/eval.hpp"
#include "hyperlora/io.hpp"
#include "hyperlora/ot.hpp"
#include "hyperlora/trainer.hpp"
#include "hyperlora/transform.hpp"
#include "hyperlora/typology.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hyperlora;

namespace {

constexpr int kValidationExit = 2;
constexpr int kNumericExit = 3;

std::string joined_argv(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

const typology::DialectFeatureVector& feature_of(const typology::FeatureTable& table, const std::string& id) {
  auto it = table.find(id);
  if (it == table.end()) throw ArgumentError("unknown dialect '" + id + "'");
  return it->second;
}

std::vector<typology::DialectFeatureVector> features_of(const typology::FeatureTable& table,
                                                        const std::vector<std::string>& ids) {
  std::vector<typology::DialectFeatureVector> out;
  for (const auto& id : ids) out.push_back(feature_of(table, id));
  return out;
}

std::vector<double> load_scores(const fs::path& path) {
  auto in = io::open_read(path);
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(line, &used));
      if (line.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(line);
    } catch (const std::logic_error&) {
      throw ParseError("expected one number per line", line_no);
    }
  }
  return out;
}

struct Globals {
  std::uint64_t seed = 0;
  std::string precision = "f64";
  std::string argv;
};

io::Meta base_meta(const Globals& g, const std::string& verb) {
  return {{"cli.argv", g.argv}, {"cli.verb", verb}, {"cli.seed", std::to_string(g.seed)},
          {"cli.precision", g.precision}};
}

void print_row(const typology::RankedSourceSet& r) {
  std::string ids;
  for (const auto& id : r.dialect_ids) ids += (ids.empty() ? "" : ",") + id;
  std::printf("%-40s l1=%.4f coverage=%.4f pareto_rank=%zu\n", ids.c_str(), r.l1, r.coverage, r.pareto_rank);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dialect adapters generated from typological features, aligned with Sinkhorn divergences"};
  app.require_subcommand(1);
  Globals g;
  g.argv = joined_argv(argc, argv);
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--precision", g.precision, "Floating-point precision")
      ->check(CLI::IsMember({"f64"}))
      ->capture_default_str();

  // typology
  auto* typ = app.add_subcommand("typology", "Distances, coverage and source selection over feature vectors");
  typ->require_subcommand(1);
  std::string features_path, target, a_id, b_id, out_path;
  std::vector<std::string> sources, candidates;
  std::size_t k = 4, top = 20;

  auto* cov = typ->add_subcommand("coverage", "Coverage and mean normalized L1 of a source set");
  cov->add_option("--features", features_path)->required();
  cov->add_option("--target", target)->required();
  cov->add_option("--sources", sources)->required()->delimiter(',');

  auto* dist = typ->add_subcommand("distance", "L1 distance between two dialects");
  dist->add_option("--features", features_path)->required();
  dist->add_option("--a", a_id)->required();
  dist->add_option("--b", b_id)->required();

  auto* sel = typ->add_subcommand("select", "Rank every k-subset of candidate sources");
  sel->add_option("--features", features_path)->required();
  sel->add_option("--target", target)->required();
  sel->add_option("--candidates", candidates, "Default: every other dialect")->delimiter(',');
  sel->add_option("--k", k)->capture_default_str();
  sel->add_option("--top", top, "Rows printed")->capture_default_str();
  sel->add_option("--out", out_path, "TSV report");

  // toy
  auto* toy = app.add_subcommand("toy", "Write synthetic tagged sentences");
  std::size_t n_sentences = 256;
  toy->add_option("--n", n_sentences)->capture_default_str();
  toy->add_option("--out", out_path)->required();

  // transform
  auto* tr = app.add_subcommand("transform", "Build a parallel SAE / pseudo-dialect corpus");
  std::string input_path, dialect;
  tr->add_option("--features", features_path)->required();
  tr->add_option("--dialect", dialect)->required();
  tr->add_option("--in,--input", input_path, "One sentence per line, tok|TAG")->required();
  tr->add_option("--out", out_path)->required();

  // ot
  auto* otc = app.add_subcommand("ot", "Entropic OT between two point clouds");
  std::string cloud_a, cloud_b;
  ot::OTConfig ot_cfg;
  bool divergence = false;
  otc->add_option("--a", cloud_a)->required();
  otc->add_option("--b", cloud_b)->required();
  otc->add_option("--epsilon", ot_cfg.epsilon)->capture_default_str();
  otc->add_option("--max-iters", ot_cfg.max_iters)->capture_default_str();
  otc->add_flag("--divergence", divergence, "Report S_eps instead of W_eps");

  // train
  auto* trn = app.add_subcommand("train", "Train the hypernetwork on source-dialect corpora");
  std::string corpora_dir, exclude, cache_dir, init = "zero-output";
  trainer::TrainConfig train_cfg;
  encoder::EncoderConfig enc_cfg;
  std::uint64_t hypernet_seed = 0;
  trn->add_option("--features", features_path)->required();
  trn->add_option("--corpora", corpora_dir, "Directory of <dialect>.tsv parallel corpora")->required();
  trn->add_option("--exclude", exclude, "Held-out target dialect")->required();
  trn->add_option("--out", out_path, "Run directory")->required();
  trn->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  trn->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  trn->add_option("--batch-size", train_cfg.batch_size)->capture_default_str();
  trn->add_option("--eval-every", train_cfg.eval_every)->capture_default_str();
  trn->add_option("--encoder-seed", enc_cfg.seed)->capture_default_str();
  trn->add_option("--hypernet-seed", hypernet_seed)->capture_default_str();
  trn->add_option("--init", init)->check(CLI::IsMember({"zero-output", "small-uniform"}))->capture_default_str();
  trn->add_option("--cache", cache_dir, "SAE representation cache directory");

  // eval
  auto* ev = app.add_subcommand("eval", "Zero-shot evaluation on a held-out dialect");
  std::string run_dir, corpus_path;
  std::uint64_t probe_seed = 0;
  ev->add_option("--run", run_dir)->required();
  ev->add_option("--features", features_path)->required();
  ev->add_option("--target", target)->required();
  ev->add_option("--corpus", corpus_path, "Held-out parallel corpus")->required();
  ev->add_option("--probe-seed", probe_seed)->capture_default_str();
  ev->add_option("--out", out_path, "TSV report");

  // sweep
  auto* sw = app.add_subcommand("sweep", "Rank source subsets by typology and evaluate the best ones");
  std::size_t budget = 0;
  sw->add_option("--features", features_path)->required();
  sw->add_option("--target", target)->required();
  sw->add_option("--candidates", candidates)->delimiter(',');
  sw->add_option("--k", k)->capture_default_str();
  sw->add_option("--budget", budget, "Subsets trained and evaluated")->capture_default_str();
  sw->add_option("--corpora", corpora_dir);
  sw->add_option("--corpus", corpus_path, "Held-out parallel corpus");
  sw->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  sw->add_option("--out", out_path)->required();

  // bootstrap
  auto* bs = app.add_subcommand("bootstrap", "One-sided paired bootstrap test");
  std::string scores_a, scores_b;
  double alpha = 0.05;
  std::size_t resamples = 10000;
  bs->add_option("--a", scores_a, "Scores of the candidate system, one per line")->required();
  bs->add_option("--b", scores_b, "Scores of the baseline system")->required();
  bs->add_option("--alpha", alpha)->capture_default_str();
  bs->add_option("--n", resamples)->capture_default_str();
  bs->add_option("--out", out_path, "TSV report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidationExit;
  }

  try {
    if (*typ) {
      const auto table = typology::load_feature_vectors(features_path);
      if (*cov) {
        const typology::SourceSet set(features_of(table, sources));
        const auto& t = feature_of(table, target);
        std::printf("coverage\t%.6f\nl1\t%.6f\n", typology::coverage(set, t),
                    typology::mean_normalized_distance(set, t));
      } else if (*dist) {
        const auto& a = feature_of(table, a_id);
        const auto& b = feature_of(table, b_id);
        std::printf("l1\t%.6f\nl1_normalized\t%.6f\n", typology::manhattan_distance(a, b),
                    typology::normalized_manhattan_distance(a, b));
      } else if (*sel) {
        if (candidates.empty()) {
          for (const auto& [id, v] : table) {
            if (id != target) candidates.push_back(id);
          }
        }
        const auto rows = eval::sweep_sources(features_of(table, candidates), feature_of(table, target), k, 0);
        for (std::size_t i = 0; i < rows.size() && i < top; ++i) print_row(rows[i].subset);
        if (!out_path.empty()) {
          auto meta = base_meta(g, "typology select");
          meta["target"] = target;
          eval::write_sweep_report(out_path, rows, meta);
        }
      }
    } else if (*toy) {
      const auto sentences = transform::toy_sentences(n_sentences, g.seed);
      transform::save_corpus(out_path, sentences);
    } else if (*tr) {
      const auto table = typology::load_feature_vectors(features_path);
      const auto sentences = transform::load_corpus(input_path);
      auto corpus = transform::build_parallel_corpus(sentences, feature_of(table, dialect), g.seed);
      transform::save_parallel_corpus(out_path, corpus);
      const auto stats = transform::corpus_stats(corpus);
      std::printf("pairs\t%zu\npct_transformed\t%.2f\napplied_features\t%zu\n", corpus.pairs.size(),
                  stats.pct_transformed, stats.applied_feature_count);
    } else if (*otc) {
      ot_cfg.validate();
      const auto a = ot::load_cloud(cloud_a);
      const auto b = ot::load_cloud(cloud_b);
      if (divergence) {
        std::printf("s_eps\t%.12g\n", ot::sinkhorn_divergence(a, b, ot_cfg));
      } else {
        const auto r = ot::sinkhorn_w(a, b, ot_cfg);
        std::printf("w_eps\t%.12g\niterations\t%d\nconverged\t%d\nmarginal_error\t%.3g\n", r.value, r.iterations,
                    r.converged ? 1 : 0, r.marginal_error);
      }
    } else if (*trn) {
      const auto table = typology::load_feature_vectors(features_path);
      train_cfg.seed = g.seed;
      trainer::TrainInputs in;
      in.corpora = trainer::load_corpora_dir(corpora_dir, exclude);
      if (in.corpora.empty()) throw ArgumentError("no source corpora in " + corpora_dir);
      const auto stack = trainer::build_source_encoder(in.corpora, enc_cfg);
      in.stack = &stack;
      in.features = table;
      in.hypernet = hypernet::HypernetConfig::for_encoder(enc_cfg, 0);
      in.hypernet.feature_dim = 0;
      in.hypernet.seed = hypernet_seed;
      in.hypernet.init = hypernet::parse_init_scheme(init);
      in.exclude = exclude;
      if (!cache_dir.empty()) in.cache_dir = fs::path(cache_dir);
      fs::create_directories(out_path);
      in.run_dir = fs::path(out_path);
      const auto st = trainer::train(in, train_cfg);
      for (std::size_t e = 0; e < st.epoch_losses.size(); ++e) {
        std::printf("epoch %zu\tloss %.6f\n", e + 1, st.epoch_losses[e]);
      }
      std::printf("best_epoch\t%d\nbest_loss\t%.6f\n", st.best_epoch, st.best_loss);
      if (st.diverged) throw NumericError("training diverged: " + st.divergence);
    } else if (*ev) {
      const auto table = typology::load_feature_vectors(features_path);
      const auto stack = trainer::load_run_encoder(run_dir);
      const auto st = trainer::load_best(run_dir);
      const auto ot_run = ot::OTConfig::read_meta(trainer::read_run_config(run_dir));
      const auto& t = feature_of(table, target);
      const auto corpus = transform::load_parallel_corpus(corpus_path, target);
      const auto align = eval::eval_alignment(stack, st, t, corpus, ot_run);
      const auto probe = eval::eval_probe(stack, st, t, corpus, probe_seed);
      eval::EvalReport report;
      report.meta = base_meta(g, "eval");
      report.meta["run"] = run_dir;
      report.meta["probe_seed"] = std::to_string(probe_seed);
      report.records.push_back({target, align.s_eps_base, align.s_eps_adapted, probe.acc_base, probe.acc_adapted});
      std::cout << eval::summarize(report);
      if (!out_path.empty()) eval::write_eval_report(out_path, report);
    } else if (*sw) {
      const auto table = typology::load_feature_vectors(features_path);
      if (candidates.empty()) {
        for (const auto& [id, v] : table) {
          if (id != target) candidates.push_back(id);
        }
      }
      const auto cand = features_of(table, candidates);
      const auto& t = feature_of(table, target);
      std::vector<eval::SweepRow> rows;
      if (budget == 0) {
        rows = eval::sweep_sources(cand, t, k, 0);
      } else {
        if (corpora_dir.empty() || corpus_path.empty()) {
          throw ArgumentError("--budget above 0 needs --corpora and --corpus");
        }
        eval::SweepSetup setup;
        setup.corpora = trainer::load_corpora_dir(corpora_dir, target);
        const auto stack = trainer::build_source_encoder(setup.corpora, enc_cfg);
        setup.stack = &stack;
        setup.hypernet = hypernet::HypernetConfig::for_encoder(enc_cfg, 0);
        setup.hypernet.feature_dim = 0;
        train_cfg.seed = g.seed;
        setup.train = train_cfg;
        setup.target_corpus = transform::load_parallel_corpus(corpus_path, target);
        setup.probe_seed = g.seed;
        rows = eval::sweep_sources(cand, t, k, budget, &setup);
      }
      for (std::size_t i = 0; i < rows.size() && i < std::max<std::size_t>(budget, 10); ++i) print_row(rows[i].subset);
      auto meta = base_meta(g, "sweep");
      meta["target"] = target;
      meta["budget"] = std::to_string(budget);
      eval::write_sweep_report(out_path, rows, meta);
    } else if (*bs) {
      const auto a = load_scores(scores_a);
      const auto b = load_scores(scores_b);
      const auto r = eval::paired_bootstrap(a, b, alpha, resamples, g.seed);
      std::printf("observed_delta\t%.6g\np_value\t%.4f\nsignificant\t%d\n", r.observed_delta, r.p_value,
                  r.significant ? 1 : 0);
      if (!out_path.empty()) eval::write_bootstrap_report(out_path, r, base_meta(g, "bootstrap"));
    }
  } catch (const NumericError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericExit;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidationExit;
  }
  return 0;
}
