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
#include "hyperlora/ot.hpp"
#include "hyperlora/trainer.hpp"
#include "hyperlora/transform.hpp"
#include "hyperlora/typology.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace hyperlora;

namespace {

ot::OTConfig ot_config(double epsilon, int max_iters) {
  ot::OTConfig cfg;
  cfg.epsilon = epsilon;
  cfg.max_iters = max_iters;
  cfg.validate();
  return cfg;
}

ot::PointCloud cloud(const Matrix& points) { return ot::PointCloud(points); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Typology-conditioned LoRA hypernetwork with Sinkhorn alignment";

  py::register_exception<Error>(m, "HyperLoraError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<typology::DialectFeatureVector>(m, "DialectFeatureVector")
      .def_property_readonly("dialect_id", &typology::DialectFeatureVector::dialect_id)
      .def_property_readonly("feature_ids", &typology::DialectFeatureVector::feature_ids)
      .def_property_readonly("rates",
                             [](const typology::DialectFeatureVector& v) {
                               return std::vector<double>(v.rates().begin(), v.rates().end());
                             })
      .def("__len__", &typology::DialectFeatureVector::size)
      .def("__repr__", [](const typology::DialectFeatureVector& v) {
        return "<DialectFeatureVector " + v.dialect_id() + " F=" + std::to_string(v.size()) + ">";
      });

  m.def("load_feature_vectors", &typology::load_feature_vectors, py::arg("path"));
  m.def(
      "coverage",
      [](const std::vector<typology::DialectFeatureVector>& sources, const typology::DialectFeatureVector& target) {
        return typology::coverage(typology::SourceSet(sources), target);
      },
      py::arg("sources"), py::arg("target"));
  m.def(
      "mean_l1",
      [](const std::vector<typology::DialectFeatureVector>& sources, const typology::DialectFeatureVector& target) {
        return typology::mean_normalized_distance(typology::SourceSet(sources), target);
      },
      py::arg("sources"), py::arg("target"));

  py::class_<typology::RankedSourceSet>(m, "RankedSourceSet")
      .def_readonly("dialect_ids", &typology::RankedSourceSet::dialect_ids)
      .def_readonly("l1", &typology::RankedSourceSet::l1)
      .def_readonly("coverage", &typology::RankedSourceSet::coverage)
      .def_readonly("pareto_rank", &typology::RankedSourceSet::pareto_rank);
  m.def(
      "select_sources",
      [](const std::vector<typology::DialectFeatureVector>& candidates, const typology::DialectFeatureVector& target,
         std::size_t k) { return typology::select_sources(candidates, target, k); },
      py::arg("candidates"), py::arg("target"), py::arg("k") = 4);

  py::class_<transform::TokenSentence>(m, "TokenSentence")
      .def(py::init<std::vector<std::string>, std::vector<std::string>>(), py::arg("tokens"),
           py::arg("tags") = std::vector<std::string>{})
      .def_readonly("tokens", &transform::TokenSentence::tokens)
      .def_readonly("tags", &transform::TokenSentence::tags)
      .def("__eq__", [](const transform::TokenSentence& a, const transform::TokenSentence& b) { return a == b; })
      .def("__str__", &transform::join_tokens);
  m.def("toy_sentences", &transform::toy_sentences, py::arg("n"), py::arg("seed") = 0);
  m.def("sentiment_label", &transform::sentiment_label, py::arg("sentence"));

  py::class_<transform::ParallelPair>(m, "ParallelPair")
      .def_readonly("sae", &transform::ParallelPair::sae)
      .def_readonly("dialect", &transform::ParallelPair::dialect)
      .def_readonly("applied_rules", &transform::ParallelPair::applied_rules);
  py::class_<transform::ParallelCorpus>(m, "ParallelCorpus")
      .def_readonly("dialect_id", &transform::ParallelCorpus::dialect_id)
      .def_readonly("seed", &transform::ParallelCorpus::seed)
      .def_readonly("pairs", &transform::ParallelCorpus::pairs)
      .def("content_hash", &transform::ParallelCorpus::content_hash)
      .def("__len__", [](const transform::ParallelCorpus& c) { return c.pairs.size(); });
  m.def(
      "build_parallel_corpus",
      [](const std::vector<transform::TokenSentence>& sentences, const typology::DialectFeatureVector& dialect,
         std::uint64_t seed) { return transform::build_parallel_corpus(sentences, dialect, seed); },
      py::arg("sentences"), py::arg("dialect"), py::arg("seed") = 0);
  m.def(
      "pct_transformed", [](const transform::ParallelCorpus& c) { return transform::corpus_stats(c).pct_transformed; },
      py::arg("corpus"));

  m.def(
      "sinkhorn_w",
      [](const Matrix& a, const Matrix& b, double epsilon, int max_iters) {
        return ot::sinkhorn_w(cloud(a), cloud(b), ot_config(epsilon, max_iters)).value;
      },
      py::arg("a"), py::arg("b"), py::arg("epsilon") = 0.05, py::arg("max_iters") = 500);
  m.def(
      "sinkhorn_divergence",
      [](const Matrix& a, const Matrix& b, double epsilon, int max_iters) {
        return ot::sinkhorn_divergence(cloud(a), cloud(b), ot_config(epsilon, max_iters));
      },
      py::arg("a"), py::arg("b"), py::arg("epsilon") = 0.05, py::arg("max_iters") = 500);
  m.def(
      "exact_ot", [](const Matrix& a, const Matrix& b) { return ot::exact_ot(cloud(a), cloud(b)); }, py::arg("a"),
      py::arg("b"));

  py::class_<encoder::EncoderStack>(m, "Encoder")
      .def_property_readonly("vocab_size", [](const encoder::EncoderStack& s) { return s.vocab.size(); })
      .def_property_readonly("d_model", [](const encoder::EncoderStack& s) { return s.config.d_model; })
      .def("fingerprint", [](const encoder::EncoderStack& s) { return s.weights->fingerprint(); })
      .def(
          "encode",
          [](const encoder::EncoderStack& s, const transform::TokenSentence& sentence) {
            return encoder::encode(s, nullptr, sentence);
          },
          py::arg("sentence"));
  m.def(
      "build_source_encoder",
      [](const std::map<std::string, transform::ParallelCorpus>& corpora, std::uint64_t seed) {
        encoder::EncoderConfig cfg;
        cfg.seed = seed;
        return trainer::build_source_encoder(corpora, cfg);
      },
      py::arg("corpora"), py::arg("seed") = 0);

  py::class_<trainer::TrainState>(m, "TrainState")
      .def_readonly("sources", &trainer::TrainState::sources)
      .def_readonly("step", &trainer::TrainState::step)
      .def_readonly("best_loss", &trainer::TrainState::best_loss)
      .def_readonly("best_epoch", &trainer::TrainState::best_epoch)
      .def_readonly("epoch_losses", &trainer::TrainState::epoch_losses)
      .def_readonly("diverged", &trainer::TrainState::diverged);
  m.def(
      "train",
      [](const encoder::EncoderStack& stack, const std::map<std::string, transform::ParallelCorpus>& corpora,
         const typology::FeatureTable& features, const std::string& exclude, int epochs, double learning_rate,
         int batch_size, std::uint64_t seed) {
        trainer::TrainInputs in;
        in.stack = &stack;
        in.corpora = corpora;
        in.features = features;
        in.hypernet = hypernet::HypernetConfig::for_encoder(stack.config, 0);
        in.exclude = exclude;
        trainer::TrainConfig cfg;
        cfg.epochs = epochs;
        cfg.learning_rate = learning_rate;
        cfg.batch_size = batch_size;
        cfg.seed = seed;
        py::gil_scoped_release release;
        return trainer::train(in, cfg);
      },
      py::arg("encoder"), py::arg("corpora"), py::arg("features"), py::arg("exclude"), py::arg("epochs") = 50,
      py::arg("learning_rate") = 3e-5, py::arg("batch_size") = 16, py::arg("seed") = 0);

  m.def(
      "eval_alignment",
      [](const encoder::EncoderStack& stack, const trainer::TrainState& state,
         const typology::DialectFeatureVector& target, const transform::ParallelCorpus& corpus, double epsilon) {
        ot::OTConfig cfg;
        cfg.epsilon = epsilon;
        py::gil_scoped_release release;
        const auto r = eval::eval_alignment(stack, state, target, corpus, cfg);
        return std::make_pair(r.s_eps_base, r.s_eps_adapted);
      },
      py::arg("encoder"), py::arg("state"), py::arg("target"), py::arg("corpus"), py::arg("epsilon") = 0.05,
      "Returns (s_eps_base, s_eps_adapted).");

  py::class_<eval::BootstrapResult>(m, "BootstrapResult")
      .def_readonly("observed_delta", &eval::BootstrapResult::observed_delta)
      .def_readonly("p_value", &eval::BootstrapResult::p_value)
      .def_readonly("n_resamples", &eval::BootstrapResult::n_resamples)
      .def_readonly("alpha", &eval::BootstrapResult::alpha)
      .def_readonly("significant", &eval::BootstrapResult::significant);
  m.def(
      "paired_bootstrap",
      [](const std::vector<double>& a, const std::vector<double>& b, double alpha, std::size_t n,
         std::uint64_t seed) { return eval::paired_bootstrap(a, b, alpha, n, seed); },
      py::arg("a"), py::arg("b"), py::arg("alpha") = 0.05, py::arg("n") = 10000, py::arg("seed") = 0);
}
