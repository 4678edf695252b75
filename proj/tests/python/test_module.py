# Copyright 2026 The HyperLoRA-Desk Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import math
import random

import numpy as np
import pytest

import hyperlora


def test_coverage_and_distance(features):
    sources = [features[k] for k in ("MalaE", "MaltE", "JamE", "IndSAE")]
    target = features["CollSgE"]
    assert hyperlora.coverage(sources, target) == pytest.approx(0.878, abs=0.005)
    assert hyperlora.mean_l1(sources, target) == pytest.approx(0.219, abs=0.005)


def test_select_sources_ranks_every_subset(features):
    candidates = [features[k] for k in ("MalaE", "MaltE", "JamE", "IndSAE", "CapeE")]
    rows = hyperlora.select_sources(candidates, features["CollSgE"], k=3)
    assert len(rows) == 10
    assert rows[0].pareto_rank == 0
    assert [r.pareto_rank for r in rows] == sorted(r.pareto_rank for r in rows)


def test_sinkhorn_symmetry_and_debiasing():
    rng = np.random.default_rng(3)
    a = rng.uniform(-1, 1, size=(6, 3))
    b = rng.uniform(-1, 1, size=(5, 3))
    assert abs(hyperlora.sinkhorn_w(a, b) - hyperlora.sinkhorn_w(b, a)) <= 1e-10
    assert abs(hyperlora.sinkhorn_divergence(a, a)) <= 1e-8
    assert hyperlora.sinkhorn_divergence(a, b) > 0.0
    exact = hyperlora.exact_ot(a, b)
    assert hyperlora.sinkhorn_w(a, b, epsilon=1e-3, max_iters=100000) == pytest.approx(exact, rel=0.01)


def test_non_finite_cloud_raises():
    a = np.array([[0.0, math.nan]])
    with pytest.raises(ArithmeticError):
        hyperlora.sinkhorn_w(a, a)


def test_corpus_is_deterministic(features):
    sentences = hyperlora.toy_sentences(50, seed=4)
    c1 = hyperlora.build_parallel_corpus(sentences, features["AAVE"], seed=2)
    c2 = hyperlora.build_parallel_corpus(sentences, features["AAVE"], seed=2)
    assert len(c1) == 50
    assert c1.content_hash() == c2.content_hash()
    assert 0.0 < hyperlora.pct_transformed(c1) <= 100.0


def test_paired_bootstrap_matches_resampling_contract():
    random.seed(1)
    b = [random.gauss(0.5, 0.1) for _ in range(40)]
    a = [x + 0.02 for x in b]
    r = hyperlora.paired_bootstrap(a, b, n=2000, seed=5)
    assert r.observed_delta == pytest.approx(0.02)
    assert r.p_value == 0.0
    assert r.significant
    with pytest.raises(ValueError):
        hyperlora.paired_bootstrap(a, b[:-1])


def test_train_and_zero_shot_eval(features):
    sentences = hyperlora.toy_sentences(16, seed=6)
    corpora = {
        k: hyperlora.build_parallel_corpus(sentences, features[k], seed=i)
        for i, k in enumerate(("MalaE", "JamE"))
    }
    encoder = hyperlora.build_source_encoder(corpora)
    state = hyperlora.train(encoder, corpora, features, "CollSgE", epochs=1, learning_rate=1e-3, batch_size=4)
    assert state.sources == ["JamE", "MalaE"]
    assert state.step == 8
    assert not state.diverged
    held_out = hyperlora.build_parallel_corpus(hyperlora.toy_sentences(8, seed=9), features["CollSgE"], seed=1)
    base, adapted = hyperlora.eval_alignment(encoder, state, features["CollSgE"], held_out)
    assert math.isfinite(base) and math.isfinite(adapted)
    with pytest.raises(ValueError):
        hyperlora.eval_alignment(encoder, state, features["JamE"], held_out)


def test_encoder_output_shape(features):
    sentences = hyperlora.toy_sentences(4, seed=1)
    corpora = {"MalaE": hyperlora.build_parallel_corpus(sentences, features["MalaE"])}
    encoder = hyperlora.build_source_encoder(corpora, seed=3)
    out = encoder.encode(sentences[0])
    assert out.shape == (len(sentences[0].tokens), encoder.d_model)
