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

import os
import subprocess

import pytest

CLI = os.environ.get("HYPERLORA_CLI")

pytestmark = pytest.mark.skipif(not CLI, reason="HYPERLORA_CLI is not set")


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True)


def test_help_exits_zero():
    assert run("--help").returncode == 0


def test_typology_coverage(data_dir):
    r = run("typology", "coverage", "--features", data_dir / "ewave_vectors.tsv", "--target", "CollSgE",
            "--sources", "MalaE", "MaltE", "JamE", "IndSAE")
    assert r.returncode == 0, r.stderr
    fields = dict(line.split("\t") for line in r.stdout.strip().splitlines())
    assert float(fields["coverage"]) == pytest.approx(0.878, abs=0.005)


def test_unknown_dialect_is_a_validation_error(data_dir):
    r = run("typology", "coverage", "--features", data_dir / "ewave_vectors.tsv", "--target", "Nowhere",
            "--sources", "MalaE")
    assert r.returncode == 2


def test_bad_arguments_exit_two():
    assert run("bootstrap").returncode == 2
    assert run("--precision", "f32", "toy", "--out", "x").returncode == 2


def test_bootstrap_report(tmp_path):
    (tmp_path / "a.txt").write_text("\n".join(str(0.6 + 0.01 * i) for i in range(30)))
    (tmp_path / "b.txt").write_text("\n".join(str(0.5 + 0.01 * i) for i in range(30)))
    out = tmp_path / "boot.tsv"
    r = run("--seed", 3, "bootstrap", "--a", tmp_path / "a.txt", "--b", tmp_path / "b.txt", "--out", out)
    assert r.returncode == 0, r.stderr
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0].split("\t")[:2] == ["observed_delta", "p_value"]
    assert float(lines[1].split("\t")[1]) == 0.0


def test_non_finite_score_exits_three(tmp_path):
    (tmp_path / "a.txt").write_text("inf\n" + "\n".join("0.5" for _ in range(10)))
    (tmp_path / "b.txt").write_text("\n".join("0.5" for _ in range(11)))
    r = run("bootstrap", "--a", tmp_path / "a.txt", "--b", tmp_path / "b.txt")
    assert r.returncode == 3


def test_toy_and_transform(tmp_path, data_dir):
    sentences = tmp_path / "toy.txt"
    assert run("toy", "--n", 20, "--out", sentences).returncode == 0
    out = tmp_path / "CollSgE.tsv"
    r = run("transform", "--features", data_dir / "ewave_vectors.tsv", "--dialect", "CollSgE",
            "--input", sentences, "--out", out)
    assert r.returncode == 0, r.stderr
    assert len(out.read_text().splitlines()) == 20
