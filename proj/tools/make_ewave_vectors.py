#!/usr/bin/env python3
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
"""Regenerates data/ewave_vectors.tsv from the eWAVE export shipped with
Multi-VALUE (pip package `value-nlp`, file multivalue/resources/ewave.csv).

The feature universe is 0..max(parameter_pk), matching Multi-VALUE's
attestation_vectors.csv; feature 0 is unused and always '?'.
"""
import argparse
import csv
import sys

# Dialect ids used throughout this project; anything not listed keeps its
# eWAVE abbreviation.
RENAME = {
    "UAAVE": "AAVE",
    "MalE": "MalaE",
    "InSAfE": "IndSAE",
    "CFE": "CapeE",
    "FijiE": "FijiAE",
    "CollFijiE": "FijiBE",
    "SLkE": "SriLE",
    "NigE": "NgE",
    "AborE": "AbEng",
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("ewave_csv")
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    letters = {}
    n_features = 0
    with open(args.ewave_csv, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            fid = int(row["parameter_pk"])
            n_features = max(n_features, fid + 1)
            did = RENAME.get(row["abbr"], row["abbr"])
            letters.setdefault(did, {})[fid] = row["attestation"]

    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    out.write(f"#features={n_features}\n")
    for did in sorted(letters):
        for fid in range(n_features):
            out.write(f"{did}\t{fid}\t{letters[did].get(fid, '?')}\n")


if __name__ == "__main__":
    main()
