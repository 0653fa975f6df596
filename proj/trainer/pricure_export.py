# Copyright 2026 The Pricure Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writers for the pricure-model/1 format and the run manifest.

Training code hands over plain nested lists (or anything iterable) of
floats; values are truncated toward zero to two decimals, matching the
C++ loader's fixed-point encoding.
"""

import argparse
import decimal
import json
import os
import random

FORMAT = "pricure-model/1"
_CENT = decimal.Decimal("0.01")


def format_hundredths(x):
    d = decimal.Decimal(repr(float(x))).quantize(_CENT, rounding=decimal.ROUND_DOWN)
    if d == 0:
        d = abs(d)
    return f"{d:.2f}"


def write_model(path, weights, biases, owner=0, note=""):
    """weights[j] is a rows x cols nested list, biases[j] has cols entries."""
    if len(weights) != len(biases) or not weights:
        raise ValueError("need one bias vector per weight matrix")
    dims = [len(weights[0])] + [len(w[0]) for w in weights]
    for j, (w, b) in enumerate(zip(weights, biases)):
        if len(w) != dims[j] or any(len(row) != dims[j + 1] for row in w):
            raise ValueError(f"layer {j + 1} shape does not chain")
        if len(b) != dims[j + 1]:
            raise ValueError(f"layer {j + 1} bias has wrong length")
    if "\n" in note:
        raise ValueError("note must be one line")
    lines = [f"format {FORMAT}", f"owner {int(owner)}", f"note {note}",
             "spec " + "-".join(str(d) for d in dims)]
    for j, (w, b) in enumerate(zip(weights, biases)):
        lines.append(f"layer {j + 1} {dims[j]} {dims[j + 1]}")
        lines.extend("w " + " ".join(format_hundredths(v) for v in row) for row in w)
        lines.append("b " + " ".join(format_hundredths(v) for v in b))
    lines.append("end")
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def write_manifest(path, model_paths, dataset, out_dir, seed, epsilon=0.05,
                   mode="vote", rounds=100, modulus=2305843009213693951, scale=100):
    """Manifest consumed by `pricure simulate` / `pricure party`."""
    manifest = {
        "format": "pricure-manifest/1",
        "seed": seed,
        "models": [os.path.relpath(p, os.path.dirname(path) or ".") for p in model_paths],
        "dataset": os.path.relpath(dataset, os.path.dirname(path) or "."),
        "output_dir": out_dir,
        "rounds": rounds,
        "session": {
            "modulus": str(modulus),
            "scale": scale,
            "privacy": {"mode": mode, "epsilon": epsilon, "sensitivity": 1.0},
        },
    }
    with open(path, "w", encoding="ascii") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


def _demo(path, seed):
    rng = random.Random(seed)
    dims = [4, 3, 2]
    weights = [[[rng.uniform(-0.5, 0.5) for _ in range(dims[j + 1])] for _ in range(dims[j])]
               for j in range(len(dims) - 1)]
    biases = [[rng.uniform(-0.1, 0.1) for _ in range(dims[j + 1])]
              for j in range(len(dims) - 1)]
    write_model(path, weights, biases, owner=1, note=f"demo export seed={seed}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    _demo(args.out, args.seed)
