#!/usr/bin/env python3
"""Regenerate the committed accuracy fixture (deterministic, no training).

Builds a separable 10-class blob dataset, a random int8 projection layer,
and a prototype-matching classifier layer computed in closed form from the
projected class means.  Writes manifest.json, fc1.bin, fc2.bin and
dataset.csv into src/tlcim/data/ and verifies the reference accuracy.

Usage: python tools/make_fixture.py [out_dir]
"""

import csv
import json
import sys
from pathlib import Path

import numpy as np

SEED = 20240801
SAMPLES_PER_CLASS = 50
CLASSES = 10
FEATURES = 64
HIDDEN = 32
TRIT_LIMIT = 121  # widest value a 5-trit word can hold


def main() -> None:
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else (
        Path(__file__).resolve().parent.parent / "src" / "tlcim" / "data")
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(SEED)

    centers = rng.integers(-70, 71, size=(CLASSES, FEATURES))
    labels = np.repeat(np.arange(CLASSES), SAMPLES_PER_CLASS)
    noise = np.rint(rng.normal(0.0, 14.0, size=(labels.size, FEATURES)))
    x = np.clip(centers[labels] + noise, -128, 127).astype(np.int64)

    w1 = rng.integers(-25, 26, size=(HIDDEN, FEATURES)).astype(np.int64)
    z1 = np.clip(x, -TRIT_LIMIT, TRIT_LIMIT) @ np.clip(w1, -TRIT_LIMIT, TRIT_LIMIT).T
    act_scale = round(float(np.percentile(np.abs(z1), 99.5)) / 127.0, 2)
    a1 = np.clip(np.rint(z1 / act_scale), 0, 127).astype(np.int64)

    prototypes = np.stack([a1[labels == c].mean(axis=0) for c in range(CLASSES)])
    centered = prototypes - prototypes.mean(axis=0)
    w2 = np.clip(np.rint(centered * (110.0 / np.abs(centered).max())),
                 -TRIT_LIMIT, TRIT_LIMIT).astype(np.int64)

    logits = a1 @ w2.T
    accuracy = float(np.mean(np.argmax(logits, axis=1) == labels))
    if accuracy < 0.8:
        raise SystemExit(f"fixture accuracy {accuracy:.3f} below the 0.8 floor")

    w1.astype(np.int8).tofile(out_dir / "fc1.bin")
    w2.astype(np.int8).tofile(out_dir / "fc2.bin")
    with open(out_dir / "dataset.csv", "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(FEATURES)] + ["label"])
        for row, label in zip(x, labels):
            writer.writerow([int(v) for v in row] + [int(label)])
    manifest = {
        "q": 5,
        "dataset": "dataset.csv",
        "generator": "tools/make_fixture.py",
        "generator_seed": SEED,
        "reference_accuracy": accuracy,
        "layers": [
            {"name": "fc1", "in": FEATURES, "out": HIDDEN,
             "weights": "fc1.bin", "act_scale": act_scale},
            {"name": "fc2", "in": HIDDEN, "out": CLASSES, "weights": "fc2.bin"},
        ],
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"fixture written to {out_dir} (reference accuracy {accuracy:.3f})")


if __name__ == "__main__":
    main()
