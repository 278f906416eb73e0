"""Desk-scale quantized-inference pipeline with trit-error injection.

Runs a small dense network either as plain integer arithmetic
(reference_int) or through the simulated array path (simulated_array:
mapping, plane programming, nominal restore, discharge counting, ADC,
shift-and-add).  With zero injected error and an ideal ADC the two engines
produce bit-identical predictions.  Restore-error statistics enter as trit
flips on the stored weights, either at a flat rate or driven by a measured
confusion matrix; results are reported without any retraining.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import trit_codec
from .device_model import ClusterGeometry, DeviceParams, restore_thresholds
from .nvsram_array import AdcModel, StateError, Subarray, SubarrayConfig
from .weight_mapper import LayerSpec, Placement, layer_to_matrix, map_model, capacity_report

ENGINES = ("reference_int", "simulated_array")

# Row/column order of confusion matrices, and the two flip targets of each
# trit value, both indexed by (1 - trit).
_STATE_INDEX_ORDER = (1, 0, -1)
_FLIP_TARGETS = np.array([[0, -1], [1, -1], [1, 0]], dtype=np.int8)


@dataclass
class QuantLayer:
    name: str
    weight_trits: np.ndarray      # (out, in, q) int8, little-endian trits
    act_scale: float | None      # None: raw logits, no requantization

    @property
    def out_features(self) -> int:
        return self.weight_trits.shape[0]

    @property
    def in_features(self) -> int:
        return self.weight_trits.shape[1]

    @property
    def q(self) -> int:
        return self.weight_trits.shape[2]

    def int_weights(self) -> np.ndarray:
        return trit_codec.decode_array(self.weight_trits)


@dataclass
class QuantModel:
    layers: list[QuantLayer]

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_features != nxt.in_features:
                raise ValueError(
                    f"layer shapes do not chain: {prev.name} out "
                    f"{prev.out_features} vs {nxt.name} in {nxt.in_features}")
        for layer in self.layers[:-1]:
            if layer.act_scale is None or layer.act_scale <= 0:
                raise ValueError(f"hidden layer {layer.name} needs act_scale > 0")


@dataclass
class ErrorModel:
    """Weight-trit corruption: a flat flip rate or a restore confusion matrix."""

    flat_rate: float | None = None
    confusion: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if (self.flat_rate is None) == (self.confusion is None):
            raise ValueError("give exactly one of flat_rate or confusion")
        if self.flat_rate is not None and not 0.0 <= self.flat_rate <= 1.0:
            raise ValueError("flat_rate must be in [0, 1]")
        if self.confusion is not None:
            c = np.asarray(self.confusion, dtype=float)
            if c.shape != (3, 3) or np.any(c < 0) or not np.allclose(c.sum(axis=1), 1.0):
                raise ValueError("confusion must be 3x3 with rows summing to 1")
            self.confusion = c

    def describe(self) -> str:
        if self.flat_rate is not None:
            return f"flat_rate={self.flat_rate}"
        return "confusion_matrix"


def inject_trit_errors(weight_trits: np.ndarray, error: ErrorModel,
                       rng: np.random.Generator) -> tuple[np.ndarray, int]:
    """Independently resample every trit per the error model."""
    trits = np.asarray(weight_trits, dtype=np.int8)
    idx = (1 - trits.astype(np.int64))
    if error.flat_rate is not None:
        flip = rng.random(trits.shape) < error.flat_rate
        choice = rng.integers(0, 2, size=trits.shape)
        corrupted = np.where(flip, _FLIP_TARGETS[idx, choice], trits).astype(np.int8)
    else:
        cum = np.cumsum(error.confusion, axis=1)
        u = rng.random(trits.shape)
        corrupted = np.where(
            u < cum[idx, 0], 1, np.where(u < cum[idx, 1], 0, -1)).astype(np.int8)
    return corrupted, int(np.count_nonzero(corrupted != trits))


def corrupt_model(model: QuantModel, error: ErrorModel | None,
                  seed: int) -> tuple[QuantModel, int]:
    if error is None:
        return model, 0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=error.seed,
                                                       spawn_key=(seed,)))
    flips = 0
    layers = []
    for layer in model.layers:
        corrupted, n = inject_trit_errors(layer.weight_trits, error, rng)
        flips += n
        layers.append(QuantLayer(layer.name, corrupted, layer.act_scale))
    return QuantModel(layers), flips


def _truncate_inputs(x: np.ndarray, q: int) -> np.ndarray:
    limit = trit_codec.max_value(q)
    return np.clip(np.asarray(x, dtype=np.int64), -limit, limit)


def _requantize(z: np.ndarray, act_scale: float) -> np.ndarray:
    # Clamp-ReLU to unsigned 8-bit range with half-away-from-zero rounding.
    return np.clip(trit_codec.round_half_away(z / act_scale), 0, 127).astype(np.int64)


def forward_reference(model: QuantModel, x: np.ndarray) -> np.ndarray:
    """Integer forward pass; returns raw logits."""
    act = np.asarray(x, dtype=np.int64)
    for layer in model.layers:
        z = _truncate_inputs(act, layer.q) @ layer.int_weights().T
        act = z if layer.act_scale is None else _requantize(z, layer.act_scale)
    return act


class ArrayEngine:
    """Forward pass through mapped planes and the discharge/ADC path."""

    def __init__(self, model: QuantModel,
                 config: SubarrayConfig | None = None,
                 geometry: ClusterGeometry | None = None,
                 params: DeviceParams | None = None,
                 adc: AdcModel | None = None):
        self.model = model
        self.config = config or SubarrayConfig()
        self.geometry = geometry or ClusterGeometry()
        self.params = params or DeviceParams()
        self.adc = adc or AdcModel(self.config.adc_bits, saturate=not self.config.adc_ideal)

        specs = [LayerSpec(kind="dense", c=l.in_features, k=1, m=l.out_features,
                           q=l.q, name=l.name) for l in model.layers]
        needed = capacity_report(specs, "TL", self.config, self.geometry).subarrays_needed
        self.placement: Placement = map_model(specs, max(needed, 1),
                                              self.config, self.geometry)
        self._restored = self._program_and_restore()

    def _layer_cell_matrix(self, layer: QuantLayer) -> np.ndarray:
        rows, sram_cols = layer_to_matrix(
            LayerSpec(kind="dense", c=layer.in_features, k=1,
                      m=layer.out_features, q=layer.q, name=layer.name))
        cells = np.zeros((rows, sram_cols // 2), dtype=np.int8)
        # weight w, input r, trit b sits at cell column w*q + b
        for w in range(layer.out_features):
            cells[:, w * layer.q:(w + 1) * layer.q] = layer.weight_trits[w]
        return cells

    def _program_and_restore(self) -> dict[tuple[int, int, int], np.ndarray]:
        matrices = {l.name: self._layer_cell_matrix(l) for l in self.model.layers}
        plane_trits: dict[tuple[int, int, int], np.ndarray] = {}
        for e in self.placement.entries:
            if e.block.replica:
                continue
            key = (e.subarray, e.cluster, e.source_line)
            plane = plane_trits.setdefault(
                key, np.zeros((self.config.rows, self.config.cell_cols), dtype=np.int8))
            src = matrices[e.block.layer][
                e.block.row_start:e.block.row_stop,
                e.block.col_start // 2:e.block.col_stop // 2]
            plane[e.row_offset:e.row_offset + e.block.rows,
                  e.col_offset // 2:(e.col_offset + e.block.width) // 2] = src
        thresholds = restore_thresholds(self.params, self.geometry)
        restored: dict[tuple[int, int, int], np.ndarray] = {}
        arrays: dict[int, Subarray] = {}
        for (s, i, j), trits in sorted(plane_trits.items()):
            sub = arrays.setdefault(s, Subarray(self.config, self.geometry))
            sub.program_plane(i, j, trits)
            plane, errors = sub.restore_plane(i, j, self.params, thresholds)
            if errors.any():
                raise StateError("nominal restore corrupted a mapped plane")
            restored[(s, i, j)] = plane
        return restored

    def forward(self, x: np.ndarray) -> np.ndarray:
        act = np.asarray(x, dtype=np.int64)
        if act.ndim == 1:
            act = act[None, :]
        by_layer: dict[str, list] = {}
        for e in self.placement.entries:
            if not e.block.replica:
                by_layer.setdefault(e.block.layer, []).append(e)
        for layer in self.model.layers:
            q = layer.q
            pow3 = 3 ** np.arange(q, dtype=np.int64)
            x_t = trit_codec.truncate_array(_truncate_inputs(act, q), q)
            z = np.zeros((act.shape[0], layer.out_features), dtype=np.int64)
            for e in by_layer[layer.name]:
                plane = self._restored[(e.subarray, e.cluster, e.source_line)]
                rows = e.block.rows
                w_block = plane[e.row_offset:e.row_offset + rows,
                                e.col_offset // 2:(e.col_offset + e.block.width) // 2
                                ].astype(np.int64)
                x_block = x_t[:, e.block.row_start:e.block.row_stop, :]
                cell_cols = np.arange(e.block.col_start // 2, e.block.col_stop // 2)
                w_ids = cell_cols // q
                b_pow = pow3[cell_cols % q]
                contrib = np.zeros((act.shape[0], w_block.shape[1]), dtype=np.int64)
                for a in range(q):
                    dots = x_block[:, :, a] @ w_block
                    codes, _ = self.adc.convert(rows - dots)
                    contrib += pow3[a] * (rows - codes)
                np.add.at(z.T, w_ids, (contrib * b_pow).T)
            act = z if layer.act_scale is None else _requantize(z, layer.act_scale)
        return act


@dataclass
class EvalReport:
    engine: str
    accuracy: float
    per_seed_accuracy: list[float]
    error_rate: str
    trit_flips: list[int]

    @property
    def total_flips(self) -> int:
        return sum(self.trit_flips)


def predictions(model: QuantModel, x: np.ndarray, engine: str,
                config: SubarrayConfig | None = None,
                geometry: ClusterGeometry | None = None) -> np.ndarray:
    if engine == "reference_int":
        logits = forward_reference(model, x)
    elif engine == "simulated_array":
        logits = ArrayEngine(model, config, geometry).forward(x)
    else:
        raise ValueError(f"unknown engine {engine!r}; choose from {ENGINES}")
    return np.argmax(logits, axis=1)


def evaluate(model: QuantModel, x: np.ndarray, labels: np.ndarray,
             error: ErrorModel | None = None, engine: str = "reference_int",
             seeds=(0,), config: SubarrayConfig | None = None,
             geometry: ClusterGeometry | None = None) -> EvalReport:
    """Accuracy over a labeled dataset, averaged over injection seeds."""
    labels = np.asarray(labels)
    if len(labels) != len(x):
        raise ValueError("one label per sample required")
    per_seed = []
    flips = []
    for seed in seeds:
        corrupted, n = corrupt_model(model, error, seed)
        pred = predictions(corrupted, x, engine, config, geometry)
        per_seed.append(float(np.mean(pred == labels)))
        flips.append(n)
    return EvalReport(
        engine=engine,
        accuracy=float(np.mean(per_seed)),
        per_seed_accuracy=per_seed,
        error_rate=error.describe() if error else "none",
        trit_flips=flips,
    )


# Fixture I/O: JSON manifest plus flat little-endian signed-byte tensors,
# dataset as CSV with int8 features and a trailing label column.


def load_fixture(fixture_dir) -> tuple[QuantModel, np.ndarray, np.ndarray]:
    fixture_dir = Path(fixture_dir)
    manifest = json.loads((fixture_dir / "manifest.json").read_text())
    q = int(manifest.get("q", trit_codec.DEFAULT_WIDTH))
    layers = []
    for entry in manifest["layers"]:
        raw = np.fromfile(fixture_dir / entry["weights"], dtype=np.int8)
        weights8 = raw.reshape(entry["out"], entry["in"]).astype(np.int64)
        layers.append(QuantLayer(
            name=entry["name"],
            weight_trits=trit_codec.truncate_array(weights8, q),
            act_scale=entry.get("act_scale"),
        ))
    x, labels = load_dataset_csv(fixture_dir / manifest["dataset"])
    return QuantModel(layers), x, labels


def load_dataset_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    labels = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if header[-1] != "label":
            raise ValueError("dataset CSV must end with a 'label' column")
        for row in reader:
            rows.append([int(v) for v in row[:-1]])
            labels.append(int(row[-1]))
    x = np.asarray(rows, dtype=np.int64)
    if np.any(x < -128) or np.any(x > 127):
        raise ValueError("dataset features must be signed 8-bit")
    return x, np.asarray(labels, dtype=np.int64)
