"""Monte-Carlo restore-yield estimation across cluster size, cluster count,
and variation magnitude.

Each trial re-samples device and comparator variation for every cell of a
balanced test plane and restores it once.  Trial random streams are derived
by counter-splitting the run seed, so reports are bit-identical for a fixed
seed no matter how trials are scheduled.
"""

from __future__ import annotations

import io
import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .device_model import (
    ClusterGeometry,
    DeviceParams,
    MarginCollapseError,
    restore_thresholds,
)
from .nvsram_array import Subarray, SubarrayConfig

# Programmed-state cycle for the balanced test plane, trit values.
STATE_ORDER = (1, 0, -1)
STATE_NAMES = {1: "lrs", 0: "mrs", -1: "hrs"}

# Test-plane shape.  Cells are i.i.d. under the variation model, so this
# only sets how many cell observations each trial contributes.
MC_ROWS = 24
MC_COLS = 60


def wilson_interval(p_hat: float, trials: int, z: float = 1.959964) -> tuple[float, float]:
    """95% Wilson score interval, computed on the trial count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    denom = 1.0 + z * z / trials
    center = (p_hat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z * z / (4 * trials * trials)) / denom
    # the score interval always brackets the point estimate; keep that true
    # under float rounding
    return min(max(0.0, center - half), p_hat), max(min(1.0, center + half), p_hat)


def kendall_tau(xs, ys) -> float:
    """Kendall tau-a over paired observations (ties contribute zero)."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("length mismatch")
    if n < 2:
        return 0.0
    score = 0
    for i in range(n):
        for j in range(i + 1, n):
            score += int(np.sign((xs[j] - xs[i]) * (ys[j] - ys[i])))
    return score / (n * (n - 1) / 2)


@dataclass
class YieldReport:
    n: int
    m: int
    sigma_rel: float
    trials: int
    per_state_yield: dict[str, float]
    overall_yield: float
    wilson_ci95: tuple[float, float]
    failure_reason: str = ""

    def row(self, axis_value) -> dict:
        return {
            "axis_value": axis_value,
            "n": self.n,
            "m": self.m,
            "sigma_rel": self.sigma_rel,
            "trials": self.trials,
            "yield_lrs": self.per_state_yield.get("lrs", 0.0),
            "yield_mrs": self.per_state_yield.get("mrs", 0.0),
            "yield_hrs": self.per_state_yield.get("hrs", 0.0),
            "overall": self.overall_yield,
            "ci_lo": self.wilson_ci95[0],
            "ci_hi": self.wilson_ci95[1],
            "failure_reason": self.failure_reason,
        }


def _test_plane(rows: int, cols: int, state_mix: tuple[float, float, float] | None) -> np.ndarray:
    """Deterministic programmed plane; equal thirds unless a mix is given."""
    cells = rows * cols
    if state_mix is None:
        flat = np.array([STATE_ORDER[k % 3] for k in range(cells)], dtype=np.int8)
    else:
        mix = np.asarray(state_mix, dtype=float)
        if mix.min() < 0 or not math.isclose(mix.sum(), 1.0, rel_tol=1e-9):
            raise ValueError("state_mix must be non-negative and sum to 1")
        counts = np.floor(mix * cells).astype(int)
        while counts.sum() < cells:
            counts[int(np.argmax(mix * cells - counts))] += 1
        flat = np.concatenate([
            np.full(c, s, dtype=np.int8) for s, c in zip(STATE_ORDER, counts)
        ])
    return flat.reshape(rows, cols)


def _failure_report(n: int, m: int, params: DeviceParams, trials: int,
                    reason: str) -> YieldReport:
    return YieldReport(
        n=n, m=m, sigma_rel=params.gap_sigma_rel, trials=trials,
        per_state_yield={name: 0.0 for name in STATE_NAMES.values()},
        overall_yield=0.0, wilson_ci95=(0.0, 0.0), failure_reason=reason,
    )


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def restore_yield(n: int, m: int, params: DeviceParams | None = None,
                  trials: int = 1000, seed=0,
                  state_mix: tuple[float, float, float] | None = None,
                  t1_scale: float = 1.0, t2_scale: float = 1.0,
                  mc_rows: int = MC_ROWS, mc_cols: int = MC_COLS) -> YieldReport:
    """Fraction of cells restored correctly under variation, per state and
    overall, with a 95% Wilson interval over the trial count."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = params or DeviceParams()
    geom = ClusterGeometry(n_per_cluster=n, m_clusters=m)
    try:
        thresholds = restore_thresholds(params, geom, t1_scale, t2_scale)
    except MarginCollapseError as exc:
        return _failure_report(n, m, params, trials, str(exc))

    config = SubarrayConfig(rows=mc_rows, sram_cols=2 * mc_cols,
                            rows_active=min(16, mc_rows))
    sub = Subarray(config, geom)
    plane = _test_plane(mc_rows, mc_cols, state_mix)
    sub.program_plane(0, 0, plane)

    per_state_pop = {s: int(np.count_nonzero(plane == s)) for s in STATE_ORDER}
    correct = {s: 0 for s in STATE_ORDER}
    streams = _seed_sequence(seed).spawn(trials)
    for child in streams:
        rng = np.random.default_rng(child)
        restored, errors = sub.restore_plane(0, 0, params, thresholds, rng,
                                             variation_on=True)
        ok = ~errors
        for s in STATE_ORDER:
            correct[s] += int(np.count_nonzero(ok & (plane == s)))

    per_state = {
        STATE_NAMES[s]: (correct[s] / (per_state_pop[s] * trials) if per_state_pop[s] else 1.0)
        for s in STATE_ORDER
    }
    total_cells = plane.size * trials
    overall = sum(correct.values()) / total_cells
    return YieldReport(
        n=n, m=m, sigma_rel=params.gap_sigma_rel, trials=trials,
        per_state_yield=per_state, overall_yield=overall,
        wilson_ci95=wilson_interval(overall, trials),
    )


@dataclass
class SweepResult:
    axis: str
    values: list
    reports: list[YieldReport]
    kendall_tau: float

    def to_csv(self, header_lines: list[str] | None = None) -> str:
        buf = io.StringIO()
        for line in header_lines or []:
            buf.write(f"# {line}\n")
        buf.write(f"# kendall_tau={self.kendall_tau:.6f}\n")
        fields = ["axis_value", "n", "m", "sigma_rel", "trials", "yield_lrs",
                  "yield_mrs", "yield_hrs", "overall", "ci_lo", "ci_hi",
                  "failure_reason"]
        writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for value, report in zip(self.values, self.reports):
            writer.writerow(report.row(value))
        return buf.getvalue()


def yield_sweep(axis: str, values, params: DeviceParams | None = None,
                m: int = 4, n: int = 60, trials: int = 1000,
                seed: int = 0, **yield_kwargs) -> SweepResult:
    """One restore_yield point per axis value; axis is 'n', 'm' or 'sigma'.

    Per-point failures (margin collapse) are recorded in-row, not raised.
    """
    if axis not in ("n", "m", "sigma"):
        raise ValueError(f"unknown sweep axis {axis!r}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    params = params or DeviceParams()
    point_seeds = _seed_sequence(seed).spawn(len(values))
    reports = []
    for value, child in zip(values, point_seeds):
        point_params, point_n, point_m = params, n, m
        if axis == "n":
            point_n = int(value)
        elif axis == "m":
            point_m = int(value)
        else:
            point_params = replace(params, gap_sigma_rel=float(value))
        reports.append(restore_yield(
            point_n, point_m, point_params, trials=trials, seed=child,
            **yield_kwargs,
        ))
    tau = kendall_tau([float(v) for v in values],
                      [r.overall_yield for r in reports])
    return SweepResult(axis=axis, values=values, reports=reports, kendall_tau=tau)


def error_confusion_matrix(n: int, m: int, params: DeviceParams | None = None,
                           trials: int = 1000, seed=0,
                           mc_rows: int = MC_ROWS, mc_cols: int = MC_COLS) -> np.ndarray:
    """P(restored state | programmed state), rows/cols in (+1, 0, -1) order.

    Rows sum to 1 and the diagonal equals the per-state yield.  Raises on
    margin collapse (there is no partial answer to report).
    """
    params = params or DeviceParams()
    geom = ClusterGeometry(n_per_cluster=n, m_clusters=m)
    thresholds = restore_thresholds(params, geom)
    config = SubarrayConfig(rows=mc_rows, sram_cols=2 * mc_cols,
                            rows_active=min(16, mc_rows))
    sub = Subarray(config, geom)
    plane = _test_plane(mc_rows, mc_cols, None)
    sub.program_plane(0, 0, plane)

    index = {s: k for k, s in enumerate(STATE_ORDER)}
    counts = np.zeros((3, 3), dtype=np.int64)
    for child in _seed_sequence(seed).spawn(trials):
        rng = np.random.default_rng(child)
        restored, _ = sub.restore_plane(0, 0, params, thresholds, rng,
                                        variation_on=True)
        for prog in STATE_ORDER:
            mask = plane == prog
            for rest in STATE_ORDER:
                counts[index[prog], index[rest]] += int(
                    np.count_nonzero(restored[mask] == rest))
    return counts / counts.sum(axis=1, keepdims=True)


def confusion_to_json(matrix: np.ndarray) -> str:
    return json.dumps({
        "state_order": ["+1", "0", "-1"],
        "rows_are": "programmed",
        "matrix": np.asarray(matrix, dtype=float).tolist(),
    }, indent=2)


def confusion_from_json(text: str) -> np.ndarray:
    payload = json.loads(text)
    matrix = np.asarray(payload["matrix"], dtype=float)
    if matrix.shape != (3, 3):
        raise ValueError(f"confusion matrix must be 3x3, got {matrix.shape}")
    return matrix
