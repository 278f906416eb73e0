"""Subarray state machine: programming trit planes, two-phase restore into
the SRAM plane, and the trit-serial compute mode (discharge counting, ADC
readout, shift-and-add matrix-vector products).

A "plane" is the set of cells addressed by one (cluster, source line) pair
across the whole subarray: rows x cell columns trits.  A cell column is two
SRAM columns sharing one compute bitline.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .device_model import (
    ClusterGeometry,
    DeviceParams,
    ModeSettings,
    RestoreThresholds,
    SelectorState,
    nominal_plane_resistance,
    cluster_effective_resistance,
    sample_plane_resistance,
    selector_state,
)
from . import trit_codec


class StateError(RuntimeError):
    """Raised on use of an unprogrammed plane or a missing restore."""


@dataclass
class SubarrayConfig:
    rows: int = 256
    sram_cols: int = 320
    rows_active: int = 16
    adc_bits: int = 5
    cbls_per_adc: int = 5
    adc_ideal: bool = True

    def __post_init__(self):
        if self.sram_cols % 2 != 0:
            raise ValueError("sram_cols must be even (two SRAM columns per cell)")
        if self.rows_active < 1 or self.rows_active > self.rows:
            raise ValueError("rows_active must be in [1, rows]")
        if self.cell_cols % self.cbls_per_adc != 0:
            raise ValueError(
                f"{self.cell_cols} compute bitlines do not divide evenly over "
                f"ADCs sharing {self.cbls_per_adc} CBLs each"
            )

    @property
    def cell_cols(self) -> int:
        return self.sram_cols // 2

    @property
    def adc_count(self) -> int:
        return self.cell_cols // self.cbls_per_adc


@dataclass
class AdcModel:
    """Readout of a compute-bitline discharge count.

    Ideal mode returns the exact count.  Saturating mode clamps to the
    code range [0, levels-1]; with 16 active rows the count can reach 32,
    one past the top 5-bit code, so saturation events are reported.
    """

    adc_bits: int = 5
    saturate: bool = False

    @property
    def levels(self) -> int:
        return 2**self.adc_bits

    def convert(self, counts):
        counts = np.asarray(counts)
        if not self.saturate:
            return counts, 0
        clamped = np.clip(counts, 0, self.levels - 1)
        return clamped, int(np.count_nonzero(counts > self.levels - 1))


def discharge_count(input_trit: int, weight_trit: int) -> int:
    """Number of pull-down paths a cell fires for one input/weight trit pair.

    Equals 1 - input*weight: the differential paths cancel for a +1
    product, one path fires when either operand is 0, and both fire for a
    -1 product.
    """
    if input_trit not in trit_codec.TRIT_VALUES:
        raise ValueError(f"not a trit: {input_trit!r}")
    if weight_trit not in trit_codec.TRIT_VALUES:
        raise ValueError(f"not a trit: {weight_trit!r}")
    return 1 - input_trit * weight_trit


def cbl_cycle(inputs: Sequence[int], weights: Sequence[int], adc: AdcModel,
              rows_active: int = 16) -> tuple[int, int]:
    """One compute-bitline cycle over a group of activated rows.

    Returns (adc_code, partial_mac) where partial_mac = r - adc_code
    recovers the trit dot product when the ADC is ideal.
    """
    if len(inputs) != len(weights):
        raise ValueError(f"length mismatch: {len(inputs)} inputs, {len(weights)} weights")
    if len(inputs) > rows_active:
        raise ValueError(f"{len(inputs)} rows exceeds rows_active={rows_active}")
    total = sum(discharge_count(i, w) for i, w in zip(inputs, weights))
    code, _ = adc.convert(total)
    return int(code), len(inputs) - int(code)


@dataclass
class LeakReport:
    """Static-current bookkeeping for the unselected branches."""

    unselected_branches: int
    off_cluster_branches: int
    leak_bound_amps: float
    selected_branch_volts: float
    unselected_nominal_volts: float
    unselected_transient_volts: float
    dc_free: bool


def static_leak_report(params: DeviceParams, geom: ClusterGeometry,
                       mode: ModeSettings | None = None) -> LeakReport:
    """Worst-case static current through insulating branches.

    Unselected source lines sit at V_DDL, matching the shared access node,
    so the nominal across-device voltage is ~0 V; the worst transient seen
    during restore is |V_DD - V_DDL|.  Both must stay under the selector
    turn-on voltage for the selection scheme to be DC-free.  The current
    bound conservatively assumes the full V_DDL across every branch.
    """
    mode = mode or ModeSettings()
    n_unsel = geom.n_per_cluster * geom.m_clusters - 1
    n_off = geom.m_clusters - 1
    bound = (
        n_unsel * mode.v_ddl / params.sel_insulating_ohms
        + n_off * mode.v_ddl / params.off_leak_ohms
    )
    v_nominal = 0.0
    v_transient = abs(mode.v_dd - mode.v_ddl)
    dc_free = (
        selector_state(v_nominal, SelectorState.INSULATING, params) is SelectorState.INSULATING
        and selector_state(v_transient, SelectorState.INSULATING, params) is SelectorState.INSULATING
        and selector_state(mode.v_dd, SelectorState.INSULATING, params) is SelectorState.METALLIC
    )
    return LeakReport(
        unselected_branches=n_unsel,
        off_cluster_branches=n_off,
        leak_bound_amps=bound,
        selected_branch_volts=mode.v_dd,
        unselected_nominal_volts=v_nominal,
        unselected_transient_volts=v_transient,
        dc_free=dc_free,
    )


@dataclass
class MvmResult:
    outputs: np.ndarray          # one integer per weight column
    adc_saturations: int = 0


class Subarray:
    """One subarray: the programmed trit tensor plus its restored SRAM plane.

    programmed is indexed (row, cell_col, cluster, source_line) with int8
    trits; unprogrammed planes read as zero but are tracked separately.
    """

    def __init__(self, config: SubarrayConfig | None = None,
                 geometry: ClusterGeometry | None = None):
        self.config = config or SubarrayConfig()
        self.geometry = geometry or ClusterGeometry()
        shape = (
            self.config.rows,
            self.config.cell_cols,
            self.geometry.m_clusters,
            self.geometry.n_per_cluster,
        )
        self.programmed = np.zeros(shape, dtype=np.int8)
        self.programmed_mask = np.zeros(shape[2:], dtype=bool)
        self.restored_plane: np.ndarray | None = None
        self.restored_address: tuple[int, int] | None = None

    def _check_address(self, i: int, j: int) -> None:
        if not (0 <= i < self.geometry.m_clusters):
            raise IndexError(f"cluster index {i} out of range")
        if not (0 <= j < self.geometry.n_per_cluster):
            raise IndexError(f"source-line index {j} out of range")

    def program_plane(self, i: int, j: int, trits: np.ndarray) -> None:
        """Overwrite plane (i, j) wholesale; a reset precedes the set, so
        re-programming never depends on the previous contents."""
        self._check_address(i, j)
        plane = np.asarray(trits, dtype=np.int8)
        want = (self.config.rows, self.config.cell_cols)
        if plane.shape != want:
            raise ValueError(f"plane shape {plane.shape} != {want}")
        if not np.isin(plane, (-1, 0, 1)).all():
            raise ValueError("plane contains non-trit values")
        self.programmed[:, :, i, j] = plane
        self.programmed_mask[i, j] = True

    def restore_plane(self, i: int, j: int, params: DeviceParams,
                      thresholds: RestoreThresholds,
                      rng: np.random.Generator | None = None,
                      variation_on: bool = False):
        """Classify plane (i, j) back into the SRAM plane.

        The first bit compares the effective sensed resistance against t1;
        a high first bit then compares against t2.  After a low first bit
        the second race runs against the same reference level and always
        resolves low, so the illegal (0, 1) pair cannot occur.  Returns
        (restored trit matrix, error mask vs programmed).
        """
        self._check_address(i, j)
        if not self.programmed_mask[i, j]:
            raise StateError(f"plane ({i}, {j}) was never programmed")
        if variation_on and rng is None:
            raise ValueError("variation_on requires an rng")
        plane = self.programmed[:, :, i, j]
        if variation_on:
            r_cell = sample_plane_resistance(plane, params, rng)
        else:
            r_cell = nominal_plane_resistance(plane, params)
        r_eff = cluster_effective_resistance(r_cell, self.geometry, params)
        if variation_on and params.cmos_sigma_log > 0:
            eps1 = rng.normal(0.0, params.cmos_sigma_log, size=plane.shape)
            eps2 = rng.normal(0.0, params.cmos_sigma_log, size=plane.shape)
        else:
            eps1 = eps2 = 0.0
        q1 = r_eff > thresholds.t1_ohms * np.exp(eps1)
        q2 = q1 & (r_eff > thresholds.t2_ohms * np.exp(eps2))
        restored = np.where(q1, np.where(q2, -1, 0), 1).astype(np.int8)
        self.restored_plane = restored
        self.restored_address = (i, j)
        return restored, restored != plane

    def load_restored(self, trits: np.ndarray) -> None:
        """Place externally prepared trits in the SRAM plane (test hook and
        direct-compute path; bypasses the ReRAM model)."""
        plane = np.asarray(trits, dtype=np.int8)
        want = (self.config.rows, self.config.cell_cols)
        if plane.shape != want:
            raise ValueError(f"plane shape {plane.shape} != {want}")
        self.restored_plane = plane
        self.restored_address = None

    def mvm(self, input_vector: Sequence[int], adc: AdcModel | None = None,
            trits_per_weight: int = trit_codec.DEFAULT_WIDTH) -> MvmResult:
        """Trit-serial matrix-vector product against the restored plane.

        Inputs are signed 8-bit, truncated to trit words like the weights.
        With an ideal ADC the outputs equal the integer matrix-vector
        product of the truncated operands exactly.
        """
        if self.restored_plane is None:
            raise StateError("no plane restored; run restore_plane first")
        cfg = self.config
        if adc is None:
            adc = AdcModel(cfg.adc_bits, saturate=not cfg.adc_ideal)
        x = np.asarray(input_vector, dtype=np.int64)
        if x.shape != (cfg.rows,):
            raise ValueError(f"input vector must have length {cfg.rows}")
        in_trits = trit_codec.truncate_array(x, trits_per_weight)
        weights = self.restored_plane.astype(np.int64)
        n_weights = cfg.cell_cols // trits_per_weight
        used = n_weights * trits_per_weight
        pow3 = 3 ** np.arange(trits_per_weight, dtype=np.int64)

        saturations = 0
        outputs = np.zeros(n_weights, dtype=np.int64)
        for a in range(trits_per_weight):
            xa = in_trits[:, a].astype(np.int64)
            col_acc = np.zeros(cfg.cell_cols, dtype=np.int64)
            for g0 in range(0, cfg.rows, cfg.rows_active):
                rows = slice(g0, min(g0 + cfg.rows_active, cfg.rows))
                glen = rows.stop - rows.start
                dots = xa[rows] @ weights[rows]
                counts = glen - dots
                codes, sat = adc.convert(counts)
                saturations += sat
                col_acc += glen - codes
            outputs += pow3[a] * (col_acc[:used].reshape(n_weights, trits_per_weight) @ pow3)
        return MvmResult(outputs=outputs, adc_saturations=saturations)

    # JSON dump/load: one signed byte per trit (auditable), base64-wrapped.

    def dump(self) -> str:
        payload = {
            "config": self.config.__dict__,
            "geometry": self.geometry.__dict__,
            "layout": "(row, cell_col, cluster, source_line) C-order, int8 trits",
            "trit_order": "little-endian, index k weighs 3**k",
            "programmed_b64": base64.b64encode(self.programmed.tobytes()).decode("ascii"),
            "programmed_planes": [
                [int(i), int(j)] for i, j in zip(*np.nonzero(self.programmed_mask))
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def load(cls, text: str) -> "Subarray":
        payload = json.loads(text)
        sub = cls(SubarrayConfig(**payload["config"]), ClusterGeometry(**payload["geometry"]))
        raw = base64.b64decode(payload["programmed_b64"])
        tensor = np.frombuffer(raw, dtype=np.int8).reshape(sub.programmed.shape)
        sub.programmed = tensor.copy()
        for i, j in payload["programmed_planes"]:
            sub.programmed_mask[i, j] = True
        return sub
