"""Electrical model of the three-level ReRAM cell, its bidirectional
selector, and the cluster sensing path used during restore.

Resistances are ohms, voltages are volts.  Device variation is modeled as a
lognormal spread of the cell resistance whose 3-sigma/mu on the log scale
equals `gap_sigma_rel`; comparator/discharge-path mismatch is a Gaussian
offset on the log of each reference threshold (`cmos_sigma_log`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class MarginCollapseError(RuntimeError):
    """Raised when leakage squeezes two effective states past a threshold."""

    def __init__(self, message: str, lo: float, hi: float):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class ResistanceState(enum.Enum):
    LRS = 1   # stores trit +1
    MRS = 0   # stores trit 0
    HRS = -1  # stores trit -1

    @property
    def trit(self) -> int:
        return self.value

    @classmethod
    def from_trit(cls, t: int) -> "ResistanceState":
        return cls(int(t))


class SelectorState(enum.Enum):
    METALLIC = "metallic"
    INSULATING = "insulating"


def optimal_mrs(lrs: float, hrs: float) -> float:
    """Middle resistance state maximizing min(MRS/LRS, HRS/MRS).

    The objective is unimodal in MRS and the two ratios cross exactly at
    the geometric mean, so that is the unique maximizer.
    """
    if not (0 < lrs < hrs):
        raise ValueError(f"need 0 < lrs < hrs, got lrs={lrs}, hrs={hrs}")
    return math.sqrt(lrs * hrs)


@dataclass
class DeviceParams:
    """Nominal device values plus variation magnitudes."""

    lrs_ohms: float = 80e3
    hrs_ohms: float = 1e6
    mrs_ohms: float | None = None  # derived via optimal_mrs unless set
    sel_metallic_ohms: float = 40e3
    sel_insulating_ohms: float = 0.12e9
    v_imt_volts: float = 0.45
    v_mit_volts: float = 0.025
    gap_sigma_rel: float = 0.10   # 3*sigma/mu of the resistance spread
    cmos_sigma_log: float = 0.02  # per-comparison threshold offset, ln units
    off_leak_ohms: float = 10e9   # lumped leak per unselected cluster

    def __post_init__(self):
        if self.mrs_ohms is None:
            self.mrs_ohms = optimal_mrs(self.lrs_ohms, self.hrs_ohms)
        if not (0 < self.lrs_ohms < self.mrs_ohms < self.hrs_ohms):
            raise ValueError(
                "resistance states must satisfy 0 < LRS < MRS < HRS, got "
                f"{self.lrs_ohms}, {self.mrs_ohms}, {self.hrs_ohms}"
            )
        if not self.sel_metallic_ohms < self.sel_insulating_ohms:
            raise ValueError("selector metallic resistance must be below insulating")
        if not 0 < self.v_mit_volts < self.v_imt_volts:
            raise ValueError("need 0 < v_mit < v_imt")
        if self.gap_sigma_rel < 0 or self.cmos_sigma_log < 0:
            raise ValueError("variation magnitudes must be >= 0")
        if self.off_leak_ohms <= 0:
            raise ValueError("off_leak_ohms must be > 0")

    @property
    def sigma_log(self) -> float:
        """Std dev of ln(resistance); 3*sigma_log/mu == gap_sigma_rel."""
        return self.gap_sigma_rel / 3.0

    def nominal(self, state: ResistanceState) -> float:
        return {
            ResistanceState.LRS: self.lrs_ohms,
            ResistanceState.MRS: self.mrs_ohms,
            ResistanceState.HRS: self.hrs_ohms,
        }[state]


@dataclass
class ClusterGeometry:
    """n selector-ReRAM pairs per cluster, m clusters per cell."""

    n_per_cluster: int = 60
    m_clusters: int = 4

    def __post_init__(self):
        if self.n_per_cluster < 1 or self.m_clusters < 1:
            raise ValueError("cluster geometry must have n >= 1 and m >= 1")


@dataclass
class ModeSettings:
    """Rail voltages; only used for selector-activation bookkeeping."""

    v_dd: float = 0.9
    v_ddh: float = 1.5
    v_ddl: float = 0.6
    v_str: float = 0.31


@dataclass
class RestoreThresholds:
    """Resistance-domain equivalents of the three restore references.

    t1 splits LRS from MRS, t2 splits MRS from HRS.  t3 is the reference
    used after a low first bit; it defaults to t1, which pins the second
    bit to 0 on that branch and keeps the illegal (0, 1) pair unreachable.
    """

    t1_ohms: float
    t2_ohms: float
    t3_ohms: float

    def __post_init__(self):
        if not (0 < self.t1_ohms < self.t2_ohms):
            raise ValueError("need 0 < t1 < t2")
        if self.t3_ohms > self.t2_ohms:
            raise ValueError("need t3 <= t2")


def selector_state(v_across: float, previous: SelectorState,
                   params: DeviceParams | None = None) -> SelectorState:
    """Hysteretic selector: turns metallic at |v| >= v_imt, insulating at
    |v| <= v_mit, and holds its state in between."""
    params = params or DeviceParams()
    v = abs(float(v_across))
    if not math.isfinite(v):
        raise ValueError("selector voltage must be finite")
    if previous is SelectorState.INSULATING:
        return SelectorState.METALLIC if v >= params.v_imt_volts else previous
    return SelectorState.INSULATING if v <= params.v_mit_volts else previous


def sample_resistance(state: ResistanceState, params: DeviceParams,
                      rng: np.random.Generator, size=None):
    """Lognormal resistance sample(s) around the state's nominal value."""
    nominal = params.nominal(state)
    if params.sigma_log == 0.0:
        return nominal if size is None else np.full(size, nominal)
    return nominal * np.exp(rng.normal(0.0, params.sigma_log, size=size))


def sample_plane_resistance(trits: np.ndarray, params: DeviceParams,
                            rng: np.random.Generator) -> np.ndarray:
    """Per-cell resistance samples for a whole trit plane."""
    nominal = nominal_plane_resistance(trits, params)
    if params.sigma_log == 0.0:
        return nominal
    return nominal * np.exp(rng.normal(0.0, params.sigma_log, size=nominal.shape))


def nominal_plane_resistance(trits: np.ndarray, params: DeviceParams) -> np.ndarray:
    t = np.asarray(trits)
    out = np.empty(t.shape, dtype=np.float64)
    out[t == 1] = params.lrs_ohms
    out[t == 0] = params.mrs_ohms
    out[t == -1] = params.hrs_ohms
    return out


def cluster_effective_resistance(r_cell, geom: ClusterGeometry,
                                 params: DeviceParams):
    """Resistance seen by the sense path for a selected cell.

    The selected branch (metallic selector in series with the cell) is
    shunted by (n-1) insulating in-cluster branches and (m-1) lumped
    off-cluster leak branches.  Accepts scalars or arrays.
    """
    r = np.asarray(r_cell, dtype=np.float64)
    if np.any(r <= 0):
        raise ValueError("cell resistance must be > 0")
    series = params.sel_metallic_ohms + r
    leak_conductance = (
        (geom.n_per_cluster - 1) / params.sel_insulating_ohms
        + (geom.m_clusters - 1) / params.off_leak_ohms
    )
    if leak_conductance == 0.0:
        eff = series
    else:
        eff = 1.0 / (1.0 / series + leak_conductance)
    return float(eff) if np.isscalar(r_cell) else eff


def restore_thresholds(params: DeviceParams, geom: ClusterGeometry,
                       t1_scale: float = 1.0, t2_scale: float = 1.0,
                       min_margin: float = 1.001) -> RestoreThresholds:
    """Reference levels as geometric means of adjacent effective states.

    The optional scales skew the decision boundaries (e.g. widening the
    MRS window when the stored data is zero-heavy).  Thresholds depend
    only on nominal values, never on the variation knobs.

    The sensing path maps cell resistance monotonically, so leakage can
    squeeze adjacent effective states together but never reorder them;
    collapse is therefore detected as any margin ratio falling under
    min_margin (default 0.1%, below what a sense amplifier resolves).
    """
    if min_margin < 1.0:
        raise ValueError("min_margin must be >= 1")
    eff = {
        s: cluster_effective_resistance(params.nominal(s), geom, params)
        for s in ResistanceState
    }
    t1 = math.sqrt(eff[ResistanceState.LRS] * eff[ResistanceState.MRS]) * t1_scale
    t2 = math.sqrt(eff[ResistanceState.MRS] * eff[ResistanceState.HRS]) * t2_scale
    ordering = [
        (eff[ResistanceState.LRS], t1, "eff(LRS)", "t1"),
        (t1, eff[ResistanceState.MRS], "t1", "eff(MRS)"),
        (eff[ResistanceState.MRS], t2, "eff(MRS)", "t2"),
        (t2, eff[ResistanceState.HRS], "t2", "eff(HRS)"),
    ]
    for lo, hi, lo_name, hi_name in ordering:
        if not lo * min_margin < hi:
            raise MarginCollapseError(
                f"restore margin collapsed: {lo_name}={lo:.1f} ohm is not below "
                f"{hi_name}={hi:.1f} ohm by the {min_margin:.4f} margin floor",
                lo, hi,
            )
    return RestoreThresholds(t1_ohms=t1, t2_ohms=t2, t3_ohms=t1)
