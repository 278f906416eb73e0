"""Cycle, throughput, energy, area, and density accounting for the ternary
array and the four baseline architectures.

Event-level accounting: every ledger line is a count times a unit energy.
Per row-group activation, each active column (bitline for binary coding,
compute bitline for ternary coding) discharges once and is converted once;
one shift-and-add update fires per weight output.  The column mux
serializes readout, so it stretches cycle counts but never adds events.
Weights reload once per layer per inference from their backing store
(DRAM, storage ReRAM, or the on-cell nonvolatile planes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .device_model import ClusterGeometry
from .nvsram_array import SubarrayConfig
from .weight_mapper import (
    SL_BITS_PER_CELL,
    SL_COLS,
    SL_ROWS,
    WEIGHT_BITS,
    LayerSpec,
    layer_to_matrix,
    planes_for_layer,
)


@dataclass
class EnergyParams:
    """Per-event energies, joules.

    sl_restore_energy has no published architecture-level figure; the
    default scales the ternary array-reload energy by the cell-level
    restore-energy ratio and the cell-count ratio.  reram_cim_energy is a
    calibration input for the resistive compute baseline.
    """

    sram_cim_energy: float = 0.11e-12      # J per column activation
    tl_cim_energy: float = 0.096e-12       # J per CBL activation
    tl_restore_energy: float = 75.2e-12    # J per array reload
    sl_restore_energy: float = 219e-12     # J per array reload (derived)
    encoder_energy: float = 13.1e-15       # J per 8-bit to 5-trit conversion
    adc_energy: float = 0.188e-12          # J per conversion
    shift_add_energy: float = 0.336e-12    # J per output group update
    buffer_energy: float = 0.042e-12       # J per bit moved between layers
    dram_read: float = 4.2e-12             # J per bit
    dram_delay_s: float = 1e-9
    reram_read: float = 1.63e-12           # J per bit
    reram_delay_s: float = 5e-9
    reram_cim_energy: float = 0.32e-12     # J per column activation (calibrated)

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


@dataclass
class AreaParams:
    """Cell areas (um^2) and the per-array periphery block.

    periphery_um2 covers ADCs, drivers and the shift-and-add logic of one
    array; both array styles carry the same ADC count, so the same block
    is added to each.  The default is calibrated, not measured.
    trit_bits is the bit-equivalence convention of one trit.
    """

    tl_cell_area_um2: float = 6.35
    sl_cell_area_um2: float = 2.33
    sram_cell_area_um2: float = 0.75
    periphery_um2: float = 129400.0
    trit_bits: float = 8 / 5

    def __post_init__(self):
        if min(self.tl_cell_area_um2, self.sl_cell_area_um2,
               self.sram_cell_area_um2) <= 0:
            raise ValueError("cell areas must be positive")
        if self.periphery_um2 < 0 or self.trit_bits <= 0:
            raise ValueError("periphery_um2 must be >= 0 and trit_bits > 0")


@dataclass(frozen=True)
class ArchSpec:
    """Array organization of one architecture variant."""

    name: str
    coding: str            # "BC" or "TC"
    input_units: int       # serial input digits per matrix-vector product
    rows_active: int
    cols_per_output: int   # sensed columns per weight output
    col_groups: int        # columns multiplexed onto one ADC
    reload: str            # "dram", "reram", "tl_restore", "sl_restore", "none"
    cim_field: str         # EnergyParams field for the column-activation energy


ARCHS: dict[str, ArchSpec] = {
    "baseline1": ArchSpec("baseline1", "BC", 8, 32, 8, 8, "dram", "sram_cim_energy"),
    "baseline2": ArchSpec("baseline2", "BC", 8, 32, 8, 8, "reram", "sram_cim_energy"),
    "baseline3": ArchSpec("baseline3", "BC", 8, 32, 8, 8, "none", "reram_cim_energy"),
    "baseline4": ArchSpec("baseline4", "BC", 8, 32, 8, 8, "sl_restore", "sram_cim_energy"),
    "TL": ArchSpec("TL", "TC", 5, 16, 5, 5, "tl_restore", "tl_cim_energy"),
}


def cb_count(rows_total: int, rows_active: int) -> int:
    """Compute blocks needed to cover all rows at a given activation width."""
    if rows_total < 1 or rows_active < 1:
        raise ValueError("row counts must be positive")
    return math.ceil(rows_total / rows_active)


def mvm_cycles(scheme: str, *, rows_total: int = 256,
               rows_active: int | None = None, input_bits: int = 8,
               trits: int = 5, multibit: int | None = None,
               col_groups: int | None = None, include_mux: bool = True) -> int:
    """Cycles for one full matrix-vector product.

    cycles = input units x compute blocks x column groups.  The column-mux
    factor reproduces both the published peak-throughput gap and the
    equal-throughput reduced-ADC variant; include_mux=False gives the
    bare input-units-times-blocks form for comparison.
    """
    if scheme == "BC":
        units = input_bits
        ra = 32 if rows_active is None else rows_active
        cg = 8 if col_groups is None else col_groups
    elif scheme == "TC":
        units = trits
        ra = 16 if rows_active is None else rows_active
        cg = 5 if col_groups is None else col_groups
    elif scheme == "BC_multibit":
        if not multibit or multibit < 1:
            raise ValueError("BC_multibit needs the bits-per-cycle count")
        if rows_active is None:
            raise ValueError("BC_multibit needs rows_active (ADC-range limited)")
        units = math.ceil(input_bits / multibit)
        ra = rows_active
        cg = 8 if col_groups is None else col_groups
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    cycles = units * cb_count(rows_total, ra)
    return cycles * cg if include_mux else cycles


@dataclass(frozen=True)
class ThroughputConfig:
    input_units: int
    rows_total: int
    rows_active: int
    col_groups: int
    outputs: int

    @property
    def cycles(self) -> int:
        return self.input_units * cb_count(self.rows_total, self.rows_active) * self.col_groups


BC_256x256 = ThroughputConfig(input_units=8, rows_total=256, rows_active=32,
                              col_groups=8, outputs=32)
TC_256x320 = ThroughputConfig(input_units=5, rows_total=256, rows_active=16,
                              col_groups=5, outputs=32)
TC_256x250 = ThroughputConfig(input_units=5, rows_total=256, rows_active=16,
                              col_groups=5, outputs=25)


def peak_throughput_ratio(tc: ThroughputConfig = TC_256x320,
                          bc: ThroughputConfig = BC_256x256) -> float:
    """Per-output throughput gain of the ternary array over the binary one."""
    return (bc.cycles * tc.outputs) / (tc.cycles * bc.outputs)


@dataclass
class Workload:
    """A mapped model plus how often each layer runs per inference."""

    name: str
    layers: list[LayerSpec]
    positions: list[int]

    def __post_init__(self):
        if len(self.layers) != len(self.positions):
            raise ValueError("one position count per layer required")
        if any(p < 1 for p in self.positions):
            raise ValueError("positions must be >= 1")

    @property
    def macs(self) -> int:
        return sum(l.weights * p for l, p in zip(self.layers, self.positions))

    @property
    def ops(self) -> int:
        return 2 * self.macs


@dataclass
class ComponentEntry:
    count: float
    unit_j: float

    @property
    def energy_j(self) -> float:
        return self.count * self.unit_j


@dataclass
class EnergyLedger:
    arch: str
    workload: str
    components: dict[str, ComponentEntry]
    ops: int
    assumptions: dict[str, float] = field(default_factory=dict)

    @property
    def total_j(self) -> float:
        return sum(entry.energy_j for entry in self.components.values())

    @property
    def efficiency_ops_per_j(self) -> float:
        return self.ops / self.total_j if self.total_j > 0 else math.inf

    def rows(self) -> list[dict]:
        out = []
        for name, entry in sorted(self.components.items()):
            out.append({
                "arch": self.arch, "workload": self.workload,
                "component": name, "count": entry.count,
                "unit_j": entry.unit_j, "energy_j": entry.energy_j,
            })
        return out


def _reload_counts(layers: list[LayerSpec], arch: ArchSpec,
                   config: SubarrayConfig, geometry: ClusterGeometry) -> tuple[str, float, str]:
    """(component name, count, params field) for the weight-reload source."""
    weight_bits = sum(l.weights * WEIGHT_BITS for l in layers)
    if arch.reload == "dram":
        return "off_chip", weight_bits, "dram_read"
    if arch.reload == "reram":
        return "on_chip_nvm", weight_bits, "reram_read"
    if arch.reload == "tl_restore":
        planes = sum(planes_for_layer(l, config) for l in layers)
        return "restore", planes, "tl_restore_energy"
    if arch.reload == "sl_restore":
        planes = sum(math.ceil(l.weights * WEIGHT_BITS / (SL_ROWS * SL_COLS))
                     for l in layers)
        return "restore", planes, "sl_restore_energy"
    return "restore", 0, "tl_restore_energy"


def estimate_energy(workload: Workload, arch: str,
                    params: EnergyParams | None = None,
                    config: SubarrayConfig | None = None,
                    geometry: ClusterGeometry | None = None) -> EnergyLedger:
    """Per-inference energy ledger; every component is count x unit."""
    if arch not in ARCHS:
        raise ValueError(f"unknown arch {arch!r}; choose from {sorted(ARCHS)}")
    spec = ARCHS[arch]
    params = params or EnergyParams()
    config = config or SubarrayConfig()
    geometry = geometry or ClusterGeometry()

    cim_events = 0
    adc_events = 0
    sa_events = 0
    encoder_events = 0
    buffer_bits = 0
    for layer, pos in zip(workload.layers, workload.positions):
        rows_l, _ = layer_to_matrix(layer)
        acts = spec.input_units * cb_count(rows_l, spec.rows_active) * pos
        cim_events += acts * layer.m * spec.cols_per_output
        adc_events += acts * layer.m * spec.cols_per_output
        sa_events += acts * layer.m
        if spec.coding == "TC":
            encoder_events += rows_l * pos
        buffer_bits += (rows_l + layer.m) * 8 * pos

    cim_unit = getattr(params, spec.cim_field)
    components = {
        "cim": ComponentEntry(cim_events, cim_unit),
        "adc": ComponentEntry(adc_events, params.adc_energy),
        "shift_add": ComponentEntry(sa_events, params.shift_add_energy),
        "buffer": ComponentEntry(buffer_bits, params.buffer_energy),
    }
    if encoder_events:
        components["encoder"] = ComponentEntry(encoder_events, params.encoder_energy)
    reload_name, reload_count, reload_field = _reload_counts(
        workload.layers, spec, config, geometry)
    if reload_count:
        components[reload_name] = ComponentEntry(reload_count, getattr(params, reload_field))

    assumptions = {
        "cim_unit_j": cim_unit,
        "adc_unit_j": params.adc_energy,
        "shift_add_unit_j": params.shift_add_energy,
        "buffer_unit_j": params.buffer_energy,
        "encoder_unit_j": params.encoder_energy,
        "reload_unit_j": getattr(params, reload_field),
    }
    return EnergyLedger(arch=arch, workload=workload.name,
                        components=components, ops=workload.ops,
                        assumptions=assumptions)


def workload_cycles(workload: Workload, arch: str,
                    replicas: dict[str, int] | None = None) -> dict[str, int]:
    """Per-layer cycles for one inference; replicas split a layer's work."""
    spec = ARCHS[arch]
    replicas = replicas or {}
    scheme = "TC" if spec.coding == "TC" else "BC"
    out: dict[str, int] = {}
    for pos_idx, (layer, pos) in enumerate(zip(workload.layers, workload.positions)):
        name = layer.name or f"layer{pos_idx}"
        cycles = pos * mvm_cycles(
            scheme, rows_total=layer_to_matrix(layer)[0],
            rows_active=spec.rows_active, col_groups=spec.col_groups)
        out[name] = math.ceil(cycles / replicas.get(name, 1))
    out["total"] = sum(v for k, v in out.items() if k != "total")
    return out


@dataclass
class DensityReport:
    tl_density_bits_per_um2: float
    sl_density_bits_per_um2: float
    sram_density_bits_per_um2: float
    density_ratio_tl_over_sl: float
    tl_trits_per_cell: int
    tl_bits_per_cell: float
    sl_bits_per_cell: int
    tl_subarrays: int
    sl_subarrays: int
    tl_total_area_um2: float
    sl_total_area_um2: float
    area_saved_fraction: float


def density_report(area: AreaParams | None = None,
                   geometry: ClusterGeometry | None = None,
                   config: SubarrayConfig | None = None,
                   tl_subarrays: int = 6, sl_subarrays: int = 76) -> DensityReport:
    """Storage density per cell style and the model-capacity area contrast."""
    area = area or AreaParams()
    geometry = geometry or ClusterGeometry()
    config = config or SubarrayConfig()
    trits_per_cell = geometry.m_clusters * geometry.n_per_cluster
    tl_bits = trits_per_cell * area.trit_bits
    tl_density = tl_bits / area.tl_cell_area_um2
    sl_density = SL_BITS_PER_CELL / area.sl_cell_area_um2
    sram_density = 1.0 / area.sram_cell_area_um2

    tl_array = config.rows * config.cell_cols * area.tl_cell_area_um2 + area.periphery_um2
    sl_array = SL_ROWS * SL_COLS * area.sl_cell_area_um2 + area.periphery_um2
    tl_total = tl_subarrays * tl_array
    sl_total = sl_subarrays * sl_array
    return DensityReport(
        tl_density_bits_per_um2=tl_density,
        sl_density_bits_per_um2=sl_density,
        sram_density_bits_per_um2=sram_density,
        density_ratio_tl_over_sl=tl_density / sl_density,
        tl_trits_per_cell=trits_per_cell,
        tl_bits_per_cell=tl_bits,
        sl_bits_per_cell=SL_BITS_PER_CELL,
        tl_subarrays=tl_subarrays,
        sl_subarrays=sl_subarrays,
        tl_total_area_um2=tl_total,
        sl_total_area_um2=sl_total,
        area_saved_fraction=1.0 - tl_total / sl_total,
    )
