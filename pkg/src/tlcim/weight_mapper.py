"""Compact weight mapping: layer matrices, block tiling, even distribution
over subarrays, and band packing into (cluster, source line) planes.

A layer maps to a (C*k*k) x (M*q*2) matrix (two SRAM columns per trit).
The matrix splits into blocks of at most rows_active x sram_cols; blocks
pack into fixed-height bands of a plane, filling leftover band columns
with the widest pending block that still fits.  Planes advance source line
first, then cluster.  A layer never shares a plane with another layer.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .device_model import ClusterGeometry
from .nvsram_array import SubarrayConfig


class PlacementError(RuntimeError):
    """Raised when a block cannot be placed in the remaining capacity."""


@dataclass(frozen=True)
class LayerSpec:
    kind: str                 # "conv" or "dense"
    c: int                    # input channels (input features for dense)
    k: int                    # kernel size, 1 for dense
    m: int                    # output channels
    q: int = 5                # trits per weight
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("conv", "dense"):
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "dense" and self.k != 1:
            raise ValueError("dense layers must have k == 1")
        if min(self.c, self.k, self.m, self.q) < 1:
            raise ValueError("layer dimensions must be positive")

    @property
    def weights(self) -> int:
        return self.c * self.k * self.k * self.m


def layer_to_matrix(layer: LayerSpec) -> tuple[int, int]:
    """Matrix footprint (rows, SRAM columns) of a layer."""
    return layer.c * layer.k * layer.k, layer.m * layer.q * 2


@dataclass(frozen=True)
class Block:
    layer: str
    index: int                # row-major order within the layer
    row_start: int
    row_stop: int
    col_start: int            # SRAM-column units within the layer matrix
    col_stop: int
    replica: int = 0

    @property
    def rows(self) -> int:
        return self.row_stop - self.row_start

    @property
    def width(self) -> int:
        return self.col_stop - self.col_start


def split_blocks(matrix_dims: tuple[int, int], r: int = 16, c: int = 320,
                 layer: str = "") -> list[Block]:
    """Row-major tiling into at-most r x c blocks; edge blocks are smaller."""
    rows, cols = matrix_dims
    if rows < 1 or cols < 1:
        raise ValueError("matrix dimensions must be positive")
    blocks = []
    index = 0
    for r0 in range(0, rows, r):
        for c0 in range(0, cols, c):
            blocks.append(Block(
                layer=layer, index=index,
                row_start=r0, row_stop=min(r0 + r, rows),
                col_start=c0, col_stop=min(c0 + c, cols),
            ))
            index += 1
    return blocks


@dataclass
class DistributionResult:
    per_subarray: list[list[Block]]
    replica_count: int


def distribute(blocks: list[Block], n_subarrays: int, duplicate: bool = False,
               primary_subarrays: int | None = None,
               occupancy: list[float] | None = None,
               occupancy_threshold: float = 0.5) -> DistributionResult:
    """Round-robin blocks over subarrays; load imbalance is at most one.

    With duplicate on, subarrays that received no primary blocks and whose
    prior occupancy is under the threshold each get a whole replica of the
    layer, and the replica count is recorded.
    """
    if n_subarrays < 1:
        raise ValueError("need at least one subarray")
    primary = min(primary_subarrays or n_subarrays, n_subarrays)
    lists: list[list[Block]] = [[] for _ in range(n_subarrays)]
    for pos, block in enumerate(blocks):
        lists[pos % primary].append(block)
    replica_count = 1
    if duplicate:
        occupancy = occupancy or [0.0] * n_subarrays
        for s in range(n_subarrays):
            if lists[s] or occupancy[s] >= occupancy_threshold:
                continue
            replica_count += 1
            lists[s] = [
                Block(b.layer, b.index, b.row_start, b.row_stop,
                      b.col_start, b.col_stop, replica=replica_count - 1)
                for b in blocks
            ]
    return DistributionResult(per_subarray=lists, replica_count=replica_count)


@dataclass(frozen=True)
class PlacedBlock:
    block: Block
    subarray: int
    cluster: int
    source_line: int
    row_offset: int
    col_offset: int


@dataclass
class Placement:
    entries: list[PlacedBlock]
    n_subarrays: int
    rows: int
    sram_cols: int
    rows_active: int
    n_per_cluster: int
    m_clusters: int
    replicas: dict[str, int] = field(default_factory=dict)
    planes_used: dict[int, int] = field(default_factory=dict)

    @property
    def planes_per_subarray(self) -> int:
        return self.n_per_cluster * self.m_clusters

    @property
    def total_planes_used(self) -> int:
        return sum(self.planes_used.values())

    def occupancy_bitmaps(self) -> dict[tuple[int, int, int], np.ndarray]:
        """Per-plane (subarray, cluster, source line) boolean usage maps.

        Raises PlacementError if any slot is assigned twice.
        """
        maps: dict[tuple[int, int, int], np.ndarray] = {}
        for e in self.entries:
            key = (e.subarray, e.cluster, e.source_line)
            bitmap = maps.setdefault(key, np.zeros((self.rows, self.sram_cols), dtype=bool))
            region = bitmap[e.row_offset:e.row_offset + e.block.rows,
                            e.col_offset:e.col_offset + e.block.width]
            if region.any():
                raise PlacementError(
                    f"double assignment at subarray {e.subarray} plane "
                    f"({e.cluster}, {e.source_line}) by block "
                    f"{e.block.layer}#{e.block.index}")
            region[:] = True
        return maps

    def to_json(self) -> str:
        payload = {
            "n_subarrays": self.n_subarrays,
            "rows": self.rows,
            "sram_cols": self.sram_cols,
            "rows_active": self.rows_active,
            "n_per_cluster": self.n_per_cluster,
            "m_clusters": self.m_clusters,
            "replicas": self.replicas,
            "planes_used": {str(k): v for k, v in self.planes_used.items()},
            "entries": [
                {
                    "layer": e.block.layer,
                    "index": e.block.index,
                    "row_start": e.block.row_start,
                    "row_stop": e.block.row_stop,
                    "col_start": e.block.col_start,
                    "col_stop": e.block.col_stop,
                    "replica": e.block.replica,
                    "subarray": e.subarray,
                    "cluster": e.cluster,
                    "source_line": e.source_line,
                    "row_offset": e.row_offset,
                    "col_offset": e.col_offset,
                }
                for e in self.entries
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Placement":
        payload = json.loads(text)
        entries = [
            PlacedBlock(
                block=Block(d["layer"], d["index"], d["row_start"], d["row_stop"],
                            d["col_start"], d["col_stop"], d["replica"]),
                subarray=d["subarray"], cluster=d["cluster"],
                source_line=d["source_line"], row_offset=d["row_offset"],
                col_offset=d["col_offset"],
            )
            for d in payload["entries"]
        ]
        return cls(
            entries=entries,
            n_subarrays=payload["n_subarrays"],
            rows=payload["rows"],
            sram_cols=payload["sram_cols"],
            rows_active=payload["rows_active"],
            n_per_cluster=payload["n_per_cluster"],
            m_clusters=payload["m_clusters"],
            replicas=dict(payload["replicas"]),
            planes_used={int(k): v for k, v in payload["planes_used"].items()},
        )


class _SubarrayPacker:
    """Band packer for one subarray; planes advance source line first."""

    def __init__(self, config: SubarrayConfig, geometry: ClusterGeometry,
                 subarray: int, max_planes: int | None = None):
        self.config = config
        self.geometry = geometry
        self.subarray = subarray
        self.bands_per_plane = config.rows // config.rows_active
        self.max_planes = (geometry.m_clusters * geometry.n_per_cluster
                           if max_planes is None else max_planes)
        self.plane = -1
        self.bands_used = self.bands_per_plane  # forces a fresh plane first
        self.entries: list[PlacedBlock] = []

    @property
    def planes_used(self) -> int:
        return self.plane + 1

    def seal_plane(self) -> None:
        """Finish the current plane so the next block starts a new one."""
        self.bands_used = self.bands_per_plane

    def _open_band(self, blocking: Block) -> int:
        if self.bands_used >= self.bands_per_plane:
            if self.plane + 1 >= self.max_planes:
                raise PlacementError(
                    f"out of planes in subarray {self.subarray}: cannot place "
                    f"block {blocking.layer}#{blocking.index}")
            self.plane += 1
            self.bands_used = 0
        row_offset = self.bands_used * self.config.rows_active
        self.bands_used += 1
        return row_offset

    def _emit(self, block: Block, row_offset: int, col_offset: int) -> None:
        n = self.geometry.n_per_cluster
        self.entries.append(PlacedBlock(
            block=block, subarray=self.subarray,
            cluster=self.plane // n, source_line=self.plane % n,
            row_offset=row_offset, col_offset=col_offset,
        ))

    def pack(self, blocks: list[Block]) -> None:
        pending = list(blocks)
        while pending:
            block = pending.pop(0)
            row_offset = self._open_band(block)
            col = 0
            self._emit(block, row_offset, col)
            col += block.width
            while pending:
                rem = self.config.sram_cols - col
                fits = [b for b in pending if b.width <= rem]
                if not fits:
                    break
                best = max(fits, key=lambda b: (b.width, -b.index))
                pending.remove(best)
                self._emit(best, row_offset, col)
                col += best.width


def place(per_subarray: list[list[Block]], config: SubarrayConfig | None = None,
          geometry: ClusterGeometry | None = None,
          replicas: dict[str, int] | None = None) -> Placement:
    """Pack each subarray's block list into plane addresses.

    Consecutive blocks of the same layer pack together; a layer change
    seals the current plane so layers never share one.
    """
    config = config or SubarrayConfig()
    geometry = geometry or ClusterGeometry()
    entries: list[PlacedBlock] = []
    planes_used: dict[int, int] = {}
    for s, blocks in enumerate(per_subarray):
        packer = _SubarrayPacker(config, geometry, s)
        for group in _layer_groups(blocks):
            packer.seal_plane()
            packer.pack(group)
        entries.extend(packer.entries)
        planes_used[s] = packer.planes_used
    return Placement(
        entries=entries, n_subarrays=len(per_subarray),
        rows=config.rows, sram_cols=config.sram_cols,
        rows_active=config.rows_active,
        n_per_cluster=geometry.n_per_cluster,
        m_clusters=geometry.m_clusters,
        replicas=replicas or {},
        planes_used=planes_used,
    )


def _layer_groups(blocks: list[Block]):
    group: list[Block] = []
    for block in blocks:
        if group and (block.layer != group[-1].layer or block.replica != group[-1].replica):
            yield group
            group = []
        group.append(block)
    if group:
        yield group


def map_model(layers: list[LayerSpec], n_subarrays: int,
              config: SubarrayConfig | None = None,
              geometry: ClusterGeometry | None = None,
              duplicate: bool = False) -> Placement:
    """Distribute and place every layer of a model.

    A layer spreads over at most as many subarrays as it fills planes when
    packed alone; spreading small layers wider only multiplies the
    whole-plane rounding waste.  The target window rotates between layers
    to balance load.
    """
    config = config or SubarrayConfig()
    geometry = geometry or ClusterGeometry()
    per_subarray: list[list[Block]] = [[] for _ in range(n_subarrays)]
    replicas: dict[str, int] = {}
    start = 0
    for pos, layer in enumerate(layers):
        name = layer.name or f"layer{pos}"
        blocks = split_blocks(layer_to_matrix(layer), config.rows_active,
                              config.sram_cols, layer=name)
        primary = min(n_subarrays, planes_for_layer(layer, config))
        dist = distribute(blocks, n_subarrays, duplicate=duplicate,
                          primary_subarrays=primary)
        replicas[name] = dist.replica_count
        for s in range(n_subarrays):
            per_subarray[(start + s) % n_subarrays].extend(dist.per_subarray[s])
        start = (start + primary) % n_subarrays
    return place(per_subarray, config, geometry, replicas=replicas)


def planes_for_layer(layer: LayerSpec, config: SubarrayConfig | None = None) -> int:
    """Planes one layer consumes when packed alone (no capacity limit)."""
    config = config or SubarrayConfig()
    geometry = ClusterGeometry(n_per_cluster=1, m_clusters=1)
    blocks = split_blocks(layer_to_matrix(layer), config.rows_active,
                          config.sram_cols, layer=layer.name or "layer")
    packer = _SubarrayPacker(config, geometry, 0, max_planes=10**9)
    packer.pack(blocks)
    return packer.planes_used


# Baseline storage geometry for capacity comparisons: single-level arrays
# with a fixed number of bit planes per cell.
SL_BITS_PER_CELL = 18
SL_ROWS = 256
SL_COLS = 256
WEIGHT_BITS = 8


@dataclass
class CapacityReport:
    arch: str
    total_weights: int
    total_trits: int
    planes_used: int
    subarrays_needed: int
    utilization: float


def capacity_report(model: list[LayerSpec], arch: str,
                    config: SubarrayConfig | None = None,
                    geometry: ClusterGeometry | None = None) -> CapacityReport:
    """Subarrays needed for a model, rounding each layer to whole planes.

    TL planes are rows x cell_cols trits with m*n planes per subarray; the
    SL baseline packs 8-bit weights into 256x256-bit planes, 18 per
    subarray.
    """
    config = config or SubarrayConfig()
    geometry = geometry or ClusterGeometry()
    total_weights = sum(layer.weights for layer in model)
    total_trits = sum(layer.weights * layer.q for layer in model)
    if arch == "TL":
        planes = sum(planes_for_layer(layer, config) for layer in model)
        per_subarray = geometry.m_clusters * geometry.n_per_cluster
        plane_capacity = config.rows * config.cell_cols  # trits
    elif arch == "SL":
        plane_capacity = SL_ROWS * SL_COLS  # bits
        planes = sum(
            math.ceil(layer.weights * WEIGHT_BITS / plane_capacity) for layer in model
        )
        per_subarray = SL_BITS_PER_CELL
    else:
        raise ValueError(f"unknown capacity arch {arch!r}")
    subarrays = math.ceil(planes / per_subarray) if planes else 0
    if arch == "TL":
        used = total_trits
    else:
        used = total_weights * WEIGHT_BITS
    utilization = used / (planes * plane_capacity) if planes else 0.0
    return CapacityReport(
        arch=arch, total_weights=total_weights, total_trits=total_trits,
        planes_used=planes, subarrays_needed=subarrays, utilization=utilization,
    )
