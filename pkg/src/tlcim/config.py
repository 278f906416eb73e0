"""JSON configuration loading with strict key validation.

The config file has up to six sections: device, geometry, subarray,
energy, area, seeds.  Unknown section names or unknown keys inside a
section are rejected.  Resistances are ohms, voltages volts, energies
joules, areas um^2.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .device_model import ClusterGeometry, DeviceParams
from .nvsram_array import SubarrayConfig
from .perf_model import AreaParams, EnergyParams

_SECTIONS = {
    "device": DeviceParams,
    "geometry": ClusterGeometry,
    "subarray": SubarrayConfig,
    "energy": EnergyParams,
    "area": AreaParams,
}


@dataclass
class Config:
    device: DeviceParams = field(default_factory=DeviceParams)
    geometry: ClusterGeometry = field(default_factory=ClusterGeometry)
    subarray: SubarrayConfig = field(default_factory=SubarrayConfig)
    energy: EnergyParams = field(default_factory=EnergyParams)
    area: AreaParams = field(default_factory=AreaParams)
    seeds: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}
        out["seeds"] = dict(self.seeds)
        return out

    @property
    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]


def _build_section(cls, payload: dict, section: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - allowed
    if unknown:
        raise ValueError(
            f"unknown keys in config section {section!r}: {sorted(unknown)}; "
            f"allowed: {sorted(allowed)}")
    return cls(**payload)


def load_config(path=None) -> Config:
    """Load a config file; a missing path gives all defaults."""
    if path is None:
        return Config()
    payload = json.loads(Path(path).read_text())
    if not isinstance(payload, dict):
        raise ValueError("config file must hold a JSON object")
    unknown = set(payload) - set(_SECTIONS) - {"seeds"}
    if unknown:
        raise ValueError(f"unknown config sections: {sorted(unknown)}")
    kwargs = {
        name: _build_section(cls, payload.get(name, {}), name)
        for name, cls in _SECTIONS.items()
    }
    seeds = payload.get("seeds", {})
    if not isinstance(seeds, dict) or not all(
            isinstance(v, int) for v in seeds.values()):
        raise ValueError("config section 'seeds' must map names to integers")
    return Config(seeds=dict(seeds), **kwargs)
