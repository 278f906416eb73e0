"""Reference model manifests for capacity and energy evaluations.

Layer lists carry every stored parameter tensor: convolution kernels, the
per-channel affine scale/shift pairs that follow each convolution (held as
tiny dense layers so they occupy mapped storage), and classifier weights
plus bias.  Positions count how many matrix-vector products each layer
contributes to one inference on a 32x32 input.
"""

from __future__ import annotations

import json
from pathlib import Path

from .perf_model import Workload
from .weight_mapper import LayerSpec


def _conv(name: str, c: int, k: int, m: int, q: int = 5) -> LayerSpec:
    return LayerSpec(kind="conv", c=c, k=k, m=m, q=q, name=name)


def _dense(name: str, c: int, m: int, q: int = 5) -> LayerSpec:
    return LayerSpec(kind="dense", c=c, k=1, m=m, q=q, name=name)


def resnet18_workload(q: int = 5) -> Workload:
    """Residual 18-layer classifier sized for 32x32 inputs, 10 classes."""
    layers: list[LayerSpec] = []
    positions: list[int] = []

    def add(layer: LayerSpec, pos: int) -> None:
        layers.append(layer)
        positions.append(pos)

    def add_conv_bn(name: str, c: int, k: int, m: int, pos: int) -> None:
        add(_conv(name, c, k, m, q), pos)
        add(_dense(f"{name}_affine", 2, m, q), pos)

    add_conv_bn("conv1", 3, 3, 64, 1024)
    in_ch = 64
    for stage, (out_ch, pos) in enumerate(
            [(64, 1024), (128, 256), (256, 64), (512, 16)], start=1):
        for block in (1, 2):
            prefix = f"s{stage}b{block}"
            first_in = in_ch if block == 1 else out_ch
            add_conv_bn(f"{prefix}_conv1", first_in, 3, out_ch, pos)
            add_conv_bn(f"{prefix}_conv2", out_ch, 3, out_ch, pos)
            if block == 1 and first_in != out_ch:
                add_conv_bn(f"{prefix}_down", first_in, 1, out_ch, pos)
        in_ch = out_ch
    add(_dense("fc", 512, 10, q), 1)
    add(_dense("fc_bias", 1, 10, q), 1)
    return Workload(name="resnet18", layers=layers, positions=positions)


def vgg9_workload(q: int = 5) -> Workload:
    """Six-convolution VGG-style classifier with three dense layers."""
    layers = [
        _conv("conv1", 3, 3, 32, q),
        _conv("conv2", 32, 3, 64, q),
        _conv("conv3", 64, 3, 128, q),
        _conv("conv4", 128, 3, 128, q),
        _conv("conv5", 128, 3, 256, q),
        _conv("conv6", 256, 3, 256, q),
        _dense("fc1", 4096, 512, q),
        _dense("fc2", 512, 512, q),
        _dense("fc3", 512, 10, q),
    ]
    positions = [1024, 1024, 256, 256, 64, 64, 1, 1, 1]
    return Workload(name="vgg9", layers=layers, positions=positions)


BUILTIN_WORKLOADS = {
    "resnet18": resnet18_workload,
    "vgg9": vgg9_workload,
}


def workload_to_manifest(workload: Workload) -> dict:
    return {
        "name": workload.name,
        "layers": [
            {"kind": l.kind, "c": l.c, "k": l.k, "m": l.m, "q": l.q,
             "name": l.name, "positions": p}
            for l, p in zip(workload.layers, workload.positions)
        ],
    }


def workload_from_manifest(source) -> Workload:
    """Load a workload from a builtin name, a JSON path, or a dict."""
    if isinstance(source, Workload):
        return source
    if isinstance(source, str) and source in BUILTIN_WORKLOADS:
        return BUILTIN_WORKLOADS[source]()
    if isinstance(source, (str, Path)):
        source = json.loads(Path(source).read_text())
    layers = []
    positions = []
    for entry in source["layers"]:
        entry = dict(entry)
        positions.append(int(entry.pop("positions", 1)))
        layers.append(LayerSpec(**entry))
    return Workload(name=source.get("name", "model"), layers=layers,
                    positions=positions)
