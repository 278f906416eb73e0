"""Command-line entry point: experiment orchestration and report emission.

Subcommands write CSV/JSON reports into --out.  Every report echoes the
config hash and the seed, and a fixed (config, flags, seed) triple yields
byte-identical report bodies.  Exit codes: 0 success, 1 validation error,
2 model failure (e.g. restore-margin collapse or placement overflow).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import accuracy_harness, perf_model, trit_codec, yield_mc
from .config import Config, load_config
from .device_model import MarginCollapseError, restore_thresholds
from .nvsram_array import StateError, Subarray
from .weight_mapper import PlacementError, capacity_report, map_model
from .workloads import workload_from_manifest


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.exit(1, f"{self.prog}: error: {message}\n")


def _header_lines(cfg: Config, seed) -> list[str]:
    return [f"config_hash={cfg.hash}", f"seed={seed}"]


def _write(out_dir: Path, name: str, text: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    path.write_text(text)
    return path


def _require_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    cfg_seed = args.config_obj.seeds.get(args.command)
    if cfg_seed is None:
        raise ValueError(
            f"subcommand {args.command!r} is stochastic: pass --seed or set "
            f"seeds.{args.command} in the config")
    return cfg_seed


def _csv_text(header_lines: list[str], fieldnames: list[str], rows: list[dict]) -> str:
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _cmd_yield(args) -> int:
    seed = _require_seed(args)
    cfg = args.config_obj
    values = [float(v) if args.axis == "sigma" else int(v)
              for v in args.values.split(",") if v != ""]
    sweep = yield_mc.yield_sweep(
        args.axis, values, params=cfg.device,
        n=cfg.geometry.n_per_cluster, m=cfg.geometry.m_clusters,
        trials=args.trials, seed=seed)
    _write(args.out, "yield_sweep.csv", sweep.to_csv(_header_lines(cfg, seed)))
    return 0


def _cmd_mac_check(args) -> int:
    seed = _require_seed(args)
    cfg = args.config_obj
    rng = np.random.default_rng(seed)
    thresholds = restore_thresholds(cfg.device, cfg.geometry)
    sub = Subarray(cfg.subarray, cfg.geometry)
    mismatches = 0
    max_abs_diff = 0
    for _ in range(args.instances):
        plane = rng.integers(-1, 2, size=(cfg.subarray.rows, cfg.subarray.cell_cols))
        inputs = rng.integers(-128, 128, size=cfg.subarray.rows)
        sub.program_plane(0, 0, plane.astype(np.int8))
        sub.restore_plane(0, 0, cfg.device, thresholds)
        got = sub.mvm(inputs).outputs
        tpw = trit_codec.DEFAULT_WIDTH
        n_weights = cfg.subarray.cell_cols // tpw
        used = n_weights * tpw
        weights = trit_codec.decode_array(
            plane[:, :used].reshape(cfg.subarray.rows, n_weights, tpw))
        limit = trit_codec.max_value(tpw)
        want = np.clip(inputs, -limit, limit) @ weights
        diff = np.abs(got - want)
        mismatches += int(np.count_nonzero(diff))
        max_abs_diff = max(max_abs_diff, int(diff.max()))
    report = {
        "config_hash": cfg.hash, "seed": seed, "instances": args.instances,
        "mismatched_outputs": mismatches, "max_abs_diff": max_abs_diff,
        "all_equal": mismatches == 0,
    }
    _write(args.out, "mac_check.json", json.dumps(report, indent=2, sort_keys=True))
    return 0


def _cmd_map(args) -> int:
    cfg = args.config_obj
    workload = workload_from_manifest(args.model)
    cap = capacity_report(workload.layers, "TL", cfg.subarray, cfg.geometry)
    n_subarrays = args.subarrays or max(cap.subarrays_needed, 1)
    placement = map_model(workload.layers, n_subarrays, cfg.subarray,
                          cfg.geometry, duplicate=args.duplicate)
    _write(args.out, "placement.json", placement.to_json())
    rows = []
    for arch in ("TL", "SL"):
        rep = capacity_report(workload.layers, arch, cfg.subarray, cfg.geometry)
        rows.append({
            "arch": arch, "total_weights": rep.total_weights,
            "total_trits": rep.total_trits, "planes_used": rep.planes_used,
            "subarrays_needed": rep.subarrays_needed,
            "utilization": f"{rep.utilization:.6f}",
        })
    text = _csv_text(_header_lines(cfg, args.seed) + [f"model={workload.name}"],
                     list(rows[0]), rows)
    _write(args.out, "capacity.csv", text)
    return 0


def _cmd_perf(args) -> int:
    cfg = args.config_obj
    workload = workload_from_manifest(args.model)
    archs = [a.strip() for a in args.arch.split(",") if a.strip()]
    ledgers = {}
    for arch in archs:
        ledgers[arch] = perf_model.estimate_energy(
            workload, arch, cfg.energy, cfg.subarray, cfg.geometry)
    payload = {
        "config_hash": cfg.hash, "seed": args.seed, "workload": workload.name,
        "unit_note": "counts are events; unit_j and energy_j are joules",
        "ledgers": {
            arch: {
                "ops": ledger.ops,
                "total_j": ledger.total_j,
                "efficiency_ops_per_j": ledger.efficiency_ops_per_j,
                "assumptions": ledger.assumptions,
                "components": {
                    name: {"count": e.count, "unit_j": e.unit_j, "energy_j": e.energy_j}
                    for name, e in sorted(ledger.components.items())
                },
            }
            for arch, ledger in ledgers.items()
        },
    }
    if "TL" in ledgers:
        payload["efficiency_ratio_vs_TL"] = {
            arch: ledgers["TL"].efficiency_ops_per_j / ledger.efficiency_ops_per_j
            for arch, ledger in ledgers.items() if arch != "TL"
        }
    _write(args.out, "perf_ledgers.json", json.dumps(payload, indent=2, sort_keys=True))
    rows = []
    for arch, ledger in ledgers.items():
        for row in ledger.rows():
            rows.append({k: (f"{v:.6e}" if isinstance(v, float) else v)
                         for k, v in row.items()})
    text = _csv_text(_header_lines(cfg, args.seed) + [f"model={workload.name}"],
                     ["arch", "workload", "component", "count", "unit_j", "energy_j"],
                     rows)
    _write(args.out, "perf_components.csv", text)
    return 0


def default_fixture_dir() -> Path:
    return Path(resources.files("tlcim") / "data")


def _cmd_accuracy(args) -> int:
    seed = _require_seed(args)
    cfg = args.config_obj
    fixture = Path(args.fixture) if args.fixture else default_fixture_dir()
    model, x, labels = accuracy_harness.load_fixture(fixture)
    rates = [float(r) for r in args.error_rates.split(",") if r != ""]
    seeds = list(range(seed, seed + args.injection_seeds))
    rows = []
    for rate in rates:
        error = None
        if rate > 0:
            error = accuracy_harness.ErrorModel(flat_rate=rate, seed=seed)
        report = accuracy_harness.evaluate(
            model, x, labels, error=error, engine=args.engine,
            seeds=seeds if rate > 0 else (seeds[0],))
        rows.append({
            "error_rate": rate, "engine": report.engine,
            "mean_accuracy": f"{report.accuracy:.6f}",
            "seeds": len(report.per_seed_accuracy),
            "total_trit_flips": report.total_flips,
            "note": "without retraining",
        })
    text = _csv_text(_header_lines(cfg, seed) + [f"fixture={fixture}"],
                     list(rows[0]), rows)
    _write(args.out, "accuracy.csv", text)
    return 0


def _cmd_density(args) -> int:
    cfg = args.config_obj
    report = perf_model.density_report(cfg.area, cfg.geometry, cfg.subarray)
    rows = [
        {"metric": "tl_density_bits_per_um2", "value": f"{report.tl_density_bits_per_um2:.4f}"},
        {"metric": "sl_density_bits_per_um2", "value": f"{report.sl_density_bits_per_um2:.4f}"},
        {"metric": "sram_density_bits_per_um2", "value": f"{report.sram_density_bits_per_um2:.4f}"},
        {"metric": "density_ratio_tl_over_sl", "value": f"{report.density_ratio_tl_over_sl:.4f}"},
        {"metric": "tl_trits_per_cell", "value": str(report.tl_trits_per_cell)},
        {"metric": "tl_bits_per_cell", "value": f"{report.tl_bits_per_cell:.1f}"},
        {"metric": "tl_total_area_um2", "value": f"{report.tl_total_area_um2:.1f}"},
        {"metric": "sl_total_area_um2", "value": f"{report.sl_total_area_um2:.1f}"},
        {"metric": "area_saved_fraction", "value": f"{report.area_saved_fraction:.4f}"},
    ]
    text = _csv_text(_header_lines(cfg, args.seed), ["metric", "value"], rows)
    _write(args.out, "density.csv", text)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="tlcim", description=__doc__)
    parser.add_argument("--config", type=Path, default=None, help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed")
    parser.add_argument("--out", type=Path, default=Path("reports"),
                        help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("yield", help="restore-yield sweep to CSV")
    p.add_argument("--axis", choices=("n", "m", "sigma"), required=True)
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=_cmd_yield)

    p = sub.add_parser("mac-check", help="array MAC vs integer oracle")
    p.add_argument("--instances", type=int, default=100)
    p.set_defaults(func=_cmd_mac_check)

    p = sub.add_parser("map", help="place a model and report capacity")
    p.add_argument("--model", required=True, help="builtin name or manifest JSON path")
    p.add_argument("--subarrays", type=int, default=None)
    p.add_argument("--duplicate", action="store_true")
    p.set_defaults(func=_cmd_map)

    p = sub.add_parser("perf", help="energy ledgers per architecture")
    p.add_argument("--model", required=True)
    p.add_argument("--arch", default="TL,baseline1,baseline2,baseline3,baseline4")
    p.set_defaults(func=_cmd_perf)

    p = sub.add_parser("accuracy", help="fixture accuracy under trit errors")
    p.add_argument("--fixture", default=None, help="fixture directory")
    p.add_argument("--error-rates", default="0,0.01,0.05,0.1,0.3")
    p.add_argument("--injection-seeds", type=int, default=10)
    p.add_argument("--engine", choices=accuracy_harness.ENGINES,
                   default="reference_int")
    p.set_defaults(func=_cmd_accuracy)

    p = sub.add_parser("density", help="storage density and area table")
    p.set_defaults(func=_cmd_density)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_obj = load_config(args.config)
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"tlcim: validation error: {exc}", file=sys.stderr)
        return 1
    except (MarginCollapseError, PlacementError, StateError) as exc:
        print(f"tlcim: model failure: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
