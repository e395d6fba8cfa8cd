"""Command-line entry point.

Subcommands: simulate (reduced-state and pattern tables), optimize (design
search), identify (classify a counts vector), noise-sweep (Poisson accuracy
benchmark), verify (consistency suites).  All outputs are deterministic for
a fixed config and seed.

Exit codes: 0 success, 1 configuration or runtime error, 2 bad identification
input, 3 object set not discriminable.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bank import ProbeTransform, ReferenceBank, make_bank_coplanar
from .discrimination import (
    build_library,
    estimate_pattern,
    identify,
    library_to_csv,
    noise_sweep,
    noise_sweep_to_csv,
)
from .jones import AXIS_D, AXIS_H
from .objects import ObjectSet, build_jones, parse_object_set, preset_set
from .optimize import (
    OptimizerConfig,
    design_result_to_json,
    optimize_joint,
    parse_design_document,
)
from .quantum import poincare_of_density, reduced_reference
from .verify import run_all

_DESIGN_PRESETS = ("identity", "diagonal-polarizer", "optimize")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BAD_INPUT = 2
EXIT_NON_DISCRIMINABLE = 3


@dataclass(frozen=True)
class RunConfig:
    object_set_source: str
    q: float
    design_source: str = "identity"
    grid_points: int = 180
    outputs: int = 3
    seed: int = 0
    out_dir: str = "."
    trials: int = 200
    phis: tuple[float, ...] = ()


def load_run_config(path: str) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ValueError(f"{path}: invalid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object")
    try:
        cfg = RunConfig(
            object_set_source=str(data["object_set"]),
            q=float(data["q"]),
            design_source=str(data.get("design", "identity")),
            grid_points=int(data.get("grid_points", 180)),
            outputs=int(data.get("outputs", 3)),
            seed=int(data.get("seed", 0)),
            out_dir=str(data.get("out_dir", ".")),
            trials=int(data.get("trials", 200)),
            phis=tuple(float(p) for p in data.get("phis", ())),
        )
    except KeyError as err:
        raise ValueError(f"{path}: missing required config field {err}") from err
    if not 0.0 <= cfg.q <= 1.0:
        raise ValueError(f"{path}: q = {cfg.q} outside [0, 1]")
    if cfg.seed < 0:
        raise ValueError(f"{path}: seed must be non-negative")
    for source in (cfg.object_set_source, cfg.design_source):
        if _looks_like_path(source) and not Path(source).exists():
            raise ValueError(f"{path}: referenced file does not exist: {source}")
    return cfg


def _looks_like_path(source: str) -> bool:
    return source not in ("paper-abc", "retarder-sweep") + _DESIGN_PRESETS


def resolve_object_set(cfg: RunConfig) -> ObjectSet:
    source = cfg.object_set_source
    if source == "paper-abc":
        return preset_set("paper-abc")
    if source == "retarder-sweep":
        return preset_set("retarder-sweep", cfg.phis)
    return parse_object_set(Path(source).read_text())


def preset_design(name: str, outputs: int) -> tuple[ProbeTransform, ReferenceBank]:
    bank = make_bank_coplanar(AXIS_H, 0.0, 1.0, 0.3, outputs)
    if name == "identity":
        return ProbeTransform(m1=AXIS_H, sigma1=1.0, sigma2=1.0), bank
    if name == "diagonal-polarizer":
        return ProbeTransform(m1=AXIS_D, sigma1=1.0, sigma2=0.0), bank
    raise ValueError(f"unknown design preset {name!r}")


def resolve_design(cfg: RunConfig) -> tuple[ProbeTransform, ReferenceBank]:
    if cfg.design_source == "optimize":
        raise ValueError(
            "design = 'optimize' needs the optimize subcommand; "
            "point this command at the design.json it writes"
        )
    if cfg.design_source in ("identity", "diagonal-polarizer"):
        return preset_design(cfg.design_source, cfg.outputs)
    return parse_design_document(Path(cfg.design_source).read_text())


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write(out_dir: Path, name: str, content: str) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / name
    target.write_text(content)
    return target


def _poincare_csv(oset: ObjectSet, grid_points: int, probe, q: float) -> str:
    if oset.vary_theta:
        thetas = [k * oset.theta_period / grid_points for k in range(grid_points)]
    else:
        thetas = [0.0]
    lines = ["object_name,theta_rad,p_H,p_D,p_C"]
    for spec in oset.objects:
        for theta in thetas:
            t = probe @ build_jones(spec, theta)
            rho, _ = reduced_reference(t, q)
            p = poincare_of_density(rho)
            lines.append(
                ",".join([spec.name, _fmt(theta), _fmt(p[0]), _fmt(p[1]), _fmt(p[2])])
            )
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg: RunConfig, out_dir: Path) -> int:
    oset = resolve_object_set(cfg)
    probe, bank = resolve_design(cfg)
    probe_jones = probe.jones()
    poincare = _poincare_csv(oset, cfg.grid_points, probe_jones, cfg.q)
    lib = build_library(oset, cfg.grid_points, probe_jones, bank, cfg.q)
    p1 = _write(out_dir, "poincare.csv", poincare)
    p2 = _write(out_dir, "patterns.csv", library_to_csv(lib))
    print(f"wrote {p1}")
    print(f"wrote {p2}")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, out_dir: Path) -> int:
    if cfg.design_source != "optimize":
        raise ValueError("optimize subcommand requires design = 'optimize' in the config")
    oset = resolve_object_set(cfg)
    opt_cfg = OptimizerConfig(seed=cfg.seed, final_grid_points=cfg.grid_points)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = optimize_joint(oset, cfg.q, cfg.outputs, opt_cfg)
    target = _write(out_dir, "design.json", design_result_to_json(result) + "\n")
    print(f"wrote {target}")
    print(f"margin = {_fmt(result.margin)}")
    if result.margin <= 0.0:
        print("object set is not discriminable with this configuration", file=sys.stderr)
        return EXIT_NON_DISCRIMINABLE
    return EXIT_OK


def _read_counts(path: str) -> np.ndarray:
    tokens = Path(path).read_text().split()
    if not tokens:
        raise ValueError(f"{path}: empty counts file")
    counts = []
    for tok in tokens:
        try:
            value = int(tok)
        except ValueError as err:
            raise ValueError(f"{path}: counts must be integers, got {tok!r}") from err
        if value < 0:
            raise ValueError(f"{path}: counts must be non-negative, got {value}")
        counts.append(value)
    return np.array(counts, dtype=np.int64)


def cmd_identify(cfg: RunConfig, out_dir: Path, counts_path: str) -> int:
    oset = resolve_object_set(cfg)
    probe, bank = resolve_design(cfg)
    lib = build_library(oset, cfg.grid_points, probe.jones(), bank, cfg.q)
    counts = _read_counts(counts_path)
    if len(counts) != lib.n_outputs:
        print(
            f"error: counts vector has {len(counts)} entries, design has "
            f"{lib.n_outputs} outputs",
            file=sys.stderr,
        )
        return EXIT_BAD_INPUT
    if counts.sum() == 0:
        print("error: no coincidences recorded", file=sys.stderr)
        return EXIT_BAD_INPUT
    result = identify(estimate_pattern(counts, bank), lib)
    report = {
        "command": "identify",
        "counts": [int(c) for c in counts],
        "counts_path": counts_path,
        "config": {
            "object_set": cfg.object_set_source,
            "design": cfg.design_source,
            "q": cfg.q,
            "grid_points": cfg.grid_points,
            "outputs": cfg.outputs,
        },
        "result": {
            "object_index": result.object_index,
            "object_name": result.object_name,
            "theta_hat_rad": result.theta_hat,
            "distance": result.distance,
            "margin": result.margin if math.isfinite(result.margin) else None,
        },
    }
    target = _write(out_dir, "identify_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"wrote {target}")
    print(
        f"object = {result.object_name}, theta = {result.theta_hat:.6f} rad, "
        f"distance = {result.distance:.6g}"
    )
    return EXIT_OK


def cmd_noise_sweep(cfg: RunConfig, out_dir: Path, budgets) -> int:
    oset = resolve_object_set(cfg)
    probe, bank = resolve_design(cfg)
    lib = build_library(oset, cfg.grid_points, probe.jones(), bank, cfg.q)
    rows = noise_sweep(lib, budgets, cfg.trials, cfg.seed)
    target = _write(out_dir, "noise_sweep.csv", noise_sweep_to_csv(rows))
    print(f"wrote {target}")
    for r in rows:
        print(f"budget = {r.budget}: accuracy = {r.accuracy:.4f}")
    return EXIT_OK


def cmd_verify(seed: int) -> int:
    results = run_all(seed)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: {r.detail}")
        failed += 0 if r.passed else 1
    return EXIT_OK if failed == 0 else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghostpol",
        description="Polarization ghost-discrimination simulator and design optimizer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="run configuration JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the config output directory")

    common(sub.add_parser("simulate", help="write reduced-state and pattern tables"))
    common(sub.add_parser("optimize", help="search for a discriminating design"))
    p_id = sub.add_parser("identify", help="identify an object from a counts vector")
    common(p_id)
    p_id.add_argument("--counts", required=True, help="text file of per-output counts")
    p_ns = sub.add_parser("noise-sweep", help="accuracy versus photon-pair budget")
    common(p_ns)
    p_ns.add_argument(
        "--budgets", type=int, nargs="+", required=True, help="photon-pair budgets"
    )
    p_v = sub.add_parser("verify", help="run the consistency suites")
    p_v.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args.seed)
    try:
        cfg = load_run_config(args.config)
        if args.seed is not None:
            cfg = RunConfig(**{**cfg.__dict__, "seed": args.seed})
        out_dir = Path(args.out if args.out is not None else cfg.out_dir)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "optimize":
            return cmd_optimize(cfg, out_dir)
        if args.command == "identify":
            return cmd_identify(cfg, out_dir, args.counts)
        if args.command == "noise-sweep":
            return cmd_noise_sweep(cfg, out_dir, args.budgets)
        raise AssertionError(f"unhandled command {args.command}")
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
