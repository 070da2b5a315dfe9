"""Command-line front end: simulate | estimate | bench.

Exit codes: 0 success, 2 usage or input error, 3 acceptance failure in
a bench preset (CI gate).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .array_model import ArrayConfig, Scene, SceneError, Snapshot, synthesize_snapshot
from .bench import (
    PRESET_NAMES,
    check_acceptance,
    make_preset,
    rows_to_csv,
    rows_to_summary,
    run_preset,
)
from .solver import SolverParams, estimate

USAGE_ERROR = 2
ACCEPTANCE_ERROR = 3


class CliError(Exception):
    """Input or usage problem; maps to exit code 2."""


def _parse_params(pairs) -> SolverParams:
    """SolverParams from repeatable ``k=v`` overrides."""
    if not pairs:
        return SolverParams()
    fields = {f.name: f for f in dataclasses.fields(SolverParams)}
    kwargs = {}
    for pair in pairs:
        if "=" not in pair:
            raise CliError(f"bad --params entry {pair!r}, expected key=value")
        key, val = pair.split("=", 1)
        if key not in fields:
            raise CliError(f"unknown solver parameter {key!r}")
        ftype = fields[key].type
        try:
            if "int" in str(ftype):
                kwargs[key] = int(val)
            else:
                kwargs[key] = float(val)
        except ValueError as exc:
            raise CliError(f"bad value for {key!r}: {val!r}") from exc
    try:
        return SolverParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise CliError(str(exc)) from exc


def _load(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc


def _config_from_args(args) -> ArrayConfig:
    if getattr(args, "config", None):
        return ArrayConfig.from_json(_load(args.config))
    return ArrayConfig()


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    try:
        scene = Scene.from_json(_load(args.scene))
        scene.validate(cfg)
    except (KeyError, ValueError, SceneError, json.JSONDecodeError) as exc:
        raise CliError(f"malformed scene: {exc}") from exc
    snap = synthesize_snapshot(cfg, scene, args.seed)
    out = Path(args.out)
    out.write_text(snap.to_json() + "\n")
    truth = {"angles_deg": list(scene.angles), "snr_db": scene.snr_db,
             "noise_variance": snap.noise_variance}
    out.with_suffix(out.suffix + ".truth.json").write_text(json.dumps(truth) + "\n")
    print(f"wrote {out} ({len(snap.data)} elements, seed {args.seed})")
    return 0


def cmd_estimate(args) -> int:
    cfg = _config_from_args(args)
    try:
        snap = Snapshot.from_json(_load(args.snapshot))
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(f"malformed snapshot: {exc}") from exc
    if len(snap.data) != cfg.num_elements:
        raise CliError("snapshot length does not match the array configuration")
    params = _parse_params(args.params)
    est = estimate(cfg, snap.data, params)
    if args.out:
        Path(args.out).write_text(json.dumps(est.to_json_dict()) + "\n")
    if est.angles:
        angles = ", ".join(f"{a:+.3f}" for a in est.angles)
        print(f"{len(est.angles)} target(s): {angles} deg")
    else:
        print("0 targets")
    print(f"residual {est.residual:.4f}, {est.iterations} iterations, "
          f"{est.patch_rounds} patch round(s), {est.elapsed * 1e3:.2f} ms")
    return 0


def cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    params = _parse_params(args.params)
    try:
        spec = make_preset(args.preset, trials=args.trials, base_seed=args.seed,
                           params=params)
    except KeyError as exc:
        raise CliError(str(exc)) from exc
    rows = run_preset(cfg, spec)
    failures = check_acceptance(spec, rows)
    csv_text = rows_to_csv(rows)
    if args.out:
        out = Path(args.out)
        out.write_text(csv_text)
        summary = rows_to_summary(spec, rows, failures)
        out.with_suffix(".json").write_text(json.dumps(summary, indent=2) + "\n")
        print(f"wrote {out} and {out.with_suffix('.json')}")
    else:
        sys.stdout.write(csv_text)
    for msg in failures:
        print(f"ACCEPTANCE FAIL: {msg}", file=sys.stderr)
    return ACCEPTANCE_ERROR if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sapd",
                                 description="Single-snapshot DOA estimation toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="synthesize a snapshot from a scene file")
    sim.add_argument("--scene", required=True, help="scene JSON file")
    sim.add_argument("--out", required=True, help="output snapshot JSON path")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--config", help="array configuration JSON file")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="estimate DOAs from a snapshot file")
    est.add_argument("--snapshot", required=True, help="snapshot JSON file")
    est.add_argument("--out", help="output estimate JSON path")
    est.add_argument("--config", help="array configuration JSON file")
    est.add_argument("--params", action="append", default=[], metavar="K=V",
                     help="solver parameter override (repeatable)")
    est.set_defaults(func=cmd_estimate)

    ben = sub.add_parser("bench", help="run a benchmark preset")
    ben.add_argument("--preset", required=True, choices=PRESET_NAMES)
    ben.add_argument("--trials", type=int, default=None,
                     help="override the preset trial count")
    ben.add_argument("--seed", type=int, default=12345)
    ben.add_argument("--out", help="output CSV path (JSON summary alongside)")
    ben.add_argument("--config", help="array configuration JSON file")
    ben.add_argument("--params", action="append", default=[], metavar="K=V")
    ben.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
