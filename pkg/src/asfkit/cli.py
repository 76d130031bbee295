"""Command-line pipeline: simulate, buildmap, evaluate.

Every command is deterministic given its inputs and seed; a manifest
with sha256 hashes of inputs and outputs is written next to the outputs,
so identical reruns produce identical manifests.  Tunables are exposed
as flags with the survey-processing defaults (60 s window, 2x MAD,
100 m grid) and may also be set through ``ASFKIT_``-prefixed
environment variables (e.g. ``ASFKIT_MAD_K=3``).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from pathlib import Path

from . import pipeline
from .mapgen import load_map, save_map
from .positioning import evaluate_routes
from .simulator import load_scenario, simulate
from .survey import load_track, write_track
from .trend import save_trend
from .variogram import variogram_report


def _env(name: str, cast, fallback):
    raw = os.environ.get(f"ASFKIT_{name}")
    if raw is None:
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise SystemExit(f"asfkit: bad ASFKIT_{name} value {raw!r}")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, command: str, params: dict,
                    inputs: list[Path], outputs: list[Path]) -> Path:
    manifest = {
        "command": command,
        "parameters": params,
        "inputs": {p.name: _sha256(p) for p in sorted(inputs)},
        "outputs": {p.name: _sha256(p) for p in sorted(outputs)},
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def _out_dir(arg: str) -> Path:
    out = Path(arg)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    cfg = load_scenario(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    out = _out_dir(args.out)

    sim = simulate(cfg)
    outputs = []
    for track in sim.tracks:
        path = out / f"{track.label}.csv"
        write_track(track, path)
        outputs.append(path)
    for tx, tmap in sim.truth_maps.items():
        path = out / f"truth_{tx}.map"
        save_map(tmap, path)
        outputs.append(path)
    _write_manifest(out, "simulate", {"seed": cfg.seed, "scenario": cfg.name},
                    [Path(args.config)], outputs)
    print(f"simulate: wrote {len(outputs)} files to {out}")
    return 0


def cmd_buildmap(args) -> int:
    cfg = load_scenario(args.config)
    if args.grid_m is not None:
        cfg = dataclasses.replace(cfg, grid_spacing_m=args.grid_m)
    track = load_track(args.track)
    out = _out_dir(args.out)

    methods = pipeline.BUILD_METHODS if args.method == "all" \
        else (args.method,)
    result = pipeline.build_maps(
        track, cfg, methods=methods,
        filter_params=pipeline.FilterParams(window_sec=args.window_sec,
                                            mad_k=args.mad_k))

    outputs = []
    for tx, mapset in result.per_tx.items():
        for method, amap in mapset.maps.items():
            path = out / f"{method}_{tx}.map"
            save_map(amap, path)
            outputs.append(path)
        path = out / f"trend_{tx}.txt"
        save_trend(mapset.trend, path)
        outputs.append(path)
        path = out / f"variogram_{tx}.txt"
        path.write_text(variogram_report(mapset.empirical, mapset.variogram),
                        encoding="utf-8")
        outputs.append(path)
    _write_manifest(out, "buildmap",
                    {"method": args.method, "window_sec": args.window_sec,
                     "mad_k": args.mad_k, "grid_m": cfg.grid_spacing_m,
                     "rejected": len(result.rejected)},
                    [Path(args.config), Path(args.track)], outputs)
    print(f"buildmap: rejected {len(result.rejected)} outlier rows; "
          f"wrote {len(outputs)} files to {out}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = load_scenario(args.config)
    maps_dir = Path(args.maps)
    map_files = sorted(maps_dir.glob("*.map"))
    if not map_files:
        raise SystemExit(f"asfkit: no .map files in {maps_dir}")
    maps_by_method: dict[str, dict] = {}
    for path in map_files:
        amap = load_map(path)
        maps_by_method.setdefault(amap.method, {})[amap.tx] = amap

    build_path = Path(args.build_track).resolve() if args.build_track else None
    tracks = []
    for arg in args.tracks:
        p = Path(arg)
        if build_path is not None and p.resolve() == build_path:
            print(f"asfkit: warning: evaluation track {p} is the map-build "
                  "track; accuracy will be optimistic", file=sys.stderr)
        tracks.append(load_track(p))

    report = evaluate_routes(tracks, cfg.transmitters, maps_by_method)

    out = _out_dir(args.out)
    epochs = out / "epochs.csv"
    epochs.write_text(report.epochs_csv(), encoding="utf-8")
    summary = out / "summary.txt"
    summary.write_text(report.summary(), encoding="utf-8")
    _write_manifest(out, "evaluate",
                    {"methods": sorted(maps_by_method)},
                    [Path(args.config), *map(Path, args.tracks), *map_files],
                    [epochs, summary])
    print(report.summary(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="asfkit",
        description="ASF map generation and TOA positioning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    sim.add_argument("--config", required=True, help="scenario file")
    sim.add_argument("--out", default=_env("OUT", str, "out"),
                     help="output directory")
    sim.add_argument("--seed", type=int, default=_env("SEED", int, None),
                     help="override the scenario seed")
    sim.set_defaults(func=cmd_simulate)

    build = sub.add_parser("buildmap", help="build ASF maps from a survey")
    build.add_argument("--track", required=True, help="survey CSV")
    build.add_argument("--config", required=True,
                       help="scenario/waterway config file")
    build.add_argument("--method", default=_env("METHOD", str, "all"),
                       choices=["all", "linear", "uk", "rk"])
    build.add_argument("--window-sec", type=float,
                       default=_env("WINDOW_SEC", float, 60.0),
                       help="MAD filter window (s)")
    build.add_argument("--mad-k", type=float,
                       default=_env("MAD_K", float, 2.0),
                       help="MAD rejection multiplier")
    build.add_argument("--grid-m", type=float,
                       default=_env("GRID_M", float, None),
                       help="grid spacing override (m)")
    build.add_argument("--out", default=_env("OUT", str, "out"))
    build.set_defaults(func=cmd_buildmap)

    ev = sub.add_parser("evaluate", help="score maps along held-out routes")
    ev.add_argument("tracks", nargs="+", help="evaluation survey CSVs")
    ev.add_argument("--config", required=True)
    ev.add_argument("--maps", required=True, help="directory of .map files")
    ev.add_argument("--build-track", default=None,
                    help="map-build track, to warn on overlap")
    ev.add_argument("--out", default=_env("OUT", str, "out"))
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"asfkit: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
