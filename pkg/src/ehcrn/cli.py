"""Command-line experiment runner.

    ehcrn --preset ce_vs_greedy_eh --seed 0-19 --out results/
    ehcrn --preset validate_mc --seed 1 --frames 100000 --set delta=0.005
    ehcrn --dump-config

Each run writes ``<preset>.csv`` (aggregate over seeds), ``<preset>_runs.csv``
(one row per seed and grid point) and ``<preset>_manifest.json`` with the
resolved configuration, seeds and tool version. Nothing is written unless the
whole preset succeeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from typing import List, Optional, Sequence

from . import __version__
from .config import Config, ConfigError, load_config, parse_override
from .experiments import PRESETS, ExperimentResult, GuardError, preset_config, run_experiment

EXIT_CONFIG = 2
EXIT_GUARD = 3


def parse_seeds(items: Sequence[str]) -> List[int]:
    """Expand ``["3", "0-2"]`` into ``[3, 0, 1, 2]`` (duplicates dropped, order kept)."""
    seeds: List[int] = []
    for item in items:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part[1:]:
                lo, hi = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ValueError(f"empty seed range {part!r}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    return list(dict.fromkeys(seeds))


def _format(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def table_csv(rows, columns) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_format(r[c]) for c in columns])
    return out.getvalue()


def manifest(result: ExperimentResult, files: Sequence[str]) -> dict:
    cfg = result.config
    return {
        "tool": "ehcrn",
        "version": __version__,
        "preset": result.preset,
        "seeds": result.seeds,
        "frames": result.frames,
        "config": cfg.to_dict(),
        "ce": {"Z": cfg.Z, "rho": cfg.rho, "i_max": cfg.i_max, "epsilon": cfg.epsilon,
               "beta": cfg.beta, "representation": cfg.ce_representation},
        "files": list(files),
    }


def write_outputs(result: ExperimentResult, out_dir: str) -> List[str]:
    name = result.preset
    bodies = {
        f"{name}.csv": table_csv(result.aggregate, result.columns),
        f"{name}_runs.csv": table_csv(result.runs, result.run_columns),
    }
    files = list(bodies) + [f"{name}_manifest.json"]
    bodies[files[-1]] = json.dumps(manifest(result, files), indent=2, sort_keys=True) + "\n"
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for fname, body in bodies.items():
        path = os.path.join(out_dir, fname)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(body)
        paths.append(path)
    return paths


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ehcrn",
        description="Run sensor-scheduling experiments and write CSV results.",
    )
    p.add_argument("--preset", choices=sorted(PRESETS), help="experiment to run")
    p.add_argument("--config", metavar="PATH", help="flat TOML file of configuration keys")
    p.add_argument("--seed", action="append", default=[], metavar="N",
                   help="seed, range A-B, or comma list; repeatable (default: config seed)")
    p.add_argument("--out", default="results", metavar="DIR", help="output directory")
    p.add_argument("--frames", type=int, default=100_000, metavar="N",
                   help="Monte Carlo frames per seed (validate_mc)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides",
                   help="override a configuration key (TOML value syntax); repeatable")
    p.add_argument("--workers", type=int, default=1, metavar="N",
                   help="seeds evaluated concurrently")
    p.add_argument("--dump-config", action="store_true",
                   help="print the resolved configuration as JSON and exit")
    p.add_argument("--list-presets", action="store_true", help="list presets and exit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def resolve_config(preset: Optional[str], path: Optional[str], overrides: Sequence[str]) -> Config:
    base = preset_config(preset) if preset else Config()
    cfg = load_config(path, base) if path else base
    changes = dict(parse_override(o) for o in overrides)
    return cfg.replace(**changes) if changes else cfg


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_presets:
        for name in sorted(PRESETS):
            print(f"{name:24s} {PRESETS[name].description}")
        return 0

    try:
        cfg = resolve_config(args.preset, args.config, args.overrides)
    except (ConfigError, OSError) as exc:
        print(f"ehcrn: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.dump_config:
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return 0
    if not args.preset:
        parser.error("--preset is required")
    if args.frames < 1 or args.workers < 1:
        parser.error("--frames and --workers must be positive")
    try:
        seeds = parse_seeds(args.seed) if args.seed else [cfg.seed]
    except ValueError as exc:
        parser.error(f"--seed: {exc}")
    if not seeds:
        parser.error("--seed: no seeds given")

    try:
        result = run_experiment(args.preset, cfg, seeds, args.frames, args.workers)
    except GuardError as exc:
        print(f"ehcrn: refused: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConfigError, ValueError) as exc:
        print(f"ehcrn: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    for path in write_outputs(result, args.out):
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
