"""Command-line entry point: ``eireservoir run|validate|dump-reservoir``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .core import ConfigError, build_reservoir, save_reservoir
from .experiments import ExperimentSpec, parse_config, run_experiment


def _apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    d = spec.to_dict()
    if getattr(args, "scale", None):
        d["scale"] = args.scale
        if "n_seeds" not in args.explicit:
            d["n_seeds"] = None
    if getattr(args, "seeds", None) is not None:
        d["n_seeds"] = args.seeds
    if getattr(args, "workers", None) is not None:
        d["workers"] = args.workers
    return ExperimentSpec.from_dict(d)


def _load(args) -> ExperimentSpec:
    spec = parse_config(args.config)
    with open(args.config) as f:
        args.explicit = set(json.load(f))
    return _apply_overrides(spec, args)


def cmd_run(args) -> int:
    spec = _load(args)
    out = Path(args.out or spec.output_path or "results")
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.INFO)
    try:
        logging.info("running %s on %s: %d seeds", spec.experiment.value, spec.task.value, spec.n_seeds)
        result = run_experiment(replace(spec, output_path=str(out)), out)
        n_failed = sum(1 for r in result.rows if r["error"])
        logging.info("done: %d rows, %d failed", len(result.rows), n_failed)
    finally:
        root.removeHandler(handler)
        handler.close()
    for row in result.summary:
        print(f"cell {row['cell']:>3} {row['mode']:<22} {row['metric_name']}={row['metric_mean']:.4g} "
              f"+/- {row['metric_sem']:.2g} (n={row['n']})")
    print(f"wrote {out}/cells.csv and {out}/summary.csv")
    return 0


def cmd_validate(args) -> int:
    spec = _load(args)
    json.dump(spec.to_dict(), sys.stdout, indent=2, sort_keys=True)
    print()
    return 0


def cmd_dump(args) -> int:
    spec = _load(args)
    cfg = spec.network_config()
    res = build_reservoir(cfg)
    out = args.out or "reservoir.npz"
    save_reservoir(res, out)
    print(f"wrote {out} (N={res.n_neurons}, beta={res.global_balance():.4f})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="eireservoir", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seeds", type=int, help="replicates per cell")
    p.add_argument("--workers", type=int, help="worker processes")
    p.add_argument("--scale", choices=["desk", "full"])
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="parse a config and print the resolved spec")
    p.add_argument("config")
    p.add_argument("--scale", choices=["desk", "full"])
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dump-reservoir", help="build the configured reservoir and save it")
    p.add_argument("config")
    p.add_argument("--out", help="output .npz path")
    p.add_argument("--scale", choices=["desk", "full"])
    p.set_defaults(func=cmd_dump)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
