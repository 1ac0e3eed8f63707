"""Command-line entry points.

Subcommands: ``tune`` (emit a tuned config), ``sample`` (run chains),
``benchmark`` (model x sampler sweep), ``grid-l`` (trajectory-length grid
search). Exit codes: 0 success, 2 configuration error, 3 tuning failure,
4 I/O failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, TuningFailureError
from .harness import (
    ExperimentConfig,
    build_manifest,
    grid_search_traj_length,
    load_config,
    prepare_kernel,
    run_experiment,
)
from .targets import make_model

EXIT_CONFIG = 2
EXIT_TUNING = 3
EXIT_IO = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=None, help="override base seed")
    p.add_argument("--chains", type=int, default=None, help="override chain count")
    p.add_argument("--budget", type=int, default=None, help="override per-chain gradient budget")
    p.add_argument("--out", default=None, help="override output directory")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.chains is not None:
        overrides["chains"] = args.chains
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def cmd_tune(args) -> int:
    cfg = _load(args)
    target = make_model(cfg.model, **cfg.model_params)
    kernel, scales, warm, calls = prepare_kernel(cfg, target)
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = build_manifest(cfg, kernel, scales)
    payload["warm_position"] = [float(v) for v in warm.x]
    payload["tuning_grad_calls"] = calls
    path = out_dir / f"{cfg.run_label()}_tuned.json"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"tuned config written to {path}")
    print(
        f"step_size={kernel.step_size:.6g} traj_length={kernel.traj_length:.6g} "
        f"tuning_grad_calls={calls}"
    )
    return 0


def cmd_sample(args) -> int:
    cfg = _load(args)
    result = run_experiment(cfg)
    crossing = result.gradients_to_threshold
    print(f"results written to {result.out_dir}")
    print(
        "gradients to threshold: "
        + ("not reached" if crossing is None else str(crossing))
    )
    return 0


def cmd_benchmark(args) -> int:
    with open(args.config) as fh:
        spec = json.load(fh)
    shared = {
        k: v for k, v in spec.items() if k not in ("models", "samplers")
    }
    models = spec["models"]
    samplers = spec["samplers"]
    rows = []
    for model in models:
        if isinstance(model, str):
            model_name, model_params = model, {}
        else:
            model_name, model_params = model["name"], model.get("params", {})
        for sampler in samplers:
            cfg = ExperimentConfig.from_dict(
                {
                    **shared,
                    "model": model_name,
                    "model_params": model_params,
                    "sampler": sampler,
                }
            )
            if args.seed is not None:
                cfg = dataclasses.replace(cfg, seed=args.seed)
            if args.chains is not None:
                cfg = dataclasses.replace(cfg, chains=args.chains)
            if args.budget is not None:
                cfg = dataclasses.replace(cfg, budget=args.budget)
            if args.out is not None:
                cfg = dataclasses.replace(cfg, out_dir=args.out)
            result = run_experiment(cfg)
            crossing = result.gradients_to_threshold
            rows.append((model_name, sampler, crossing))
            print(
                f"{model_name:>28s} {sampler:>14s} "
                + ("not reached" if crossing is None else f"{crossing:>10d}")
            )
    out_dir = Path(args.out or shared.get("out_dir", "results"))
    out_dir.mkdir(parents=True, exist_ok=True)
    import csv

    with open(out_dir / "benchmark_summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "sampler", "gradients_to_threshold"])
        for model_name, sampler, crossing in rows:
            w.writerow([model_name, sampler, -1 if crossing is None else crossing])
    return 0


def cmd_grid_l(args) -> int:
    cfg = _load(args)
    with open(args.config) as fh:
        raw = json.load(fh)
    grid = raw.get("traj_length_grid") or args.grid
    if not grid:
        raise ConfigurationError("provide traj_length_grid in the config or --grid")
    if isinstance(grid, str):
        grid = [float(v) for v in grid.split(",")]
    rows = grid_search_traj_length(
        dataclasses.replace(cfg, label=cfg.run_label()), grid
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    import csv

    path = out_dir / f"{cfg.run_label()}_grid_l.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["traj_length", "step_size", "gradients_to_threshold", "accept_rate"])
        for row in rows:
            w.writerow(
                [
                    repr(row["traj_length"]),
                    repr(row["step_size"]),
                    -1
                    if row["gradients_to_threshold"] is None
                    else row["gradients_to_threshold"],
                    repr(row["accept_rate"]),
                ]
            )
    for row in rows:
        c = row["gradients_to_threshold"]
        print(
            f"L={row['traj_length']:<10.4g} eps={row['step_size']:<10.4g} "
            + ("not reached" if c is None else f"grads={c}")
        )
    print(f"grid results written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mams", description="Microcanonical MCMC benchmark harness"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("tune", help="run tuning and emit the frozen config")
    _add_common(p)
    p.set_defaults(func=cmd_tune)
    p = sub.add_parser("sample", help="tune then run chains, emitting CSVs")
    _add_common(p)
    p.set_defaults(func=cmd_sample)
    p = sub.add_parser("benchmark", help="model x sampler sweep")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)
    p = sub.add_parser("grid-l", help="trajectory-length grid search")
    _add_common(p)
    p.add_argument("--grid", default=None, help="comma-separated lengths")
    p.set_defaults(func=cmd_grid_l)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except TuningFailureError as err:
        print(f"tuning failure: {err}", file=sys.stderr)
        return EXIT_TUNING
    except OSError as err:
        print(f"I/O failure: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
