"""Command-line entry point.

Subcommands:
    gen-graph  write a configuration-model edge list
    run        execute one experiment config and write records + summary
    sweep      expand a grid file into several runs
    verify     run the exact-oracle suite, exit nonzero on any FAIL
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .graph import generate_configuration_model, save_edge_list
from .harness import (
    ExperimentConfig,
    aggregate,
    run_experiment,
    write_records_csv,
    write_summary_csv,
)
from .verification import run_verification

USAGE_ERROR = 2
VERIFY_ERROR = 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rollout-tte")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-graph", help="generate a configuration-model network")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--exponent", type=float, default=2.5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run one experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="records CSV path (overrides config)")
    run.add_argument("--seed", type=int, default=None, help="master seed override")
    run.add_argument("--workers", type=int, default=None)
    run.add_argument("--n", type=int, default=None)
    run.add_argument("--beta", type=int, default=None)
    run.add_argument("--r", type=float, default=None)
    run.add_argument("--budget", type=float, default=None)
    run.add_argument("--design", choices=("brd", "crd"), default=None)
    run.add_argument("--estimators", default=None, help="comma-separated estimator tags")
    run.add_argument("--sweep-param", default=None)
    run.add_argument("--sweep-values", default=None, help="comma-separated values")

    sweep = sub.add_parser("sweep", help="expand a grid file into runs")
    sweep.add_argument("--config", required=True, help="grid file with base config")
    sweep.add_argument("--workers", type=int, default=None)

    verify = sub.add_parser("verify", help="run the oracle verification suite")
    verify.add_argument("--seed", type=int, default=20240801)

    return parser


def _load_json(path: str) -> dict:
    file = Path(path)
    if not file.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    with open(file, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _apply_overrides(payload: dict, args: argparse.Namespace) -> dict:
    overrides = {
        "out": args.out,
        "master_seed": args.seed,
        "workers": args.workers,
        "n": args.n,
        "beta": args.beta,
        "r": args.r,
        "budget": args.budget,
        "design": args.design,
    }
    for key, value in overrides.items():
        if value is not None:
            payload[key] = value
    if args.estimators is not None:
        payload["estimators"] = args.estimators.split(",")
    if args.sweep_param is not None:
        payload["sweep_param"] = args.sweep_param
    if args.sweep_values is not None:
        values = [float(v) for v in args.sweep_values.split(",")]
        payload["sweep_values"] = values
    return payload


def _summary_path(records_path: str) -> str:
    path = Path(records_path)
    return str(path.with_name(path.stem + ".summary" + (path.suffix or ".csv")))


def _execute_config(cfg: ExperimentConfig) -> None:
    print(json.dumps({"resolved_config": cfg.to_dict()}, sort_keys=True))
    records = run_experiment(cfg)
    out = cfg.out or "records.csv"
    write_records_csv(records, out)
    summary = aggregate(records, cfg.sweep_param)
    write_summary_csv(summary, _summary_path(out))
    n_ok = sum(1 for rec in records if rec.status == "ok")
    print(f"wrote {len(records)} records ({n_ok} ok) to {out}")


def _cmd_gen_graph(args: argparse.Namespace) -> int:
    print(
        json.dumps(
            {"resolved_config": {"command": "gen-graph", "n": args.n, "exponent": args.exponent, "seed": args.seed, "out": args.out}},
            sort_keys=True,
        )
    )
    g = generate_configuration_model(args.n, args.exponent, args.seed)
    save_edge_list(g, args.out)
    print(f"wrote {g.num_edges()} edges to {args.out}")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    payload = _apply_overrides(_load_json(args.config), args)
    cfg = ExperimentConfig.from_dict(payload)
    _execute_config(cfg)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    grid_payload = _load_json(args.config)
    if "base" not in grid_payload or "grid" not in grid_payload:
        raise ConfigError("grid file needs 'base' (config) and 'grid' (field -> values) entries")
    base = grid_payload["base"]
    grid = grid_payload["grid"]
    keys = sorted(grid)
    for combo in itertools.product(*(grid[key] for key in keys)):
        payload = dict(base)
        payload.update(dict(zip(keys, combo)))
        if args.workers is not None:
            payload["workers"] = args.workers
        label = "_".join(f"{key}-{value}" for key, value in zip(keys, combo))
        out = payload.get("out", "records.csv")
        path = Path(out)
        payload["out"] = str(path.with_name(f"{path.stem}_{label}{path.suffix or '.csv'}"))
        _execute_config(ExperimentConfig.from_dict(payload))
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    results = run_verification(seed=args.seed)
    for result in results:
        print(result.line())
    failed = [result for result in results if not result.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return VERIFY_ERROR if failed else 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "gen-graph": _cmd_gen_graph,
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except (FileNotFoundError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
