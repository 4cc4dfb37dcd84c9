"""Command-line driver: ``run``, ``compare`` and ``bound-check`` over a JSON experiment spec.

Spec file layout::

    {
      "out": "results/",            # optional, --out overrides
      "trials": 1,                  # default trial count per run
      "base": {...},                # RunConfig fields shared by every run
      "runs": [{"name": "bmuf", "algorithm": "gossip-BMUF", ...}, ...]
    }

A spec may also be a single RunConfig mapping. Exit codes: 0 success,
1 bound check failed, 2 invalid configuration, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass

import numpy as np

from .config import SIMPLE_MA, ConfigError, RunConfig
from .partition import NumericalDivergence
from .simulator import oracle_for, run
from .theory import MIN_TRIALS, BoundParams, check_bound

log = logging.getLogger("gossip_bmuf")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_DIVERGED = 0, 1, 2, 3


@dataclass
class ExperimentSpec:
    runs: list[RunConfig]
    out: str = "out"

    @classmethod
    def load(cls, path, seed=None, trials=None, out=None) -> "ExperimentSpec":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read spec {path}: {exc}") from None
        return cls.from_dict(raw, seed=seed, trials=trials, out=out)

    @classmethod
    def from_dict(cls, raw: dict, seed=None, trials=None, out=None) -> "ExperimentSpec":
        if not isinstance(raw, dict):
            raise ConfigError("spec must be a JSON object")
        if "runs" in raw:
            base = raw.get("base", {})
            default_trials = raw.get("trials")
            entries = []
            for r in raw["runs"]:
                merged = {**base, **r}
                if default_trials is not None and "trials" not in r:
                    merged["trials"] = default_trials
                entries.append(merged)
        else:
            entries = [{k: v for k, v in raw.items() if k != "out"}]
        configs = []
        for e in entries:
            if seed is not None:
                e["seed"] = seed
            if trials is not None:
                e["trials"] = trials
            configs.append(RunConfig.from_dict(e))
        labels = [c.label for c in configs]
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        if dupes:
            raise ConfigError(f"run names must be unique; repeated: {', '.join(dupes)} (set 'name')")
        return cls(configs, out or raw.get("out", "out"))


def _csv_name(cfg: RunConfig, trial: int) -> str:
    return f"{cfg.label}.csv" if cfg.trials == 1 else f"{cfg.label}_trial{trial:03d}.csv"


def execute(cfg: RunConfig, out: str, threads: int = 1, write_csv: bool = True):
    """Run every trial of ``cfg``; write CSVs and the JSON summary. Returns the metrics list."""
    os.makedirs(out, exist_ok=True)
    start = time.perf_counter()
    results = []
    for trial in range(cfg.trials):
        m = run(cfg, trial=trial, threads=threads)
        if write_csv:
            m.to_csv(os.path.join(out, _csv_name(cfg, trial)))
        results.append(m)
    wall = time.perf_counter() - start
    per_trial = [m.summary() for m in results]
    summary = {
        "config": cfg.to_dict(),
        "final_loss": _mean([s["final_loss"] for s in per_trial]),
        "final_avg_model_loss": _mean([s["final_avg_model_loss"] for s in per_trial]),
        "final_sq_dist": _mean([s["final_sq_dist"] for s in per_trial]),
        "total_bytes": per_trial[0]["total_bytes"],
        "wall_time_s": wall,
        "trials": per_trial,
    }
    with open(os.path.join(out, f"{cfg.label}.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    log.info("%s: %d trial(s) in %.2fs, final loss %.6g", cfg.label, cfg.trials, wall, summary["final_loss"])
    return results


def _mean(xs):
    return float(np.mean(xs))


def _sem(xs):
    return float(np.std(xs, ddof=1) / math.sqrt(len(xs))) if len(xs) > 1 else 0.0


def comparison_rows(spec: ExperimentSpec, results: dict) -> list[dict]:
    rows = []
    for cfg in spec.runs:
        ms = results[cfg.label]
        avg = [m.final_avg_model_loss for m in ms]
        rows.append({
            "run": cfg.label,
            "algorithm": cfg.algorithm,
            "trials": len(ms),
            "final_avg_model_loss": _mean(avg),
            "final_avg_model_loss_sem": _sem(avg),
            "final_loss": _mean([m.final_loss for m in ms]),
            "final_sq_dist": _mean([m.sq_dist[-1] for m in ms]),
            "final_consensus_var": _mean([m.consensus_var[-1] for m in ms]),
            "total_bytes": ms[0].cum_bytes[-1],
        })
    return rows


def format_table(rows: list[dict]) -> str:
    cols = ["run", "algorithm", "trials", "final_avg_model_loss", "final_avg_model_loss_sem",
            "final_loss", "final_sq_dist", "total_bytes"]
    cells = [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[j]) for row in cells)) for j, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _fmt(v):
    return f"{v:.6g}" if isinstance(v, float) else str(v)


# ---------------------------------------------------------------------------
# subcommands

def cmd_run(spec: ExperimentSpec, threads: int = 1) -> int:
    for cfg in spec.runs:
        execute(cfg, spec.out, threads)
    return EXIT_OK


def cmd_compare(spec: ExperimentSpec, threads: int = 1) -> int:
    results = {cfg.label: execute(cfg, spec.out, threads) for cfg in spec.runs}
    rows = comparison_rows(spec, results)
    with open(os.path.join(spec.out, "comparison.json"), "w") as fh:
        json.dump({"rows": rows}, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(spec.out, "comparison.csv"), "w") as fh:
        fh.write(",".join(rows[0]) + "\n")
        for r in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in r.values()) + "\n")
    table = format_table(rows)
    with open(os.path.join(spec.out, "comparison.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    return EXIT_OK


def bound_params_for(cfg: RunConfig, init_dist: float) -> BoundParams:
    if cfg.algorithm != SIMPLE_MA:
        raise ConfigError(f"bound-check needs algorithm {SIMPLE_MA!r}, got {cfg.algorithm!r}")
    if cfg.objective.get("kind") != "quadratic":
        raise ConfigError("bound-check needs the quadratic objective (exact mu, L and sigma2)")
    if cfg.alpha.decay != 1.0:
        raise ConfigError("bound-check needs a constant step size (decay = 1)")
    if cfg.trials < MIN_TRIALS:
        raise ConfigError(f"bound-check needs at least {MIN_TRIALS} trials, got {cfg.trials}")
    oracle = oracle_for(cfg)
    try:
        return BoundParams(oracle.mu, oracle.L_const, cfg.alpha.initial, cfg.n, oracle.sigma2, init_dist)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_bound_check(spec: ExperimentSpec, threads: int = 1) -> int:
    if len(spec.runs) != 1:
        raise ConfigError("bound-check takes exactly one run configuration")
    cfg = spec.runs[0]
    bound_params_for(cfg, 0.0)  # validate before spending time on trials
    metrics = execute(cfg, spec.out, threads, write_csv=False)
    init = _mean([m.initial_sq_dist for m in metrics])
    report = check_bound(metrics, bound_params_for(cfg, init))
    report.to_json(os.path.join(spec.out, "bound_report.json"))
    print(report.table())
    print("PASS" if report.ok else "FAIL", f"pass_fraction={report.pass_fraction:.4f}")
    return EXIT_OK if report.ok else EXIT_FAILED


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "bound-check": cmd_bound_check}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gossip-bmuf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--spec", required=True, help="JSON experiment spec")
        p.add_argument("--out", default=None, help="output directory (default: spec 'out' or ./out)")
        p.add_argument("--seed", type=int, default=None, help="override the global seed of every run")
        p.add_argument("--trials", type=int, default=None, help="override the trial count of every run")
        p.add_argument("--threads", type=int, default=1, help="worker threads per run")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        spec = ExperimentSpec.load(args.spec, seed=args.seed, trials=args.trials, out=args.out)
        return COMMANDS[args.command](spec, args.threads)
    except ValueError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalDivergence as exc:
        print(f"error: numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
