"""Command-line interface: gen / solve / theory / sweep."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness, theory
from .datagen import build_covariance, build_truth, sample_problem
from .errors import ConfigError, MtlassoError
from .harness import ExperimentConfig
from .model import MvmrProblem
from .solver import SolverConfig, solve


def _single_cell(config: ExperimentConfig):
    if len(config.p_list) != 1 or len(config.K_list) != 1:
        raise ConfigError("this command needs a single-cell config (one p, one K)")
    return config.p_list[0], config.K_list[0]


def _cmd_gen(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    p, K = _single_cell(config)
    truth = build_truth(config.coefficient_model, p, K)
    covs = build_covariance(config.covariance_model, p, K, config.spd_floor)
    noise = config.noise_for(K)
    if args.n is not None:
        n = args.n
    elif config.n_grid:
        n = config.n_grid[0]
    else:
        raise ConfigError("give --n or an explicit n_grid in the config")
    problem = sample_problem(truth, covs, noise, n, args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(problem.to_json_dict(), fh)
        fh.write("\n")
    print(f"wrote problem (K={K}, n={n}, p={p}) to {args.out}")
    return 0


def _cmd_solve(args) -> int:
    with open(args.problem, "r", encoding="utf-8") as fh:
        problem = MvmrProblem.from_json_dict(json.load(fh))
    cfg = SolverConfig(tol=args.tol, max_iters=args.max_iters, method=args.method)
    report = solve(problem, args.lam, cfg)
    payload = report.to_json_dict()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    else:
        json.dump(payload, sys.stdout)
        sys.stdout.write("\n")
    return 0


def _cmd_theory(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    reports = []
    for p in config.p_list:
        for K in config.K_list:
            truth = build_truth(config.coefficient_model, p, K)
            covs = build_covariance(config.covariance_model, p, K, config.spd_floor)
            S = truth.support_union
            rep = theory.condition_report(truth.b_star, covs, S)
            entry = {"p": p, "K": K, "s": len(S), "b_min": truth.b_min}
            entry.update(rep.to_json_dict())
            if rep.c1_holds and rep.rho_l is not None:
                thr = theory.thresholds(
                    rep.psi, p, len(S), rep.rho_u, rep.rho_l, rep.gamma, args.v
                )
                entry["n_achievability"] = thr.n_achievability
                entry["n_converse"] = thr.n_converse
            else:
                entry["n_achievability"] = None
                entry["n_converse"] = None
            reports.append(entry)
    cols = ["p", "K", "s", "psi", "gamma", "rho_u", "rho_l", "c_min", "c_max",
            "d_max", "n_achievability", "n_converse"]
    widths = {c: max(len(c), 12) for c in cols}
    print("  ".join(c.ljust(widths[c]) for c in cols))
    for e in reports:
        cells = []
        for c in cols:
            v = e[c]
            if v is None:
                cells.append("-".ljust(widths[c]))
            elif isinstance(v, float):
                cells.append(format(v, ".6g").ljust(widths[c]))
            else:
                cells.append(str(v).ljust(widths[c]))
        print("  ".join(cells))
    payload = {"v": args.v, "cells": reports}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        json.dump(payload, sys.stdout)
        sys.stdout.write("\n")
    return 0


def _cmd_sweep(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    result = harness.run_sweep(config, jobs=args.jobs)
    harness.write_outputs(result, args.out)
    print(f"wrote sweep.csv, sweep.json, report.md to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtlasso")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample one problem instance from a config")
    g.add_argument("--config", required=True)
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, default=None, help="sample count (default: first grid entry)")
    g.set_defaults(func=_cmd_gen)

    s = sub.add_parser("solve", help="solve a serialized problem")
    s.add_argument("--problem", required=True)
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iters", type=int, default=10000)
    s.add_argument("--method", choices=("bcd", "pg"), default="bcd")
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_solve)

    t = sub.add_parser("theory", help="recovery conditions and thresholds for a config")
    t.add_argument("--config", required=True)
    t.add_argument("--v", type=float, default=0.1)
    t.add_argument("--out", default=None)
    t.set_defaults(func=_cmd_theory)

    w = sub.add_parser("sweep", help="run a Monte-Carlo phase-transition sweep")
    w.add_argument("--config", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--jobs", type=int, default=1)
    w.set_defaults(func=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except MtlassoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
