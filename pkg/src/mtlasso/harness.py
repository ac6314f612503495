"""Monte-Carlo phase-transition sweeps over (p, K, n) grids.

A sweep runs `trials` independent problem draws per grid point, solves
each one, and records the empirical probability of exact support-union
recovery together with threshold overlays computed from the theory
module.  Per-trial seeds derive from
SeedSequence((base_seed, p, K, n, trial)) -> first uint64 word, so any
scheduling of the work reproduces the same numbers; aggregation happens
in trial order.
"""

from __future__ import annotations

import json
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .datagen import (
    CoefficientModel,
    CovarianceModel,
    CovarianceSet,
    build_covariance,
    build_truth,
    lambda_rule,
    sample_problem,
)
from .errors import ConfigError
from .model import GroundTruth, NoiseSpec, recovery_check
from .solver import SolverConfig, solve
from . import theory

__all__ = [
    "ExperimentConfig",
    "SweepRow",
    "CellSummary",
    "SweepResult",
    "Crossing",
    "derive_seed",
    "run_sweep",
    "rescale_axis",
    "crossing_point",
    "write_outputs",
    "CSV_COLUMNS",
]

DEFAULT_THETA_GRID = (0.5, 8.0, 24)  # theta units of psi*ln(p-s); spans [0.25, 4] x 2*psi*ln(p-s)


@dataclass(frozen=True)
class ExperimentConfig:
    p_list: tuple
    K_list: tuple
    coefficient_model: CoefficientModel
    covariance_model: CovarianceModel
    sigma_w: tuple | float = 0.5
    spd_floor: float = 0.05
    lambda_rule: str | float = "paper35"
    n_grid: tuple | None = None
    theta_grid: tuple = DEFAULT_THETA_GRID
    trials: int = 100
    base_seed: int = 0
    v: float = 0.1
    alpha: float | None = None
    zero_tol: float = 0.0
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        ps = tuple(int(p) for p in self.p_list)
        Ks = tuple(int(k) for k in self.K_list)
        if not ps or not Ks:
            raise ConfigError("p_list and K_list must be nonempty")
        if any(p < 2 for p in ps) or any(k < 1 for k in Ks):
            raise ConfigError("need p >= 2 and K >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.v <= 0:
            raise ConfigError("v must be positive")
        if isinstance(self.lambda_rule, str):
            if self.lambda_rule != "paper35":
                raise ConfigError(f"unknown lambda rule {self.lambda_rule!r}")
        elif float(self.lambda_rule) <= 0:
            raise ConfigError("fixed lambda must be positive")
        if self.alpha is not None:
            for p in ps:
                s = self.alpha * p
                if s <= 0 or abs(s - round(s)) > 1e-9:
                    raise ConfigError(f"alpha*p = {s} is not a positive integer for p={p}")
        if self.n_grid is not None:
            ns = tuple(sorted({int(n) for n in self.n_grid}))
            if any(n < 1 for n in ns):
                raise ConfigError("n grid entries must be >= 1")
            object.__setattr__(self, "n_grid", ns)
        tmin, tmax, num = self.theta_grid
        if not (0 < tmin <= tmax) or int(num) < 1:
            raise ConfigError("theta grid must satisfy 0 < min <= max, num >= 1")
        object.__setattr__(self, "theta_grid", (float(tmin), float(tmax), int(num)))
        object.__setattr__(self, "p_list", ps)
        object.__setattr__(self, "K_list", Ks)
        if not isinstance(self.sigma_w, (int, float)):
            object.__setattr__(self, "sigma_w", tuple(float(s) for s in self.sigma_w))

    def noise_for(self, K: int) -> NoiseSpec:
        if isinstance(self.sigma_w, (int, float)):
            return NoiseSpec.uniform(float(self.sigma_w), K)
        if len(self.sigma_w) != K:
            raise ConfigError(f"sigma_w has {len(self.sigma_w)} entries for K={K}")
        return NoiseSpec(sigma_w=self.sigma_w)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        p_list = d.pop("p_list", None)
        if p_list is None:
            p_list = d.pop("p")
        if isinstance(p_list, (int, float)):
            p_list = [p_list]
        K_list = d.pop("K_list", None)
        if K_list is None:
            K_list = d.pop("K")
        if isinstance(K_list, (int, float)):
            K_list = [K_list]
        cm = d.pop("coefficient_model", {})
        if isinstance(cm, str):
            cm = {"kind": cm}
        if "custom_supports" in cm:
            cm["custom_supports"] = tuple(tuple(s) for s in cm["custom_supports"])
        coef = CoefficientModel(**cm)
        vm = d.pop("covariance_model", {})
        if isinstance(vm, str):
            vm = {"kind": vm}
        cov = CovarianceModel(**vm)
        n_grid = d.pop("n_grid", None)
        theta_grid = DEFAULT_THETA_GRID
        if isinstance(n_grid, dict):
            theta_grid = (
                n_grid.get("theta_min", DEFAULT_THETA_GRID[0]),
                n_grid.get("theta_max", DEFAULT_THETA_GRID[1]),
                n_grid.get("num", DEFAULT_THETA_GRID[2]),
            )
            n_grid = None
        solver = d.pop("solver", None)
        solver_cfg = SolverConfig(**solver) if solver else SolverConfig()
        known = {
            "sigma_w", "spd_floor", "lambda_rule", "trials", "base_seed",
            "v", "alpha", "zero_tol",
        }
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        return cls(
            p_list=tuple(p_list),
            K_list=tuple(K_list),
            coefficient_model=coef,
            covariance_model=cov,
            n_grid=tuple(n_grid) if n_grid is not None else None,
            theta_grid=theta_grid,
            solver=solver_cfg,
            **d,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        cm = {
            "kind": self.coefficient_model.kind,
            "support_rule": self.coefficient_model.support_rule,
            "perturbation": self.coefficient_model.perturbation,
            "scale": self.coefficient_model.scale,
        }
        if self.coefficient_model.custom_supports:
            cm["custom_supports"] = [list(s) for s in self.coefficient_model.custom_supports]
        return {
            "p_list": list(self.p_list),
            "K_list": list(self.K_list),
            "coefficient_model": cm,
            "covariance_model": {"kind": self.covariance_model.kind},
            "sigma_w": self.sigma_w if isinstance(self.sigma_w, (int, float)) else list(self.sigma_w),
            "spd_floor": self.spd_floor,
            "lambda_rule": self.lambda_rule,
            "n_grid": list(self.n_grid) if self.n_grid is not None else None,
            "theta_grid": list(self.theta_grid),
            "trials": self.trials,
            "base_seed": self.base_seed,
            "v": self.v,
            "alpha": self.alpha,
            "zero_tol": self.zero_tol,
            "solver": {
                "tol": self.solver.tol,
                "max_iters": self.solver.max_iters,
                "method": self.solver.method,
            },
        }


def derive_seed(base_seed: int, p: int, K: int, n: int, trial: int) -> int:
    """Documented per-trial seed: first uint64 word of
    SeedSequence((base_seed, p, K, n, trial))."""
    ss = np.random.SeedSequence(entropy=(int(base_seed), int(p), int(K), int(n), int(trial)))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class CellSummary:
    p: int
    K: int
    s: int
    b_min: float
    psi: float
    gamma: float
    a_matrix_inf_norm: float
    c_min: float
    c_max: float
    d_max: float
    rho_u: float
    rho_l: float | None
    n_achievability: float | None
    n_converse: float | None
    spd_shifts: tuple
    n_grid: tuple

    def to_json_dict(self) -> dict:
        d = self.__dict__.copy()
        d["spd_shifts"] = list(self.spd_shifts)
        d["n_grid"] = list(self.n_grid)
        return d


@dataclass(frozen=True)
class SweepRow:
    p: int
    K: int
    coefficient_model: str
    support_rule: str
    covariance_model: str
    s: int
    psi: float
    n: int
    theta: float
    theta_psi: float
    theta_slog: float
    successes: int
    trials: int
    success_prob: float
    nonconverged: int
    mean_linf_l2_error: float
    mean_solve_iters: float


CSV_COLUMNS = [
    "p", "K", "coefficient_model", "support_rule", "covariance_model", "s",
    "psi", "n", "theta", "theta_psi", "theta_slog", "successes", "trials",
    "success_prob", "nonconverged", "mean_linf_l2_error", "mean_solve_iters",
]


@dataclass(frozen=True)
class SweepResult:
    config: dict
    cells: tuple
    rows: tuple


@dataclass(frozen=True)
class _WorkUnit:
    truth: GroundTruth
    covs: CovarianceSet
    noise: NoiseSpec
    p: int
    K: int
    n: int
    lam: float
    trials: int
    base_seed: int
    zero_tol: float
    solver: SolverConfig


def _run_point(unit: _WorkUnit):
    successes = 0
    nonconverged = 0
    sum_err = 0.0
    sum_iters = 0
    for t in range(unit.trials):
        seed = derive_seed(unit.base_seed, unit.p, unit.K, unit.n, t)
        prob = sample_problem(unit.truth, unit.covs, unit.noise, unit.n, seed)
        rep = solve(prob, unit.lam, unit.solver)
        rc = recovery_check(rep.estimate, unit.truth, unit.zero_tol)
        if not rep.converged:
            nonconverged += 1
        elif rc.support_match:
            successes += 1
        sum_err += rc.linf_l2_error
        sum_iters += rep.iterations
    return successes, nonconverged, sum_err, sum_iters


def _plan_cell(config: ExperimentConfig, p: int, K: int):
    truth = build_truth(config.coefficient_model, p, K)
    covs = build_covariance(config.covariance_model, p, K, config.spd_floor)
    noise = config.noise_for(K)
    S = truth.support_union
    s = len(S)
    rep = theory.condition_report(truth.b_star, covs, S)
    n_ach = n_conv = None
    if rep.c1_holds and rep.rho_l is not None:
        thr = theory.thresholds(rep.psi, p, s, rep.rho_u, rep.rho_l, rep.gamma, config.v)
        n_ach, n_conv = thr.n_achievability, thr.n_converse
    if config.n_grid is not None:
        n_grid = config.n_grid
    else:
        tmin, tmax, num = config.theta_grid
        thetas = np.logspace(np.log10(tmin), np.log10(tmax), num)
        scale = rep.psi * np.log(p - s)
        n_grid = tuple(sorted({max(2, int(round(t * scale))) for t in thetas}))
    cell = CellSummary(
        p=p, K=K, s=s, b_min=truth.b_min, psi=rep.psi, gamma=rep.gamma,
        a_matrix_inf_norm=rep.a_matrix_inf_norm, c_min=rep.c_min, c_max=rep.c_max,
        d_max=rep.d_max, rho_u=rep.rho_u, rho_l=rep.rho_l,
        n_achievability=n_ach, n_converse=n_conv,
        spd_shifts=covs.diag_shifts, n_grid=n_grid,
    )
    return cell, truth, covs, noise


def run_sweep(config: ExperimentConfig, jobs: int = 1) -> SweepResult:
    """Execute the full sweep.  Results are independent of jobs: every
    grid point is seeded statelessly and aggregated in trial order."""
    cells = []
    units = []
    for p in config.p_list:
        for K in config.K_list:
            cell, truth, covs, noise = _plan_cell(config, p, K)
            cells.append(cell)
            for n in cell.n_grid:
                if isinstance(config.lambda_rule, str):
                    lam = lambda_rule(p, cell.s, n)
                else:
                    lam = float(config.lambda_rule)
                units.append(
                    _WorkUnit(
                        truth=truth, covs=covs, noise=noise, p=p, K=K, n=n,
                        lam=lam, trials=config.trials, base_seed=config.base_seed,
                        zero_tol=config.zero_tol, solver=config.solver,
                    )
                )
    if jobs > 1 and len(units) > 1:
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=jobs, mp_context=ctx) as ex:
            outcomes = list(ex.map(_run_point, units, chunksize=1))
    else:
        outcomes = [_run_point(u) for u in units]
    rows = []
    idx = 0
    for cell in cells:
        scale_psi = 2.0 * cell.psi * np.log(cell.p - cell.s)
        scale_slog = cell.s * np.log(cell.p - cell.s)
        for n in cell.n_grid:
            successes, nonconverged, sum_err, sum_iters = outcomes[idx]
            idx += 1
            theta_psi = n / scale_psi
            rows.append(
                SweepRow(
                    p=cell.p, K=cell.K,
                    coefficient_model=config.coefficient_model.kind,
                    support_rule=config.coefficient_model.support_rule,
                    covariance_model=config.covariance_model.kind,
                    s=cell.s, psi=cell.psi, n=n,
                    theta=theta_psi,
                    theta_psi=theta_psi,
                    theta_slog=n / scale_slog,
                    successes=successes,
                    trials=config.trials,
                    success_prob=successes / config.trials,
                    nonconverged=nonconverged,
                    mean_linf_l2_error=sum_err / config.trials,
                    mean_solve_iters=sum_iters / config.trials,
                )
            )
    return SweepResult(config=config.to_dict(), cells=tuple(cells), rows=tuple(rows))


def rescale_axis(result: SweepResult, mode: str) -> SweepResult:
    """Set each row's theta column: theta_psi -> n/(2 psi ln(p-s)),
    theta_slog -> n/(s ln(p-s))."""
    if mode not in ("theta_psi", "theta_slog"):
        raise ConfigError(f"unknown rescale mode {mode!r}")
    rows = tuple(
        replace(r, theta=r.theta_psi if mode == "theta_psi" else r.theta_slog)
        for r in result.rows
    )
    return SweepResult(config=result.config, cells=result.cells, rows=rows)


@dataclass(frozen=True)
class Crossing:
    value: float | None
    se: float | None
    defined: bool


def _point_se(successes: int, trials: int) -> float:
    # small-sample floor keeps the SE positive at 0 and trials endpoints
    pt = (successes + 0.5) / (trials + 1.0)
    return float(np.sqrt(pt * (1.0 - pt) / trials))


def crossing_point(result: SweepResult, level: float, axis: str = "n") -> dict:
    """First upward crossing of `level` per (p, K) cell, linearly
    interpolated on the chosen axis, with a propagated binomial standard
    error.  Cells whose curve never reaches the level come back
    flagged undefined rather than raising."""
    if not (0.0 < level < 1.0):
        raise ConfigError("level must be in (0, 1)")
    if axis not in ("n", "theta", "theta_psi", "theta_slog"):
        raise ConfigError(f"unknown axis {axis!r}")
    out = {}
    for cell in result.cells:
        rows = sorted(
            (r for r in result.rows if r.p == cell.p and r.K == cell.K),
            key=lambda r: r.n,
        )
        if not rows:
            continue
        xs = [getattr(r, axis) for r in rows]
        ps = [r.success_prob for r in rows]
        key = (cell.p, cell.K)
        if ps[0] >= level:
            out[key] = Crossing(value=float(xs[0]), se=None, defined=True)
            continue
        found = None
        for i in range(len(rows) - 1):
            if ps[i] < level <= ps[i + 1]:
                found = i
                break
        if found is None:
            out[key] = Crossing(value=None, se=None, defined=False)
            continue
        i = found
        h = xs[i + 1] - xs[i]
        gap = ps[i + 1] - ps[i]
        value = xs[i] + (level - ps[i]) * h / gap
        se_i = _point_se(rows[i].successes, rows[i].trials)
        se_j = _point_se(rows[i + 1].successes, rows[i + 1].trials)
        dv_i = h * (level - ps[i + 1]) / gap**2
        dv_j = -h * (level - ps[i]) / gap**2
        se = float(np.sqrt((dv_i * se_i) ** 2 + (dv_j * se_j) ** 2))
        out[key] = Crossing(value=float(value), se=se, defined=True)
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def to_csv(result: SweepResult) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in result.rows:
        lines.append(",".join(_fmt(getattr(r, c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def to_json_dict(result: SweepResult) -> dict:
    return {
        "config": result.config,
        "cells": [c.to_json_dict() for c in result.cells],
        "rows": [{c: getattr(r, c) for c in CSV_COLUMNS} for r in result.rows],
    }


def to_report_md(result: SweepResult) -> str:
    out = ["# Sweep report", ""]
    shifted = [c for c in result.cells if any(s > 0 for s in c.spd_shifts)]
    if shifted:
        out.append(
            "**Covariance repair:** tridiagonal covariances were shifted "
            "on the diagonal to reach the SPD floor for the cells listed "
            "below (shift added to every diagonal entry)."
        )
        for c in shifted:
            out.append(
                f"- p={c.p}, K={c.K}: shifts "
                + ", ".join(format(s, ".6g") for s in c.spd_shifts)
            )
        out.append("")
    out.append("## Cells")
    out.append(
        "| p | K | s | b_min | psi | gamma | rho_u | rho_l | c_min | c_max "
        "| d_max | n_achievability | n_converse |"
    )
    out.append("|" + "---|" * 13)
    for c in result.cells:
        out.append(
            f"| {c.p} | {c.K} | {c.s} | {c.b_min:.6g} | {c.psi:.6g} "
            f"| {c.gamma:.6g} | {c.rho_u:.6g} "
            f"| {'' if c.rho_l is None else format(c.rho_l, '.6g')} "
            f"| {c.c_min:.6g} | {c.c_max:.6g} | {c.d_max:.6g} "
            f"| {'' if c.n_achievability is None else format(c.n_achievability, '.6g')} "
            f"| {'' if c.n_converse is None else format(c.n_converse, '.6g')} |"
        )
    out.append("")
    for c in result.cells:
        out.append(f"## Success curve p={c.p}, K={c.K}")
        out.append("| n | theta_psi | success_prob | nonconverged | mean_linf_l2_error |")
        out.append("|" + "---|" * 5)
        for r in result.rows:
            if r.p == c.p and r.K == c.K:
                out.append(
                    f"| {r.n} | {r.theta_psi:.4g} | {r.success_prob:.3g} "
                    f"| {r.nonconverged} | {r.mean_linf_l2_error:.4g} |"
                )
        out.append("")
    return "\n".join(out)


def write_outputs(result: SweepResult, outdir) -> None:
    """Write sweep.csv, sweep.json and report.md into outdir."""
    import os

    os.makedirs(outdir, exist_ok=True)
    with open(os.path.join(outdir, "sweep.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(result))
    with open(os.path.join(outdir, "sweep.json"), "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(result), fh, indent=2)
        fh.write("\n")
    with open(os.path.join(outdir, "report.md"), "w", encoding="utf-8") as fh:
        fh.write(to_report_md(result))
