"""Benchmark the solver kernels: numba-compiled vs pure-numpy paths.

The jitted kernels expose their uncompiled twins through ``py_func``, so
one process can time both.  Run:

    python benchmarks/bench_solver.py [--repeats 5]

With MTLASSO_DISABLE_NUMBA=1 only the numpy path is timed.
"""

import argparse
import time

import numpy as np

from mtlasso.backend import NUMBA_ENABLED, backend_name, plain
from mtlasso import kernels
from mtlasso.datagen import (
    CoefficientModel,
    CovarianceModel,
    build_covariance,
    build_truth,
    lambda_rule,
    sample_problem,
)
from mtlasso.model import NoiseSpec


def make_case(p, K, n, seed=7):
    truth = build_truth(CoefficientModel("identical_uniform", "stride_8"), p=p, K=K)
    covs = build_covariance(CovarianceModel("tridiag_per_task"), p=p, K=K)
    prob = sample_problem(truth, covs, NoiseSpec.uniform(0.5, K), n=n, seed=seed)
    XT = prob.designs_by_feature()
    Y = np.ascontiguousarray(prob.responses)
    lam = lambda_rule(p, truth.s, n)
    return XT, Y, lam


def time_call(fn, args, repeats):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    cases = [(128, 2, 300), (128, 4, 600), (256, 2, 800)]
    print(f"active backend: {backend_name()}")
    header = f"{'case':>18}  {'kernel':>10}  {'numpy ms':>10}  {'numba ms':>10}  {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for p, K, n in cases:
        XT, Y, lam = make_case(p, K, n)
        BT0 = np.zeros((K, p))
        for name, fn, fargs in (
            ("bcd", kernels.bcd_solve, (XT, Y, BT0, lam, 1e-6, 5000)),
            ("pg", kernels.pg_solve, (XT, Y, BT0, lam, 1e-4, 3000, 0.05)),
        ):
            t_np, out_np = time_call(plain(fn), fargs, args.repeats)
            if NUMBA_ENABLED:
                fn(*fargs)  # compile outside the timed region
                t_nb, out_nb = time_call(fn, fargs, args.repeats)
                assert np.array_equal(out_np[0], out_nb[0]), "backend results diverged"
                speed = f"{t_np / t_nb:7.1f}x"
                nb_ms = f"{t_nb * 1e3:10.2f}"
            else:
                speed, nb_ms = "      -", "         -"
            print(
                f"  p={p:<4d} K={K} n={n:<5d}  {name:>10}  {t_np * 1e3:10.2f}  {nb_ms}  {speed}"
            )


if __name__ == "__main__":
    main()
