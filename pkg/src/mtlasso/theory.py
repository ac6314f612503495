"""Closed-form quantities governing support-union recovery.

Given the task covariances and the true coefficient matrix, this module
computes the sparsity-overlap statistic psi, the irrepresentability gap
gamma, restricted-eigenvalue constants, conditional-covariance extremes,
and the achievability/converse sample-size thresholds built from them.
All logarithms are natural.  Matrix inversions go through Cholesky
solves; the one place an explicit inverse norm is needed (d_max) uses
column solves against the identity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .datagen import CovarianceSet
from .errors import DimensionError, DomainError, SingularMatrixError
from .model import CoefficientMatrix

__all__ = [
    "ConditionReport",
    "IrrepResult",
    "RhoBounds",
    "Thresholds",
    "conditional_covariance",
    "psi",
    "psi_single",
    "irrepresentability",
    "rho_bounds",
    "thresholds",
    "psi_bounds_check",
    "rho_p2",
    "condition_report",
]


def _sorted_support(S, p: int) -> list:
    S = sorted(int(j) for j in S)
    if any(j < 0 or j >= p for j in S):
        raise DimensionError(f"support index out of range for p={p}")
    if len(set(S)) != len(S):
        raise DomainError("support contains duplicate indices")
    return S


def _cho(mat: np.ndarray, what: str):
    try:
        return cho_factor(mat, lower=True)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"{what} is singular or not positive definite") from e


def conditional_covariance(cov: np.ndarray, S) -> np.ndarray:
    """Schur complement Sigma_cc - Sigma_cs Sigma_ss^{-1} Sigma_sc: the
    covariance of the off-support coordinates given the support ones."""
    cov = np.asarray(cov, dtype=np.float64)
    p = cov.shape[0]
    if cov.shape != (p, p):
        raise DimensionError("covariance must be square")
    S = _sorted_support(S, p)
    if not S or len(S) >= p:
        raise DomainError("support must be a nonempty proper subset")
    sc = sorted(set(range(p)) - set(S))
    Sss = cov[np.ix_(S, S)]
    Ssc = cov[np.ix_(S, sc)]
    Scc = cov[np.ix_(sc, sc)]
    cf = _cho(Sss, "Sigma_SS")
    return Scc - Ssc.T @ cho_solve(cf, Ssc)


def psi(b_star, covs: CovarianceSet, S) -> float:
    """Sparsity-overlap statistic: max over tasks of
    z_k^T (Sigma_SS^(k))^{-1} z_k with z_k the k-th column of the
    row-normalized coefficient matrix restricted to the support."""
    ents = b_star.entries if isinstance(b_star, CoefficientMatrix) else np.asarray(b_star, float)
    p, K = ents.shape
    if covs.num_tasks != K or covs.p != p:
        raise DimensionError("coefficients and covariances disagree on (p, K)")
    S = _sorted_support(S, p)
    if not S:
        raise DomainError("support must be nonempty")
    rows = ents[S, :]
    norms = np.sqrt((rows**2).sum(axis=1))
    if (norms == 0).any():
        raise DomainError("zero coefficient row inside the declared support")
    Z = rows / norms[:, None]
    best = 0.0
    for k in range(K):
        Sss = covs.matrices[k][np.ix_(S, S)]
        cf = _cho(Sss, f"Sigma_SS^({k})")
        val = float(Z[:, k] @ cho_solve(cf, Z[:, k]))
        best = max(best, val)
    return best


def psi_single(beta, cov: np.ndarray, S) -> float:
    """Single-task overlap statistic sign(beta_S)^T Sigma_SS^{-1}
    sign(beta_S), evaluated over the caller-supplied support (sign
    entries are 0 wherever beta vanishes on it)."""
    beta = np.asarray(beta, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    S = _sorted_support(S, cov.shape[0])
    if not S:
        raise DomainError("support must be nonempty")
    z = np.sign(beta[S])
    Sss = cov[np.ix_(S, S)]
    cf = _cho(Sss, "Sigma_SS")
    return float(z @ cho_solve(cf, z))


@dataclass(frozen=True)
class IrrepResult:
    gamma: float
    a_matrix_inf_norm: float


def irrepresentability(covs: CovarianceSet, S) -> IrrepResult:
    """Worst-case regression of off-support on support columns.

    A[j, s] = max_k |(Sigma_cs^(k) (Sigma_ss^(k))^{-1})_{js}|; returns
    its max row sum and gamma = 1 - that (gamma <= 0 means the
    irrepresentability condition fails)."""
    p = covs.p
    S = _sorted_support(S, p)
    if not S or len(S) >= p:
        raise DomainError("support must be a nonempty proper subset")
    sc = sorted(set(range(p)) - set(S))
    A = np.zeros((len(sc), len(S)))
    for k in range(covs.num_tasks):
        cov = covs.matrices[k]
        Sss = cov[np.ix_(S, S)]
        Ssc = cov[np.ix_(S, sc)]
        cf = _cho(Sss, f"Sigma_SS^({k})")
        M = np.abs(cho_solve(cf, Ssc).T)
        A = np.maximum(A, M)
    inf_norm = float(np.abs(A).sum(axis=1).max())
    return IrrepResult(gamma=1.0 - inf_norm, a_matrix_inf_norm=inf_norm)


@dataclass(frozen=True)
class RhoBounds:
    rho_u: float
    rho_l: float | None


def rho_bounds(covs: CovarianceSet, S) -> RhoBounds:
    """Extremes of the conditional covariances Q^(k) over tasks:
    rho_u = max diagonal entry, rho_l = min over pairs i != j of
    Q_jj + Q_ii - 2 Q_ij.  rho_l is None when the off-support side has
    fewer than two coordinates."""
    rho_u = -np.inf
    rho_l = np.inf
    pairs = False
    for k in range(covs.num_tasks):
        Q = conditional_covariance(covs.matrices[k], S)
        dq = np.diag(Q)
        rho_u = max(rho_u, float(dq.max()))
        m = Q.shape[0]
        if m >= 2:
            pairs = True
            gap = dq[:, None] + dq[None, :] - 2.0 * Q
            gap[np.diag_indices(m)] = np.inf
            rho_l = min(rho_l, float(gap.min()))
    return RhoBounds(rho_u=rho_u, rho_l=rho_l if pairs else None)


@dataclass(frozen=True)
class Thresholds:
    n_achievability: float
    n_converse: float


def thresholds(
    psi_val: float,
    p: int,
    s: int,
    rho_u: float,
    rho_l: float,
    gamma: float,
    v: float,
) -> Thresholds:
    """Sample-size thresholds

        n_ach  = 2 (1+v) psi ln(p-s) rho_u / gamma^2
        n_conv = 2 (1-v) psi ln(p-s) rho_l / (2-gamma)^2

    for a slack constant v > 0; above n_ach recovery succeeds with high
    probability, below n_conv it fails."""
    if not (0.0 < gamma <= 1.0):
        raise DomainError(f"gamma must be in (0, 1], got {gamma}")
    if p <= s:
        raise DomainError("need p > s")
    if v <= 0:
        raise DomainError("v must be positive")
    logterm = float(np.log(p - s))
    return Thresholds(
        n_achievability=2.0 * (1.0 + v) * psi_val * logterm * rho_u / gamma**2,
        n_converse=2.0 * (1.0 - v) * psi_val * logterm * rho_l / (2.0 - gamma) ** 2,
    )


def psi_bounds_check(psi_val: float, s: int, K: int, c_min: float, c_max: float) -> bool:
    """Order bounds s/(K c_max) <= psi <= s/c_min (1e-9 slack)."""
    if s < 1 or K < 1:
        raise DomainError("s and K must be >= 1")
    if not (0 < c_min <= c_max):
        raise DomainError("need 0 < c_min <= c_max")
    return bool(
        s / (K * c_max) - 1e-9 <= psi_val <= s / c_min + 1e-9
    )


def rho_p2(n: int, s: int, lam: float, sigma_max: float, c_min: float, d_max: float) -> float:
    """Estimation-radius proxy

        sqrt(8 sigma_max^2 s ln(s) / (n c_min)) + lam (d_max + 12 s/(c_min sqrt(n)));

    sigma_max is a standard deviation and is squared here.  The ratio of
    this to b_min indicates whether an instance is in the small-error
    regime."""
    if s < 2:
        raise DomainError("need s >= 2 for a positive log")
    if n < 1 or lam < 0 or sigma_max < 0 or c_min <= 0 or d_max < 0:
        raise DomainError("inputs must be positive (lam, sigma, d_max nonnegative)")
    noise = float(np.sqrt(8.0 * sigma_max**2 * s * np.log(s) / (n * c_min)))
    bias = lam * (d_max + 12.0 * s / (c_min * np.sqrt(n)))
    return noise + bias


@dataclass(frozen=True)
class ConditionReport:
    gamma: float
    a_matrix_inf_norm: float
    c_min: float
    c_max: float
    d_max: float
    rho_u: float
    rho_l: float | None
    psi: float
    c1_holds: bool
    c2_holds: bool | None
    c3_holds: bool | None

    def to_json_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "a_matrix_inf_norm": self.a_matrix_inf_norm,
            "c_min": self.c_min,
            "c_max": self.c_max,
            "d_max": self.d_max,
            "rho_u": self.rho_u,
            "rho_l": self.rho_l,
            "psi": self.psi,
            "c1_holds": self.c1_holds,
            "c2_holds": self.c2_holds,
            "c3_holds": self.c3_holds,
        }


def condition_report(
    b_star,
    covs: CovarianceSet,
    S,
    declared_c_min: float | None = None,
    declared_c_max: float | None = None,
    declared_d_max: float | None = None,
) -> ConditionReport:
    """Evaluate every recovery condition on a concrete instance.

    c_min/c_max are the extreme eigenvalues of the restricted
    covariances over tasks; d_max the max inf-operator norm of their
    inverses.  The c2/c3 flags compare against caller-declared bounds
    when given and stay None otherwise (any finite instance satisfies
    the conditions for some constants)."""
    p = covs.p
    S = _sorted_support(S, p)
    if not S or len(S) >= p:
        raise DomainError("support must be a nonempty proper subset")
    c_min, c_max, d_max = np.inf, -np.inf, 0.0
    eye = np.eye(len(S))
    for k in range(covs.num_tasks):
        Sss = covs.matrices[k][np.ix_(S, S)]
        ev = np.linalg.eigvalsh(Sss)
        c_min = min(c_min, float(ev[0]))
        c_max = max(c_max, float(ev[-1]))
        cf = _cho(Sss, f"Sigma_SS^({k})")
        inv = cho_solve(cf, eye)
        d_max = max(d_max, float(np.abs(inv).sum(axis=1).max()))
    irr = irrepresentability(covs, S)
    rho = rho_bounds(covs, S)
    psi_val = psi(b_star, covs, S)
    c2 = None
    if declared_c_min is not None or declared_c_max is not None:
        c2 = True
        if declared_c_min is not None and c_min < declared_c_min:
            c2 = False
        if declared_c_max is not None and c_max > declared_c_max:
            c2 = False
    c3 = None if declared_d_max is None else bool(d_max <= declared_d_max)
    return ConditionReport(
        gamma=irr.gamma,
        a_matrix_inf_norm=irr.a_matrix_inf_norm,
        c_min=c_min,
        c_max=c_max,
        d_max=d_max,
        rho_u=rho.rho_u,
        rho_l=rho.rho_l,
        psi=psi_val,
        c1_holds=bool(irr.gamma > 0.0),
        c2_holds=c2,
        c3_holds=c3,
    )
