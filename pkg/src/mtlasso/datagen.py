"""Synthetic problem generation: covariance sets, true coefficient
matrices, and Gaussian problem instances with deterministic seeding.

Index conventions: the support formulas below are stated 1-based (first
feature is 1); they are converted to 0-based indices here, at this one
boundary, and everything downstream is 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, SpdError
from .model import CoefficientMatrix, GroundTruth, MvmrProblem, NoiseSpec

__all__ = [
    "CovarianceSet",
    "CovarianceModel",
    "CoefficientModel",
    "build_covariance",
    "build_truth",
    "sample_problem",
    "lambda_rule",
    "rng_from_seed",
]

COVARIANCE_KINDS = ("identity", "tridiag_shared", "tridiag_per_task")
COEFFICIENT_KINDS = ("identical_uniform", "varying_same_support", "overlap_model")
SUPPORT_RULES = ("stride_8", "stride_16_pair", "disjoint_16", "overlap_24", "custom")


@dataclass(frozen=True)
class CovarianceSet:
    """K symmetric positive-definite p x p matrices, one per task.

    min_eigenvalues caches the SPD certificate; diag_shifts records any
    diagonal repair applied during construction (0 when none).
    """

    matrices: np.ndarray
    min_eigenvalues: tuple
    diag_shifts: tuple

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionError(f"matrices must be (K, p, p), got {mats.shape}")
        for k in range(mats.shape[0]):
            if not np.allclose(mats[k], mats[k].T, atol=1e-12, rtol=0.0):
                raise SpdError(f"covariance {k} is not symmetric to 1e-12")
        evs = tuple(float(v) for v in self.min_eigenvalues)
        if len(evs) != mats.shape[0]:
            raise DimensionError("one min eigenvalue per matrix required")
        if any(v <= 0 for v in evs):
            raise SpdError(f"min eigenvalues must be positive, got {evs}")
        mats = np.ascontiguousarray(mats)
        mats.flags.writeable = False
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "min_eigenvalues", evs)
        object.__setattr__(self, "diag_shifts", tuple(float(v) for v in self.diag_shifts))

    @property
    def num_tasks(self) -> int:
        return self.matrices.shape[0]

    @property
    def p(self) -> int:
        return self.matrices.shape[1]

    def cholesky_factors(self) -> np.ndarray:
        """Lower Cholesky factors, shape (K, p, p)."""
        return np.linalg.cholesky(self.matrices)


@dataclass(frozen=True)
class CovarianceModel:
    """Covariance family selector.

    identity         -> I_p for every task.
    tridiag_shared   -> unit diagonal, every adjacent off-diagonal 1.
    tridiag_per_task -> unit diagonal; the off-diagonal linking positions
                        a and a+1 (1-based) is 1 + 1/k when a is odd and
                        1 - 0.8/k when a is even, for task k = 1..K.
    """

    kind: str = "identity"

    def __post_init__(self):
        if self.kind not in COVARIANCE_KINDS:
            raise ConfigError(f"unknown covariance kind {self.kind!r}")


def build_covariance(
    model: CovarianceModel, p: int, K: int, spd_floor: float = 0.05
) -> CovarianceSet:
    """Build the covariance set, repairing indefiniteness by a diagonal
    shift: if min-eig(T) < spd_floor the returned matrix is
    T + (spd_floor - min_eig) * I and the shift is recorded."""
    if K < 1:
        raise ConfigError("K must be >= 1")
    if spd_floor <= 0:
        raise DomainError("spd_floor must be positive")
    if model.kind == "identity":
        if p < 1:
            raise DimensionError("p must be >= 1")
        eye = np.eye(p)
        return CovarianceSet(
            matrices=np.broadcast_to(eye, (K, p, p)).copy(),
            min_eigenvalues=(1.0,) * K,
            diag_shifts=(0.0,) * K,
        )
    if p < 2:
        raise DimensionError("tridiagonal models need p >= 2")
    mats = np.zeros((K, p, p))
    mins, shifts = [], []
    for k in range(K):
        T = np.eye(p)
        for i in range(p - 1):
            a = i + 1  # 1-based lower index of the adjacent pair
            if model.kind == "tridiag_shared":
                off = 1.0
            else:
                off = 1.0 + 1.0 / (k + 1) if a % 2 == 1 else 1.0 - 0.8 / (k + 1)
            T[i, i + 1] = off
            T[i + 1, i] = off
        lam_min = float(np.linalg.eigvalsh(T)[0])
        shift = 0.0
        if lam_min < spd_floor:
            shift = spd_floor - lam_min
            T[np.diag_indices(p)] += shift
            lam_min = spd_floor
        mats[k] = T
        mins.append(lam_min)
        shifts.append(shift)
    return CovarianceSet(matrices=mats, min_eigenvalues=tuple(mins), diag_shifts=tuple(shifts))


@dataclass(frozen=True)
class CoefficientModel:
    """True-coefficient family selector.

    identical_uniform     -> every supported entry equals scale (default
                             1/sqrt(K)), any support rule.
    varying_same_support  -> stride_16_pair support; entries at 1-based
                             positions 16t get scale*(1 + k*perturbation)
                             and positions 16t+8 get
                             scale*(1 - k*perturbation) for task k=1..K.
    overlap_model         -> overlap_24 support, K=2; exclusive entries
                             are 1 and the shared entries are
                             scale*(1 +/- perturbation).
    """

    kind: str = "identical_uniform"
    support_rule: str = "stride_8"
    perturbation: float = 1.0 / 16.0
    scale: float | None = None
    custom_supports: tuple = field(default=())

    def __post_init__(self):
        if self.kind not in COEFFICIENT_KINDS:
            raise ConfigError(f"unknown coefficient kind {self.kind!r}")
        if self.support_rule not in SUPPORT_RULES:
            raise ConfigError(f"unknown support rule {self.support_rule!r}")
        if self.kind == "varying_same_support" and self.support_rule != "stride_16_pair":
            raise ConfigError("varying_same_support requires support_rule='stride_16_pair'")
        if self.kind == "overlap_model" and self.support_rule != "overlap_24":
            raise ConfigError("overlap_model requires support_rule='overlap_24'")
        if self.support_rule == "custom":
            sup = tuple(tuple(int(j) for j in s) for s in self.custom_supports)
            if not sup:
                raise ConfigError("custom support rule needs custom_supports")
            object.__setattr__(self, "custom_supports", sup)


def _supports_for_rule(model: CoefficientModel, p: int, K: int) -> list:
    """Per-task 0-based support index lists for the named rule."""
    rule = model.support_rule
    if rule == "stride_8":
        # 1-based {8t+1 : t >= 0}
        s = list(range(0, p, 8))
        return [s] * K
    if rule == "stride_16_pair":
        # 1-based {16t : t >= 1} union {16t+8 : t >= 0}; the first set
        # starts at t=1 since 1-based index 0 does not exist.
        s = sorted(set(range(15, p, 16)) | set(range(7, p, 16)))
        if not s:
            raise ConfigError(f"stride_16_pair produces an empty support for p={p}")
        return [s] * K
    if rule == "disjoint_16":
        if K != 2:
            raise ConfigError("disjoint_16 is a two-task construction")
        # 1-based {16t+1} vs {16t+2}
        return [list(range(0, p, 16)), list(range(1, p, 16))]
    if rule == "overlap_24":
        if K != 2:
            raise ConfigError("overlap_24 is a two-task construction")
        # 1-based {24t+1, 24t+2} vs {24t+2, 24t+3}
        s1 = sorted(set(range(0, p, 24)) | set(range(1, p, 24)))
        s2 = sorted(set(range(1, p, 24)) | set(range(2, p, 24)))
        return [s1, s2]
    # custom
    sup = [list(s) for s in model.custom_supports]
    if len(sup) != K:
        raise ConfigError(f"{len(sup)} custom supports for K={K} tasks")
    for s in sup:
        if any(j < 0 or j >= p for j in s):
            raise ConfigError(f"custom support index out of range for p={p}")
    return sup


def build_truth(model: CoefficientModel, p: int, K: int) -> GroundTruth:
    """Construct the true coefficient matrix and its support structure."""
    if p < 1 or K < 1:
        raise ConfigError("p and K must be >= 1")
    supports = _supports_for_rule(model, p, K)
    scale = model.scale if model.scale is not None else 1.0 / np.sqrt(K)
    B = np.zeros((p, K))
    if model.kind == "identical_uniform":
        for k in range(K):
            B[supports[k], k] = scale
    elif model.kind == "varying_same_support":
        plus = set(range(15, p, 16))  # 1-based 16t
        for k in range(K):
            kk = k + 1
            for j in supports[k]:
                sign = 1.0 if j in plus else -1.0
                B[j, k] = scale * (1.0 + sign * kk * model.perturbation)
    else:  # overlap_model
        shared = sorted(set(supports[0]) & set(supports[1]))
        for j in supports[0]:
            B[j, 0] = scale * (1.0 + model.perturbation) if j in shared else 1.0
        for j in supports[1]:
            B[j, 1] = scale * (1.0 - model.perturbation) if j in shared else 1.0
    if any(len(s) == 0 for s in supports):
        raise ConfigError(f"support rule {model.support_rule!r} is empty at p={p}")
    truth = GroundTruth(
        b_star=CoefficientMatrix(entries=B, role="truth"),
        support_union=tuple(sorted(set().union(*supports))),
        per_task_supports=tuple(tuple(s) for s in supports),
    )
    return truth


def rng_from_seed(seed: int) -> np.random.Generator:
    """PCG64 generator seeded through SeedSequence; the documented RNG
    for every sampling routine in this package."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def sample_problem(
    truth: GroundTruth,
    covs: CovarianceSet,
    noise: NoiseSpec,
    n: int,
    seed: int,
) -> MvmrProblem:
    """Draw one problem instance.

    Design rows are L_k @ z with z standard normal and L_k the lower
    Cholesky factor of the task covariance; noise entries are i.i.d.
    N(0, sigma_k^2).  Identical seed -> bit-identical problem.  Tasks are
    drawn in order k = 0..K-1 from a single stream.
    """
    K = truth.b_star.num_tasks
    p = truth.b_star.p
    if covs.num_tasks != K or len(noise.sigma_w) != K:
        raise DimensionError("truth, covariances and noise disagree on K")
    if covs.p != p:
        raise DimensionError("truth and covariances disagree on p")
    if n < 1:
        raise DomainError("n must be >= 1")
    try:
        Ls = covs.cholesky_factors()
    except np.linalg.LinAlgError as e:  # pragma: no cover - guarded by invariant
        raise SpdError("covariance is not positive definite") from e
    rng = rng_from_seed(seed)
    X = np.empty((K, n, p))
    Y = np.empty((K, n))
    for k in range(K):
        Z = rng.standard_normal((n, p))
        X[k] = Z @ Ls[k].T
        W = noise.sigma_w[k] * rng.standard_normal(n)
        Y[k] = X[k] @ truth.b_star.entries[:, k] + W
    return MvmrProblem(designs=X, responses=Y)


def lambda_rule(p: int, s: int, n: int) -> float:
    """Penalty level 3.5 * sqrt(ln(p - s) * ln(s) / n)."""
    if s <= 1 or p <= s:
        raise DomainError(f"need p > s >= 2, got p={p}, s={s}")
    if p - s < 2:
        raise DomainError(f"need p - s >= 2 for a positive log, got p-s={p - s}")
    if n < 1:
        raise DomainError("n must be >= 1")
    return 3.5 * float(np.sqrt(np.log(p - s) * np.log(s) / n))
