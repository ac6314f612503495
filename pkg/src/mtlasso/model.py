"""Core data model for multi-task sparse regression.

K linear regression tasks share a common feature dimension p and sample
count n.  Coefficients live in a p x K matrix whose rows are feature
groups shared across tasks; the l1/l2 block norm couples the tasks.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DimensionError, DomainError, UnsupportedNormError

__all__ = [
    "MvmrProblem",
    "CoefficientMatrix",
    "GroundTruth",
    "NoiseSpec",
    "RecoveryCheck",
    "block_norm",
    "objective",
    "kkt_residual",
    "loss_gradient",
    "support_of",
    "recovery_check",
]


def _as_float_array(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if np.isnan(arr).any():
        raise DataError(f"{name} contains NaN")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MvmrProblem:
    """K regression tasks: responses[k] = designs[k] @ beta_k + noise.

    designs has shape (K, n, p), responses has shape (K, n).  Instances
    are immutable and safe to share across workers.
    """

    designs: np.ndarray
    responses: np.ndarray

    def __post_init__(self):
        X = _as_float_array(self.designs, "designs")
        Y = _as_float_array(self.responses, "responses")
        if X.ndim != 3:
            raise DimensionError(f"designs must be (K, n, p), got shape {X.shape}")
        if Y.ndim != 2:
            raise DimensionError(f"responses must be (K, n), got shape {Y.shape}")
        K, n, p = X.shape
        if K < 1 or n < 1 or p < 1:
            raise DimensionError(f"need K, n, p >= 1, got {X.shape}")
        if Y.shape != (K, n):
            raise DimensionError(
                f"responses shape {Y.shape} does not match designs {(K, n)}"
            )
        object.__setattr__(self, "designs", _freeze(X))
        object.__setattr__(self, "responses", _freeze(Y))

    @property
    def num_tasks(self) -> int:
        return self.designs.shape[0]

    @property
    def samples(self) -> int:
        return self.designs.shape[1]

    @property
    def dim(self) -> int:
        return self.designs.shape[2]

    def designs_by_feature(self) -> np.ndarray:
        """Transposed copy (K, p, n) with contiguous feature columns."""
        return np.ascontiguousarray(self.designs.transpose(0, 2, 1))

    def to_json_dict(self) -> dict:
        return {
            "K": self.num_tasks,
            "n": self.samples,
            "p": self.dim,
            "designs": self.designs.tolist(),
            "responses": self.responses.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MvmrProblem":
        return cls(designs=np.asarray(d["designs"]), responses=np.asarray(d["responses"]))


@dataclass(frozen=True)
class CoefficientMatrix:
    """p x K coefficient matrix; row i is the feature group B_i, column k
    the regression vector of task k.  role is 'estimate' or 'truth'."""

    entries: np.ndarray
    role: str = "estimate"

    def __post_init__(self):
        arr = _as_float_array(self.entries, "entries")
        if arr.ndim != 2:
            raise DimensionError(f"entries must be 2-D (p, K), got shape {arr.shape}")
        if self.role not in ("estimate", "truth"):
            raise DomainError(f"role must be 'estimate' or 'truth', got {self.role!r}")
        object.__setattr__(self, "entries", _freeze(arr))

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    @property
    def num_tasks(self) -> int:
        return self.entries.shape[1]

    def row_norms(self) -> np.ndarray:
        return np.sqrt((self.entries**2).sum(axis=1))

    def column(self, k: int) -> np.ndarray:
        return self.entries[:, k]

    # serialization: CSV is p rows x K columns, 17 significant digits
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.entries:
            w.writerow([format(v, ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, role: str = "estimate") -> "CoefficientMatrix":
        rows = [[float(v) for v in row] for row in csv.reader(io.StringIO(text)) if row]
        return cls(entries=np.asarray(rows), role=role)

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "K": self.num_tasks,
            "entries": [float(v) for v in self.entries.ravel()],
        }

    @classmethod
    def from_json_dict(cls, d: dict, role: str = "estimate") -> "CoefficientMatrix":
        arr = np.asarray(d["entries"], dtype=np.float64).reshape(d["p"], d["K"])
        return cls(entries=arr, role=role)


@dataclass(frozen=True)
class GroundTruth:
    """True coefficients with their support structure.

    support_union is the sorted set of rows of b_star with nonzero l2
    norm; b_min is the smallest row norm over the union.
    """

    b_star: CoefficientMatrix
    support_union: tuple
    per_task_supports: tuple
    b_min: float = field(default=0.0)

    def __post_init__(self):
        ents = self.b_star.entries
        union = tuple(sorted(int(j) for j in self.support_union))
        per_task = tuple(tuple(sorted(int(j) for j in s)) for s in self.per_task_supports)
        if len(per_task) != self.b_star.num_tasks:
            raise DimensionError(
                f"{len(per_task)} per-task supports for {self.b_star.num_tasks} tasks"
            )
        from_tasks = sorted(set().union(*per_task)) if per_task else []
        if list(union) != from_tasks:
            raise DomainError("support_union is not the union of per-task supports")
        norms = np.sqrt((ents**2).sum(axis=1))
        nonzero = [int(j) for j in np.nonzero(norms > 0.0)[0]]
        if list(union) != nonzero:
            raise DomainError("support_union does not match nonzero rows of b_star")
        bmin = float(norms[list(union)].min()) if union else 0.0
        object.__setattr__(self, "support_union", union)
        object.__setattr__(self, "per_task_supports", per_task)
        object.__setattr__(self, "b_min", bmin)

    @property
    def s(self) -> int:
        return len(self.support_union)

    @classmethod
    def from_matrix(cls, b_star: CoefficientMatrix) -> "GroundTruth":
        """Derive all support structure from the matrix itself."""
        ents = b_star.entries
        per_task = tuple(
            tuple(int(j) for j in np.nonzero(ents[:, k] != 0.0)[0])
            for k in range(b_star.num_tasks)
        )
        union = tuple(sorted(set().union(*per_task))) if per_task else ()
        return cls(b_star=b_star, support_union=union, per_task_supports=per_task)


@dataclass(frozen=True)
class NoiseSpec:
    """Per-task noise standard deviations.

    Standard deviations are stored; everything that needs a variance
    squares them explicitly.
    """

    sigma_w: tuple

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigma_w)
        if len(sig) < 1:
            raise DimensionError("need at least one task noise level")
        if any(s < 0 for s in sig):
            raise DomainError("noise standard deviations must be nonnegative")
        object.__setattr__(self, "sigma_w", sig)

    @property
    def sigma_max(self) -> float:
        return max(self.sigma_w)

    @classmethod
    def uniform(cls, sigma: float, num_tasks: int) -> "NoiseSpec":
        return cls(sigma_w=(float(sigma),) * num_tasks)


def block_norm(B, a, b) -> float:
    """l_a/l_b block norm: l_b within each row, then l_a across rows.

    Supported exponents are 1, 2 and inf for both levels, with the usual
    max convention for inf.
    """
    ents = B.entries if isinstance(B, CoefficientMatrix) else np.asarray(B, float)
    if ents.ndim != 2 or ents.size == 0:
        raise DimensionError("block_norm needs a nonempty 2-D matrix")
    supported = (1, 2, np.inf)
    if a not in supported or b not in supported:
        raise UnsupportedNormError(f"unsupported exponent pair (a={a}, b={b})")
    absent = np.abs(ents)
    if b == np.inf:
        inner = absent.max(axis=1)
    elif b == 2:
        inner = np.sqrt((absent**2).sum(axis=1))
    else:
        inner = absent.sum(axis=1)
    if a == np.inf:
        return float(inner.max())
    if a == 2:
        return float(np.sqrt((inner**2).sum()))
    return float(inner.sum())


def _check_pair(problem: MvmrProblem, B) -> np.ndarray:
    ents = B.entries if isinstance(B, CoefficientMatrix) else np.asarray(B, float)
    if ents.shape != (problem.dim, problem.num_tasks):
        raise DimensionError(
            f"coefficients shape {ents.shape} does not match problem "
            f"({problem.dim}, {problem.num_tasks})"
        )
    return ents


def objective(problem: MvmrProblem, B, lam: float) -> float:
    """(1/2n) sum_k ||Y_k - X_k beta_k||^2 + lam * l1/l2 norm of B."""
    ents = _check_pair(problem, B)
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    n = problem.samples
    rss = 0.0
    for k in range(problem.num_tasks):
        r = problem.responses[k] - problem.designs[k] @ ents[:, k]
        rss += float(r @ r)
    return rss / (2.0 * n) + lam * block_norm(ents, 1, 2)


def loss_gradient(problem: MvmrProblem, B) -> np.ndarray:
    """Gradient of the smooth loss, shape (p, K):
    G[j, k] = -(1/n) X_j_k^T (Y_k - X_k beta_k)."""
    ents = _check_pair(problem, B)
    n = problem.samples
    G = np.empty_like(ents)
    for k in range(problem.num_tasks):
        r = problem.responses[k] - problem.designs[k] @ ents[:, k]
        G[:, k] = -(problem.designs[k].T @ r) / n
    return G


def kkt_residual(problem: MvmrProblem, B, lam: float) -> float:
    """Max row-wise l2 violation of the stationarity condition.

    Nonzero rows must satisfy G_j + lam * B_j/||B_j|| = 0; zero rows need
    ||G_j|| <= lam.  Zero exactly when B minimizes the objective.
    """
    if lam <= 0:
        raise DomainError("lambda must be positive")
    ents = _check_pair(problem, B)
    G = loss_gradient(problem, ents)
    worst = 0.0
    for j in range(ents.shape[0]):
        rn = float(np.sqrt(ents[j] @ ents[j]))
        if rn > 0.0:
            v = G[j] + lam * ents[j] / rn
            viol = float(np.sqrt(v @ v))
        else:
            viol = max(0.0, float(np.sqrt(G[j] @ G[j])) - lam)
        worst = max(worst, viol)
    return worst


def support_of(B, zero_tol: float = 0.0) -> tuple:
    """Indices of rows whose l2 norm strictly exceeds zero_tol."""
    if zero_tol < 0:
        raise DomainError("zero_tol must be nonnegative")
    ents = B.entries if isinstance(B, CoefficientMatrix) else np.asarray(B, float)
    norms = np.sqrt((ents**2).sum(axis=1))
    return tuple(int(j) for j in np.nonzero(norms > zero_tol)[0])


@dataclass(frozen=True)
class RecoveryCheck:
    support_match: bool
    linf_l2_error: float


def recovery_check(estimate, truth: GroundTruth, zero_tol: float = 0.0) -> RecoveryCheck:
    """Exact support-union match plus the l_inf/l2 estimation error."""
    est = estimate.entries if isinstance(estimate, CoefficientMatrix) else np.asarray(estimate, float)
    if est.shape != truth.b_star.entries.shape:
        raise DimensionError(
            f"estimate shape {est.shape} != truth shape {truth.b_star.entries.shape}"
        )
    match = support_of(est, zero_tol) == truth.support_union
    diff = est - truth.b_star.entries
    err = float(np.sqrt((diff**2).sum(axis=1)).max()) if diff.size else 0.0
    return RecoveryCheck(support_match=bool(match), linf_l2_error=err)
