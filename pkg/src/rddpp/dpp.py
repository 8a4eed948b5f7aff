"""L-ensemble DPP machinery: kernels, normalizer, greedy MAP inference.

The greedy solver follows the fast conditional-variance formulation: it
maintains one new row of the Cholesky factor of the selected principal
submatrix per accepted item, so each step costs O(m * |selected|) instead of
a fresh factorization.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Sequence, Union

import numpy as np

from .errors import InstanceTooLargeError, InvalidArgumentError, InvalidInputError
from .ratedist import FeatureMatrix

# Best marginal determinant gain below this means the kernel rank is
# numerically exhausted and greedy selection stops early.
RANK_EPS = 1e-12

# Guard rails for the exhaustive MAP oracle.
EXACT_MAX_M = 20
EXACT_MAX_K = 5

PSD_REL_TOL = 1e-8


class PsdKernel:
    """Symmetric positive semi-definite m x m kernel matrix.

    The input is symmetrized and frozen; construction verifies that the
    smallest eigenvalue is no worse than -PSD_REL_TOL relative to
    max(1, largest eigenvalue).
    """

    __slots__ = ("matrix",)

    def __init__(self, matrix: np.ndarray, validate: bool = True):
        mat = np.array(matrix, dtype=np.float64, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise InvalidInputError(f"kernel must be square, got shape {mat.shape}")
        if mat.shape[0] < 1:
            raise InvalidInputError("kernel must have at least one row")
        if not np.all(np.isfinite(mat)):
            raise InvalidInputError("kernel contains non-finite entries")
        mat = (mat + mat.T) / 2.0
        if validate:
            evals = np.linalg.eigvalsh(mat)
            floor = -PSD_REL_TOL * max(1.0, float(evals[-1]))
            if float(evals[0]) < floor:
                raise InvalidInputError(
                    f"kernel is not PSD: min eigenvalue {evals[0]:.3e}"
                )
        mat.setflags(write=False)
        self.matrix = mat

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class GreedyResult:
    """Outcome of greedy MAP selection.

    ``marginal_log_gains`` holds the natural-log determinant gain of each
    accepted item; the sequence is non-increasing.  ``rank_exhausted`` is set
    when the best remaining gain fell below RANK_EPS before ``k`` items were
    collected.
    """

    indices: tuple
    marginal_log_gains: tuple
    k: int
    rank_exhausted: bool = False

    def __len__(self) -> int:
        return len(self.indices)


KernelLike = Union[PsdKernel, "object"]


def _kernel_matrix(L: KernelLike) -> np.ndarray:
    mat = getattr(L, "matrix", None)
    if mat is None:
        raise InvalidArgumentError("expected a kernel object with a .matrix attribute")
    return np.asarray(mat, dtype=np.float64)


def gram_kernel(Z: FeatureMatrix, alpha: float) -> PsdKernel:
    """Sample-side Gram kernel ``alpha * Z^T Z``."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise InvalidArgumentError(f"alpha must be a positive finite real, got {alpha}")
    if Z.n < 1:
        raise InvalidInputError("kernel needs at least one sample")
    return PsdKernel(alpha * (Z.data.T @ Z.data))


def dpp_normalizer(L: PsdKernel) -> float:
    """det(L + I), the sum of det(L_A) over every subset A (empty set -> 1)."""
    mat = _kernel_matrix(L)
    m = mat.shape[0]
    try:
        chol = np.linalg.cholesky(mat + np.eye(m))
        logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    except np.linalg.LinAlgError:
        sign, logdet = np.linalg.slogdet(mat + np.eye(m))
        if sign <= 0 or not math.isfinite(logdet):
            raise InvalidInputError("log-det of L + I failed; kernel badly non-PSD")
    return float(math.exp(logdet))


def subset_log_det(L: PsdKernel, A: Sequence[int]) -> float:
    """Natural-log determinant of the principal submatrix L_A.

    Empty A returns 0 (det of the empty matrix is 1); singular submatrices
    return -inf.
    """
    mat = _kernel_matrix(L)
    idx = np.asarray(list(A), dtype=np.int64)
    if idx.size == 0:
        return 0.0
    if len(set(idx.tolist())) != idx.size:
        raise InvalidArgumentError("subset indices must be distinct")
    if idx.min() < 0 or idx.max() >= mat.shape[0]:
        raise InvalidArgumentError(
            f"subset index out of range [0, {mat.shape[0]})"
        )
    sign, logdet = np.linalg.slogdet(mat[np.ix_(idx, idx)])
    if sign <= 0:
        return float("-inf")
    return float(logdet)


def greedy_map(L: KernelLike, k: int) -> GreedyResult:
    """Greedy MAP inference: repeatedly add the item with the largest
    marginal determinant gain.

    Each accepted item appends one row to an implicit Cholesky factor of the
    selected submatrix; ``di2s`` tracks every candidate's conditional gain.
    Ties break toward the lowest index.  Stops early (flagged, not an error)
    once the best gain drops below RANK_EPS.
    """
    mat = _kernel_matrix(L)
    m = mat.shape[0]
    if not (1 <= k <= m):
        raise InvalidArgumentError(f"k must lie in [1, {m}], got {k}")

    cis = np.zeros((k, m))
    di2s = np.array(np.diag(mat), dtype=np.float64)
    indices: List[int] = []
    gains: List[float] = []
    for step in range(k):
        j = int(np.argmax(di2s))
        best = float(di2s[j])
        if not best > RANK_EPS:
            return GreedyResult(tuple(indices), tuple(gains), k, rank_exhausted=True)
        indices.append(j)
        gains.append(math.log(best))
        if step == k - 1:
            break
        ci = cis[:step, j]
        di = math.sqrt(best)
        eis = (mat[j, :] - ci @ cis[:step, :]) / di
        cis[step, :] = eis
        di2s = di2s - np.square(eis)
        di2s[indices] = -np.inf
    return GreedyResult(tuple(indices), tuple(gains), k, rank_exhausted=False)


def exact_map(L: KernelLike, k: int) -> List[int]:
    """Exhaustive MAP: the size-k subset maximizing det(L_A).

    Only for small instances (m <= 20, k <= 5); ties break lexicographically.
    """
    mat = _kernel_matrix(L)
    m = mat.shape[0]
    if not (1 <= k <= m):
        raise InvalidArgumentError(f"k must lie in [1, {m}], got {k}")
    if m > EXACT_MAX_M or k > EXACT_MAX_K:
        raise InstanceTooLargeError(
            f"exhaustive search limited to m <= {EXACT_MAX_M}, k <= {EXACT_MAX_K}"
        )
    best_det = -np.inf
    best: tuple = ()
    for combo in itertools.combinations(range(m), k):
        idx = np.asarray(combo)
        det = float(np.linalg.det(mat[np.ix_(idx, idx)]))
        if det > best_det:
            best_det = det
            best = combo
    return list(best)
