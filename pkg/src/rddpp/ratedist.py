"""Rate-distortion diversity measures for finite sample sets.

The central quantity is the coding rate of a feature matrix: an estimate of
the number of bits per dimension needed to encode the columns within a
squared-error budget ``eps2``, computed as a log-determinant of a regularized
Gram matrix.  Class-conditional rates and the semantic-diversity score
(total rate minus the class-weighted sum of per-class rates) build on it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyClassError,
    InvalidArgumentError,
    InvalidInputError,
    NumericalError,
)

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)

# Magnitude below which a negative semantic diversity is treated as roundoff
# and clamped to zero; anything more negative raises NumericalError.
SDIV_CLAMP = 1e-8

# Relative floor on Gram eigenvalues before a matrix is declared non-PSD.
PSD_REL_TOL = 1e-8


@dataclass(frozen=True)
class RateConfig:
    """Distortion tolerance for rate computations.

    ``eps2`` is the squared distortion budget; rates are reported in
    bits per dimension (log base 2).
    """

    eps2: float = 0.5

    def __post_init__(self):
        if not (isinstance(self.eps2, (int, float)) and math.isfinite(self.eps2)):
            raise InvalidInputError(f"eps2 must be a finite real, got {self.eps2!r}")
        if self.eps2 <= 0:
            raise InvalidInputError(f"eps2 must be positive, got {self.eps2}")


class FeatureMatrix:
    """A d x n matrix of sample features; columns are samples.

    Optionally carries one integer class label per column.  Data and labels
    are copied and frozen at construction, so instances are immutable and
    safe to share between threads.  ``n == 0`` is allowed (an empty selected
    set); the rate operations themselves require at least one column.
    """

    __slots__ = ("data", "labels", "_n_classes")

    def __init__(
        self,
        data: np.ndarray,
        labels: Optional[Sequence[int]] = None,
        n_classes: Optional[int] = None,
    ):
        arr = np.array(data, dtype=np.float64, copy=True, order="C")
        if arr.ndim != 2:
            raise InvalidInputError(f"feature data must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise InvalidInputError("feature dimension d must be at least 1")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise InvalidInputError(
                f"non-finite entry at row {bad[0]}, column {bad[1]}"
            )
        arr.setflags(write=False)
        self.data = arr

        if labels is None:
            self.labels = None
            self._n_classes = n_classes
        else:
            lab = np.array(labels, copy=True)
            if lab.ndim != 1 or lab.shape[0] != arr.shape[1]:
                raise InvalidInputError(
                    f"label count {lab.shape} does not match column count {arr.shape[1]}"
                )
            if lab.size and not np.issubdtype(lab.dtype, np.integer):
                flab = lab.astype(np.float64)
                if not np.all(flab == np.floor(flab)):
                    raise InvalidInputError("labels must be integers")
            lab = lab.astype(np.int64)
            if lab.size and lab.min() < 0:
                raise InvalidInputError("labels must be nonnegative class indices")
            inferred = int(lab.max()) + 1 if lab.size else 0
            if n_classes is None:
                n_classes = inferred
            elif inferred > n_classes:
                raise InvalidInputError(
                    f"label {int(lab.max())} outside [0, {n_classes})"
                )
            lab.setflags(write=False)
            self.labels = lab
            self._n_classes = n_classes

    @classmethod
    def from_rows(
        cls,
        rows: np.ndarray,
        labels: Optional[Sequence[int]] = None,
        n_classes: Optional[int] = None,
    ) -> "FeatureMatrix":
        """Build from an (n x d) samples-as-rows array."""
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2:
            raise InvalidInputError(f"row data must be 2-D, got shape {rows.shape}")
        return cls(rows.T, labels=labels, n_classes=n_classes)

    @property
    def d(self) -> int:
        return self.data.shape[0]

    @property
    def n(self) -> int:
        return self.data.shape[1]

    @property
    def n_classes(self) -> Optional[int]:
        return self._n_classes

    def class_indices(self, class_index: int) -> np.ndarray:
        if self.labels is None:
            raise InvalidInputError("matrix carries no labels")
        return np.flatnonzero(self.labels == class_index)

    def take(self, columns: Sequence[int]) -> "FeatureMatrix":
        """New matrix from the given columns (labels follow)."""
        cols = np.asarray(columns, dtype=np.int64)
        if cols.size and (cols.min() < 0 or cols.max() >= self.n):
            raise InvalidArgumentError(f"column index out of range [0, {self.n})")
        labels = self.labels[cols] if self.labels is not None else None
        return FeatureMatrix(
            self.data[:, cols], labels=labels, n_classes=self._n_classes
        )

    def append_columns(
        self,
        columns: np.ndarray,
        labels: Optional[Sequence[int]] = None,
    ) -> "FeatureMatrix":
        """New matrix with extra columns appended on the right."""
        cols = np.asarray(columns, dtype=np.float64)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.shape[0] != self.d:
            raise InvalidInputError(
                f"appended columns have dimension {cols.shape[0]}, expected {self.d}"
            )
        data = np.hstack([self.data, cols])
        if self.labels is None and self.n > 0:
            if labels is not None:
                raise InvalidInputError("cannot append labeled columns to unlabeled data")
            new_labels = None
        elif self.labels is None:  # empty unlabeled matrix: labels decide
            new_labels = None if labels is None else np.asarray(labels)
        else:
            if labels is None:
                raise InvalidInputError("labels required when appending to labeled data")
            new_labels = np.concatenate([self.labels, np.asarray(labels, dtype=np.int64)])
        n_classes = self._n_classes
        if new_labels is not None and n_classes is not None:
            n_classes = max(n_classes, int(np.max(new_labels)) + 1)
        return FeatureMatrix(data, labels=new_labels, n_classes=n_classes)


def logdet_bits(gram: np.ndarray, alpha: float) -> float:
    """log2 det(I + alpha * gram) for a symmetric PSD ``gram``.

    Cholesky first; on failure, eigendecomposition with negative eigenvalues
    clamped at zero.  Eigenvalues below -PSD_REL_TOL * max(1, lambda_max)
    mean the matrix is not a numerical Gram and raise NumericalError.
    """
    m = gram.shape[0]
    if m == 0:
        return 0.0
    mat = np.eye(m) + alpha * gram
    try:
        chol = np.linalg.cholesky(mat)
        return float(2.0 * np.sum(np.log(np.diag(chol))) / _LN2)
    except np.linalg.LinAlgError:
        evals = np.linalg.eigvalsh(gram)
        floor = -PSD_REL_TOL * max(1.0, float(evals[-1]))
        if float(evals[0]) < floor:
            raise NumericalError(
                f"Gram matrix is not PSD: min eigenvalue {evals[0]:.3e}"
            ) from None
        return float(np.sum(np.log1p(alpha * np.clip(evals, 0.0, None))) / _LN2)


def _symmetrize(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.T) / 2.0


def coding_rate(Z: FeatureMatrix, cfg: RateConfig = RateConfig(), form: str = "auto") -> float:
    """Coding rate of ``Z`` in bits per dimension.

    Evaluates ``0.5 * log2 det(I + d/(n*eps2) * G)`` where ``G`` is the
    feature-side Gram (``Z Z^T``, "primal") or the sample-side Gram
    (``Z^T Z``, "dual"); both give the same value since the two Grams share
    nonzero eigenvalues.  ``form="auto"`` picks the smaller one.
    """
    if Z.n < 1:
        raise InvalidInputError("coding rate requires at least one sample")
    if form == "auto":
        form = "primal" if Z.d <= Z.n else "dual"
    if form not in ("primal", "dual"):
        raise InvalidArgumentError(f"unknown form {form!r}")
    alpha = Z.d / (Z.n * cfg.eps2)
    if form == "primal":
        gram = _symmetrize(Z.data @ Z.data.T)
    else:
        gram = _symmetrize(Z.data.T @ Z.data)
    rate = 0.5 * logdet_bits(gram, alpha)
    return max(rate, 0.0)


def hadamard_upper_bound(Z: FeatureMatrix, cfg: RateConfig = RateConfig()) -> float:
    """Diagonal (Hadamard) upper estimate of the coding rate.

    ``sum_i log2(1 + d/(n*eps2) * (Z Z^T)_ii)``; always at least
    ``coding_rate(Z)`` because det(I + A) <= prod(1 + A_ii) for PSD A and
    the rate carries an extra factor 1/2.
    """
    if Z.n < 1:
        raise InvalidInputError("upper bound requires at least one sample")
    alpha = Z.d / (Z.n * cfg.eps2)
    sq_row_sums = np.sum(Z.data * Z.data, axis=1)
    return float(np.sum(np.log1p(alpha * sq_row_sums)) / _LN2)


def class_conditional_rate(
    Z: FeatureMatrix, class_index: int, cfg: RateConfig = RateConfig()
) -> float:
    """Coding rate of the columns belonging to one class.

    Same formula as :func:`coding_rate` restricted to the class columns,
    with the sample count replaced by the class size.
    """
    if Z.labels is None:
        raise InvalidInputError("class-conditional rate requires labels")
    cols = Z.class_indices(class_index)
    if cols.size == 0:
        raise EmptyClassError(f"class {class_index} has no samples")
    return coding_rate(Z.take(cols), cfg)


def semantic_diversity(Z: FeatureMatrix, cfg: RateConfig = RateConfig()) -> float:
    """Total coding rate minus the class-weighted sum of per-class rates.

    Nonnegative up to roundoff: values in [-SDIV_CLAMP, 0) are clamped to 0
    and logged, anything more negative raises NumericalError.
    """
    if Z.labels is None:
        raise InvalidInputError("semantic diversity requires labels")
    if Z.n < 1:
        raise InvalidInputError("semantic diversity requires at least one sample")
    total = coding_rate(Z, cfg)
    class_sum = 0.0
    for c in np.unique(Z.labels):
        weight = Z.class_indices(int(c)).size / Z.n
        class_sum += weight * class_conditional_rate(Z, int(c), cfg)
    sdiv = total - class_sum
    if sdiv < 0.0:
        if sdiv < -SDIV_CLAMP:
            raise NumericalError(
                f"semantic diversity {sdiv:.3e} below the roundoff clamp"
            )
        logger.debug("clamping tiny negative semantic diversity %.3e to 0", sdiv)
        sdiv = 0.0
    return sdiv
