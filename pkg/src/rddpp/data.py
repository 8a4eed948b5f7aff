"""Feature ingestion, packet construction, synthetic data, and phase scans.

File contracts: feature CSVs are UTF-8, comma-separated, one sample per row,
with an optional header auto-detected by a non-numeric first row; labels live
in a separate single-column integer file.  Floats are written with 17
significant digits so save/load round-trips are bit-exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dpp import PsdKernel, greedy_map
from .errors import InvalidArgumentError, InvalidInputError, ParseError
from .ratedist import FeatureMatrix, RateConfig, logdet_bits

_LN2 = math.log(2.0)

DISTRIBUTIONS = (
    "gaussian",
    "uniform",
    "beta",
    "binomial",
    "exponential",
    "rayleigh",
    "poisson",
)


@dataclass(frozen=True)
class Packet:
    """A group of samples shipped as one unit.

    ``feature`` is the concatenation of per-class mean vectors (zero block
    for classes absent from the packet), L2-normalized; length d * c_T.
    All-zero features are left unnormalized and flagged as degenerate.
    """

    sample_indices: tuple
    feature: np.ndarray
    class_counts: np.ndarray

    @property
    def majority_class(self) -> int:
        return int(np.argmax(self.class_counts))

    @property
    def degenerate(self) -> bool:
        return float(np.linalg.norm(self.feature)) == 0.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for an i.i.d. synthetic feature matrix (d rows, n columns)."""

    distribution: str
    n: int
    d: int
    seed: int = 0
    a: float = 1.0       # beta
    b: float = 5.0       # beta
    trials: int = 10     # binomial
    p: float = 0.5       # binomial
    lam: float = 1.0     # exponential / poisson
    sigma: float = 1.0   # rayleigh

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidArgumentError(
                f"unknown distribution {self.distribution!r}; "
                f"choose from {', '.join(DISTRIBUTIONS)}"
            )
        if self.n < 1 or self.d < 1:
            raise InvalidArgumentError("n and d must be at least 1")
        if self.distribution == "beta" and (self.a <= 0 or self.b <= 0):
            raise InvalidArgumentError("beta parameters a, b must be positive")
        if self.distribution == "binomial" and not (
            self.trials >= 1 and 0.0 <= self.p <= 1.0
        ):
            raise InvalidArgumentError("binomial needs trials >= 1 and p in [0, 1]")
        if self.distribution in ("exponential", "poisson") and self.lam <= 0:
            raise InvalidArgumentError("lambda must be positive")
        if self.distribution == "rayleigh" and self.sigma <= 0:
            raise InvalidArgumentError("sigma must be positive")


def generate_synthetic(spec: SyntheticSpec) -> FeatureMatrix:
    """Sample a d x n matrix with i.i.d. entries from the named distribution."""
    rng = np.random.default_rng(spec.seed)
    shape = (spec.d, spec.n)
    if spec.distribution == "gaussian":
        data = rng.standard_normal(shape)
    elif spec.distribution == "uniform":
        data = rng.random(shape)
    elif spec.distribution == "beta":
        data = rng.beta(spec.a, spec.b, size=shape)
    elif spec.distribution == "binomial":
        data = rng.binomial(spec.trials, spec.p, size=shape).astype(np.float64)
    elif spec.distribution == "exponential":
        data = rng.exponential(scale=1.0 / spec.lam, size=shape)
    elif spec.distribution == "rayleigh":
        data = rng.rayleigh(scale=spec.sigma, size=shape)
    elif spec.distribution == "poisson":
        data = rng.poisson(lam=spec.lam, size=shape).astype(np.float64)
    else:  # pragma: no cover - guarded in SyntheticSpec
        raise InvalidArgumentError(spec.distribution)
    return FeatureMatrix(data)


# ---------------------------------------------------------------------------
# CSV feature/label files
# ---------------------------------------------------------------------------


def _format_float(x: float) -> str:
    return format(float(x), ".17g")


def _parse_float(token: str, row: int, col: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ParseError(
            f"non-numeric cell {token!r} at row {row}, column {col}"
        ) from None


def load_features(path: str, label_path: Optional[str] = None) -> FeatureMatrix:
    """Read a samples-as-rows CSV (optional header) into a d x n matrix.

    Errors name the offending row/column.  A label file attaches one integer
    class per sample.
    """
    rows: List[List[float]] = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle if ln.strip() != ""]
    start = 0
    if lines:
        first = lines[0].split(",")
        numeric = True
        for tok in first:
            try:
                float(tok)
            except ValueError:
                numeric = False
                break
        if not numeric:
            start = 1  # header row
    width = None
    for lineno, line in enumerate(lines[start:], start=start + 1):
        tokens = line.split(",")
        if width is None:
            width = len(tokens)
        elif len(tokens) != width:
            raise ParseError(
                f"{path}: ragged row {lineno}: {len(tokens)} cells, expected {width}"
            )
        rows.append(
            [_parse_float(tok, lineno, col + 1) for col, tok in enumerate(tokens)]
        )
    if not rows:
        raise ParseError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)

    labels = None
    if label_path is not None:
        labels = load_labels(label_path)
        if len(labels) != data.shape[0]:
            raise InvalidInputError(
                f"{label_path}: {len(labels)} labels for {data.shape[0]} samples"
            )
    return FeatureMatrix.from_rows(data, labels=labels)


def load_labels(path: str) -> List[int]:
    labels: List[int] = []
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.strip() for ln in handle if ln.strip() != ""]
    start = 0
    if lines:
        try:
            int(lines[0])
        except ValueError:
            start = 1  # header row
    for lineno, line in enumerate(lines[start:], start=start + 1):
        try:
            labels.append(int(line))
        except ValueError:
            raise ParseError(
                f"{path}: non-integer label {line!r} at row {lineno}"
            ) from None
    if not labels:
        raise ParseError(f"{path}: no labels")
    return labels


def save_features(Z: FeatureMatrix, path: str):
    """Write samples-as-rows CSV with round-trip-exact floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for j in range(Z.n):
            handle.write(",".join(_format_float(v) for v in Z.data[:, j]))
            handle.write("\n")


def save_labels(labels: Sequence[int], path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for lab in labels:
            handle.write(f"{int(lab)}\n")


# ---------------------------------------------------------------------------
# k-means and packets
# ---------------------------------------------------------------------------


def kmeans_cluster(
    Z: FeatureMatrix,
    n_clusters: int,
    seed: int = 0,
    max_iter: int = 100,
) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding over the columns of ``Z``.

    Every cluster comes back non-empty: an emptied cluster is repaired by
    taking the point farthest from the centroid of the largest cluster.
    All-identical data collapses to a single effective cluster (warned).
    """
    if n_clusters < 1:
        raise InvalidArgumentError("n_clusters must be >= 1")
    if n_clusters > Z.n:
        raise InvalidArgumentError(
            f"n_clusters {n_clusters} exceeds sample count {Z.n}"
        )
    X = Z.data.T  # points as rows
    n = X.shape[0]
    rng = np.random.default_rng(seed)

    if np.ptp(X, axis=0).max(initial=0.0) == 0.0:
        warnings.warn("all samples identical: single effective cluster")
        return np.zeros(n, dtype=np.int64)

    centers = _kmeanspp_init(X, n_clusters, rng)
    assignment: Optional[np.ndarray] = None
    for _ in range(max_iter):
        d2 = _sq_cdist(X, centers)
        new_assignment = _repair_empty(X, np.argmin(d2, axis=1).astype(np.int64), n_clusters)
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
        for c in range(n_clusters):
            centers[c] = X[assignment == c].mean(axis=0)
    return assignment


def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((X - X[chosen[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            pool = [i for i in range(n) if i not in set(chosen)]
            chosen.append(int(rng.choice(pool)))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
        d2 = np.minimum(d2, np.sum((X - X[chosen[-1]]) ** 2, axis=1))
    return X[chosen].copy()


def _sq_cdist(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # |x - c|^2 = |x|^2 - 2 x.c + |c|^2
    xx = np.sum(X * X, axis=1)[:, None]
    cc = np.sum(centers * centers, axis=1)[None, :]
    return np.maximum(xx - 2.0 * X @ centers.T + cc, 0.0)


def _repair_empty(X: np.ndarray, assignment: np.ndarray, k: int) -> np.ndarray:
    assignment = assignment.copy()
    counts = np.bincount(assignment, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        largest = int(np.argmax(counts))
        members = np.flatnonzero(assignment == largest)
        centroid = X[members].mean(axis=0)
        far = members[int(np.argmax(np.sum((X[members] - centroid) ** 2, axis=1)))]
        assignment[far] = empty
        counts[largest] -= 1
        counts[empty] += 1
    return assignment


def build_packets(
    Z: FeatureMatrix,
    assignment: Sequence[int],
    per_packet: int,
    seed: int = 0,
) -> List[Packet]:
    """One packet per cluster: ``per_packet`` members drawn uniformly without
    replacement, represented by the normalized concatenation of per-class
    mean vectors.  Clusters smaller than ``per_packet`` are skipped with a
    warning.
    """
    if per_packet < 1:
        raise InvalidArgumentError("per_packet must be >= 1")
    if Z.labels is None:
        raise InvalidInputError("packet construction requires labels")
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (Z.n,):
        raise InvalidInputError("one cluster id per sample required")
    c_T = Z.n_classes
    rng = np.random.default_rng(seed)

    packets: List[Packet] = []
    for cluster in np.unique(assignment):
        members = np.flatnonzero(assignment == cluster)
        if members.size < per_packet:
            warnings.warn(
                f"cluster {int(cluster)} has {members.size} members, "
                f"needs {per_packet}: skipped"
            )
            continue
        take = np.sort(rng.choice(members, size=per_packet, replace=False))
        packets.append(make_packet(Z, take, c_T))
    return packets


def make_packet(Z: FeatureMatrix, sample_indices: Sequence[int], c_T: int) -> Packet:
    """Packet feature per the class-wise-mean construction."""
    idx = np.asarray(sample_indices, dtype=np.int64)
    if len(set(idx.tolist())) != idx.size:
        raise InvalidArgumentError("packet sample indices must be distinct")
    labels = Z.labels[idx]
    counts = np.bincount(labels, minlength=c_T).astype(np.int64)
    blocks = np.zeros(Z.d * c_T)
    for cls in range(c_T):
        members = idx[labels == cls]
        if members.size:
            blocks[cls * Z.d : (cls + 1) * Z.d] = Z.data[:, members].mean(axis=1)
    norm = float(np.linalg.norm(blocks))
    if norm == 0.0:
        warnings.warn("packet feature is all zeros; left unnormalized")
    else:
        blocks = blocks / norm
    blocks.setflags(write=False)
    counts.setflags(write=False)
    return Packet(
        sample_indices=tuple(int(i) for i in idx),
        feature=blocks,
        class_counts=counts,
    )


# ---------------------------------------------------------------------------
# Packets file format
# ---------------------------------------------------------------------------


def save_packets(packets: Sequence[Packet], d: int, c_T: int, per_packet: int, path: str):
    """Header ``d,c_T,per_packet`` then one line per packet:
    semicolon-joined member indices, then the d*c_T feature values."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{d},{c_T},{per_packet}\n")
        for p in packets:
            members = ";".join(str(i) for i in p.sample_indices)
            feats = ",".join(_format_float(v) for v in p.feature)
            counts = ";".join(str(int(c)) for c in p.class_counts)
            handle.write(f"{members},{counts},{feats}\n")


def load_packets(path: str) -> Tuple[List[Packet], int, int, int]:
    """Returns (packets, d, c_T, per_packet)."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = [ln.rstrip("\n") for ln in handle if ln.strip() != ""]
    if not lines:
        raise ParseError(f"{path}: empty packets file")
    header = lines[0].split(",")
    if len(header) != 3:
        raise ParseError(f"{path}: header must be d,c_T,per_packet")
    try:
        d, c_T, per_packet = (int(tok) for tok in header)
    except ValueError:
        raise ParseError(f"{path}: non-integer header {lines[0]!r}") from None
    packets: List[Packet] = []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split(",")
        if len(tokens) != 2 + d * c_T:
            raise ParseError(
                f"{path}: row {lineno} has {len(tokens)} fields, "
                f"expected {2 + d * c_T}"
            )
        try:
            members = tuple(int(tok) for tok in tokens[0].split(";"))
            counts = np.asarray([int(tok) for tok in tokens[1].split(";")], dtype=np.int64)
        except ValueError:
            raise ParseError(f"{path}: bad indices on row {lineno}") from None
        if counts.size != c_T:
            raise ParseError(f"{path}: row {lineno} has {counts.size} class counts")
        feature = np.asarray(
            [_parse_float(tok, lineno, col + 3) for col, tok in enumerate(tokens[2:])]
        )
        feature.setflags(write=False)
        counts.setflags(write=False)
        packets.append(Packet(sample_indices=members, feature=feature, class_counts=counts))
    return packets, d, c_T, per_packet


# ---------------------------------------------------------------------------
# Phase scan
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseScanResult:
    """Diversity-vs-count curves for greedy and random orderings.

    ``alpha`` is the smallest prefix size attaining the maximum of the
    greedy upper-bound curve.  ``greedy_rate`` is empty when the exact-rate
    column is skipped.
    """

    ks: np.ndarray
    greedy_order: tuple
    greedy_upper: np.ndarray
    greedy_rate: np.ndarray
    random_upper: np.ndarray  # shuffles x n
    random_mean: np.ndarray
    random_std: np.ndarray
    alpha: int


def phase_scan(
    Z: FeatureMatrix,
    cfg: RateConfig = RateConfig(),
    shuffles: int = 5,
    seed: int = 0,
    include_exact_rate: bool = True,
) -> PhaseScanResult:
    """Greedy DPP ordering of the samples vs random orderings, scored by the
    diagonal upper bound of the coding rate at every prefix size.

    The greedy ordering comes from greedy MAP on the raw sample Gram; once
    the kernel rank is exhausted the leftover indices are appended in
    ascending order.  Every curve's final point is evaluated on the full set
    in canonical column order, so all orderings agree there exactly.
    """
    n, d = Z.n, Z.d
    if n < 2:
        raise InvalidInputError("phase scan needs at least two samples")
    if shuffles < 1:
        raise InvalidArgumentError("shuffles must be >= 1")

    gram = Z.data.T @ Z.data
    gram = (gram + gram.T) / 2.0
    kernel = PsdKernel(gram, validate=False)
    greedy = greedy_map(kernel, n)
    order = list(greedy.indices)
    if len(order) < n:
        left = sorted(set(range(n)) - set(order))
        order.extend(left)

    sq = Z.data * Z.data
    full_bound = _prefix_bound_full(sq, d, cfg.eps2)

    greedy_upper = _ordering_bound_curve(sq, order, d, cfg.eps2, full_bound)

    rng = np.random.default_rng(seed)
    seeds = rng.spawn(shuffles)
    random_upper = np.empty((shuffles, n))
    for s in range(shuffles):
        perm = seeds[s].permutation(n)
        random_upper[s] = _ordering_bound_curve(sq, perm, d, cfg.eps2, full_bound)

    if include_exact_rate:
        greedy_rate = _prefix_exact_rates(gram, order, d, cfg.eps2)
    else:
        greedy_rate = np.empty(0)

    alpha = int(np.argmax(greedy_upper)) + 1
    return PhaseScanResult(
        ks=np.arange(1, n + 1),
        greedy_order=tuple(order),
        greedy_upper=greedy_upper,
        greedy_rate=greedy_rate,
        random_upper=random_upper,
        random_mean=random_upper.mean(axis=0),
        random_std=random_upper.std(axis=0),
        alpha=alpha,
    )


def _prefix_bound_full(sq: np.ndarray, d: int, eps2: float) -> float:
    n = sq.shape[1]
    row_sums = np.sum(sq, axis=1)
    return float(np.sum(np.log1p((d / (n * eps2)) * row_sums)) / _LN2)


def _ordering_bound_curve(
    sq: np.ndarray,
    order: Sequence[int],
    d: int,
    eps2: float,
    full_bound: float,
) -> np.ndarray:
    """Upper-bound value at each prefix of ``order`` via running row sums.

    The k = n entry is replaced by the canonical full-set value so that all
    orderings match exactly there.
    """
    n = sq.shape[1]
    curve = np.empty(n)
    acc = np.zeros(sq.shape[0])
    for pos, col in enumerate(order):
        acc = acc + sq[:, col]
        k = pos + 1
        curve[pos] = float(np.sum(np.log1p((d / (k * eps2)) * acc)) / _LN2)
    curve[n - 1] = full_bound
    return curve


def _prefix_exact_rates(
    gram: np.ndarray, order: Sequence[int], d: int, eps2: float
) -> np.ndarray:
    n = gram.shape[0]
    rates = np.empty(n)
    for k in range(1, n + 1):
        idx = np.sort(np.asarray(order[:k]))
        sub = gram[np.ix_(idx, idx)]
        rates[k - 1] = 0.5 * logdet_bits(sub, d / (k * eps2))
    return rates
