"""Task-oriented sample selection.

Builds quality-diversity DPP kernels whose per-candidate quality is the
rate-based gain of appending that candidate to the already-selected set, and
schedules rounds bi-modally: diversity-driven rounds while the semantic
diversity of the accumulated selection keeps improving, then a permanent
switch to uncertainty-driven rounds.  Baseline strategies (marginal gain,
entropy, min-margin, k-center, plain DPP coreset, random) share the same
round loop and reporting.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular

from .dpp import GreedyResult, PsdKernel, gram_kernel, greedy_map
from .errors import (
    ConfigurationError,
    InvalidArgumentError,
    InvalidInputError,
    NumericalError,
)
from .ratedist import (
    SDIV_CLAMP,
    FeatureMatrix,
    RateConfig,
    coding_rate,
    logdet_bits,
    semantic_diversity,
)

logger = logging.getLogger(__name__)

_LN2 = math.log(2.0)

PSD_REL_TOL = 1e-8
PROB_SUM_TOL = 1e-6


class Mode(enum.Enum):
    DIVERSITY = "diversity"
    UNCERTAINTY = "uncertainty"


class QualityMode(enum.Enum):
    SEMANTIC_DIVERSITY = "semantic"
    RATE_GAIN = "rate-gain"


class UncertaintyMode(enum.Enum):
    ENTROPY = "entropy"
    MIN_MARGIN = "min-margin"


class Strategy(enum.Enum):
    RD_DPP_BIMODAL = "rd-dpp"
    RD_DPP_DIVERSITY_ONLY = "rd-dpp-diversity"
    MARGINAL_RATE_GAIN = "marginal-rate-gain"
    ENTROPY = "entropy"
    MIN_MARGIN = "min-margin"
    K_CENTER = "k-center"
    DPP_CORESET = "dpp-coreset"
    RANDOM = "random"


# Strategies whose quality scores need class labels on the pool.
_LABELED_STRATEGIES = {
    Strategy.RD_DPP_BIMODAL,
    Strategy.RD_DPP_DIVERSITY_ONLY,
    Strategy.MARGINAL_RATE_GAIN,
}
# Strategies that consult a trained model every round.
_MODEL_STRATEGIES = {Strategy.ENTROPY, Strategy.MIN_MARGIN}


@dataclass(frozen=True)
class SchedulerConfig:
    """Knobs for a selection run.

    ``phi0`` is the diversity-improvement threshold of the bi-modal switch;
    ``k`` the round size; ``budget`` the total number of items to select on
    top of the initial set.  ``bootstrap_cap`` (off by default) subsamples
    the accumulated selection to at most that many columns when computing
    quality scores.
    """

    budget: int
    k: int = 5
    phi0: float = 2.0
    eps2: float = 0.5
    quality_mode: QualityMode = QualityMode.SEMANTIC_DIVERSITY
    uncertainty_mode: UncertaintyMode = UncertaintyMode.ENTROPY
    strategy: Strategy = Strategy.RD_DPP_BIMODAL
    bootstrap_cap: Optional[int] = None

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError(f"round size k must be >= 1, got {self.k}")
        if self.budget < 1:
            raise InvalidArgumentError(f"budget must be >= 1, got {self.budget}")
        if math.isnan(self.phi0):
            raise InvalidArgumentError("phi0 must not be NaN")
        if self.bootstrap_cap is not None and self.bootstrap_cap < 1:
            raise InvalidArgumentError("bootstrap_cap must be >= 1 when set")

    def rate_config(self) -> RateConfig:
        return RateConfig(eps2=self.eps2)


class CandidatePool:
    """Uniform view over selectable items: raw samples or packets.

    ``features`` holds one column per candidate (sample columns, or packet
    feature vectors).  For packet pools, ``member_indices`` maps each
    candidate to its member sample indices in the parent matrix and the
    candidate label is the packet's majority class.
    """

    __slots__ = ("features", "member_indices")

    def __init__(
        self,
        features: FeatureMatrix,
        member_indices: Optional[Sequence[Sequence[int]]] = None,
    ):
        if member_indices is not None and len(member_indices) != features.n:
            raise InvalidInputError(
                "member_indices length must equal the number of candidates"
            )
        self.features = features
        self.member_indices = (
            None
            if member_indices is None
            else tuple(tuple(int(i) for i in grp) for grp in member_indices)
        )

    @classmethod
    def from_packets(cls, packets: Sequence, n_classes: int) -> "CandidatePool":
        """Pool of packets; candidate label = majority class in the packet."""
        if not packets:
            raise InvalidInputError("packet list is empty")
        feats = np.column_stack([p.feature for p in packets])
        labels = [int(np.argmax(p.class_counts)) for p in packets]
        fm = FeatureMatrix(feats, labels=labels, n_classes=n_classes)
        return cls(fm, member_indices=[p.sample_indices for p in packets])

    @property
    def m(self) -> int:
        return self.features.n

    @property
    def is_packet(self) -> bool:
        return self.member_indices is not None

    @property
    def labels(self) -> Optional[np.ndarray]:
        return self.features.labels

    def subset(self, ids: Sequence[int]) -> FeatureMatrix:
        return self.features.take(ids)

    def member_samples(self, ids: Sequence[int]) -> List[int]:
        """Sample indices covered by the given candidates (raw: the ids)."""
        if self.member_indices is None:
            return [int(i) for i in ids]
        out: List[int] = []
        for i in ids:
            out.extend(self.member_indices[int(i)])
        return out


def as_pool(pool: Union[CandidatePool, FeatureMatrix]) -> CandidatePool:
    if isinstance(pool, CandidatePool):
        return pool
    if isinstance(pool, FeatureMatrix):
        return CandidatePool(pool)
    raise InvalidArgumentError(f"cannot build a candidate pool from {type(pool)!r}")


# ---------------------------------------------------------------------------
# Quality scores and the quality-diversity kernel
# ---------------------------------------------------------------------------


class QualityScorer:
    """Scores candidate quality against a fixed selected set.

    One Cholesky factorization of the selected Gram (total and per class) is
    shared across candidates; each score then costs a triangular solve via
    the rank-one determinant identity
    ``det(A + a x x^T) = det(A) * (1 + a x^T A^-1 x)``.
    Matches the plain recomputation (:func:`quality_score`) to ~1e-12.
    """

    def __init__(
        self,
        selected: Optional[FeatureMatrix],
        cfg: SchedulerConfig,
        rng: Optional[np.random.Generator] = None,
    ):
        self.cfg = cfg
        self.eps2 = cfg.eps2
        Z = selected
        if Z is not None and cfg.bootstrap_cap is not None and Z.n > cfg.bootstrap_cap:
            if rng is None:
                raise InvalidArgumentError("bootstrap_cap requires an rng")
            keep = np.sort(rng.choice(Z.n, size=cfg.bootstrap_cap, replace=False))
            Z = Z.take(keep)
        self.Z = Z if (Z is not None and Z.n > 0) else None
        self.semantic = cfg.quality_mode == QualityMode.SEMANTIC_DIVERSITY
        if self.semantic and self.Z is not None and self.Z.labels is None:
            raise InvalidInputError("semantic quality scores require labels")
        self._total = None
        self._per_class: Dict[int, object] = {}
        self._fixed_rates: Dict[int, float] = {}
        if self.Z is not None:
            d, n = self.Z.d, self.Z.n
            self._total = _RankOneLogDet(self.Z.data, d / ((n + 1) * self.eps2))
            if self.semantic:
                for c in np.unique(self.Z.labels):
                    cols = self.Z.class_indices(int(c))
                    sub = self.Z.data[:, cols]
                    self._per_class[int(c)] = _RankOneLogDet(
                        sub, d / ((cols.size + 1) * self.eps2)
                    )
                    # rate of the class if the candidate is NOT in it
                    self._fixed_rates[int(c)] = 0.5 * logdet_bits(
                        _sym(sub @ sub.T) if d <= cols.size else _sym(sub.T @ sub),
                        d / (cols.size * self.eps2),
                    )

    def score(self, candidate: np.ndarray, label: Optional[int] = None) -> float:
        x = np.asarray(candidate, dtype=np.float64).reshape(-1)
        return float(self.score_columns(x[:, None], None if label is None else [label])[0])

    def score_columns(
        self,
        candidates: np.ndarray,
        labels: Optional[Sequence[int]] = None,
    ) -> np.ndarray:
        """Quality of each column of ``candidates`` (d x m)."""
        X = np.asarray(candidates, dtype=np.float64)
        if X.ndim != 2:
            raise InvalidInputError("candidates must be a d x m array")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("candidates contain non-finite entries")
        m = X.shape[1]
        if self.Z is not None and X.shape[0] != self.Z.d:
            raise InvalidInputError(
                f"candidate dimension {X.shape[0]} != selected dimension {self.Z.d}"
            )
        if self.semantic:
            if labels is None:
                raise InvalidInputError("semantic quality scores need candidate labels")
            labels = np.asarray(labels, dtype=np.int64)
            if labels.shape != (m,):
                raise InvalidInputError("one label per candidate column required")

        d = X.shape[0]
        if self.Z is None:
            # Nothing selected yet: a lone sample has zero semantic diversity;
            # the rate-gain score is just its own coding rate.
            if self.semantic:
                return np.zeros(m)
            alpha = d / self.eps2
            return 0.5 * np.log1p(alpha * np.sum(X * X, axis=0)) / _LN2

        n = self.Z.n
        total_bits = self._total.appended_logdet_bits(X)
        rates = 0.5 * total_bits
        if not self.semantic:
            return rates

        scores = np.empty(m)
        for c in np.unique(labels):
            mask = labels == c
            Xc = X[:, mask]
            if int(c) in self._per_class:
                class_bits = self._per_class[int(c)].appended_logdet_bits(Xc)
                size_c = self.Z.class_indices(int(c)).size
            else:
                alpha_c = d / self.eps2
                class_bits = np.log1p(alpha_c * np.sum(Xc * Xc, axis=0)) / _LN2
                size_c = 0
            class_sum = ((size_c + 1) / (n + 1)) * 0.5 * class_bits
            for other, rate in self._fixed_rates.items():
                if other != int(c):
                    w = self.Z.class_indices(other).size / (n + 1)
                    class_sum = class_sum + w * rate
            scores[mask] = rates[mask] - class_sum
        if np.any(scores < -SDIV_CLAMP):
            raise NumericalError(
                f"quality score {scores.min():.3e} below the roundoff clamp"
            )
        return np.clip(scores, 0.0, None)

    def score_matrix(self, candidates: FeatureMatrix) -> np.ndarray:
        labels = candidates.labels if self.semantic else None
        if self.semantic and labels is None:
            raise InvalidInputError("semantic quality scores need labeled candidates")
        return self.score_columns(candidates.data, labels)


class _RankOneLogDet:
    """log2 det(I + a (Z Z^T + x x^T)) for many x, one factorization of Z.

    Works in whichever Gram form (feature- or sample-side) is smaller.
    Assumes every query appends exactly one column, so ``a`` is fixed.
    """

    def __init__(self, Z: np.ndarray, alpha: float):
        self.alpha = alpha
        d, n = Z.shape
        self.primal = d <= n + 1
        if self.primal:
            A = np.eye(d) + alpha * _sym(Z @ Z.T)
            self.chol = np.linalg.cholesky(A)
        else:
            self.Z = Z
            B = np.eye(n) + alpha * _sym(Z.T @ Z)
            self.chol = np.linalg.cholesky(B)
        self.base_bits = 2.0 * float(np.sum(np.log(np.diag(self.chol)))) / _LN2

    def appended_logdet_bits(self, X: np.ndarray) -> np.ndarray:
        a = self.alpha
        if self.primal:
            W = solve_triangular(self.chol, X, lower=True, check_finite=False)
            quad = np.sum(W * W, axis=0)
            return self.base_bits + np.log1p(a * quad) / _LN2
        U = self.Z.T @ X
        V = solve_triangular(self.chol, U, lower=True, check_finite=False)
        schur = 1.0 + a * np.sum(X * X, axis=0) - a * a * np.sum(V * V, axis=0)
        if np.any(schur <= 0):
            raise NumericalError("rank-one update lost positive definiteness")
        return self.base_bits + np.log(schur) / _LN2


def _sym(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.T) / 2.0


def quality_score(
    selected: Optional[FeatureMatrix],
    candidate: np.ndarray,
    cfg: SchedulerConfig,
    candidate_label: Optional[int] = None,
) -> float:
    """Quality of one candidate by direct recomputation on the appended matrix.

    Semantic mode returns the semantic diversity of ``[Z, x]`` (the
    candidate's label joins the label vector); rate-gain mode returns the
    coding rate of ``[Z, x]``.
    """
    x = np.asarray(candidate, dtype=np.float64).reshape(-1)
    rc = cfg.rate_config()
    semantic = cfg.quality_mode == QualityMode.SEMANTIC_DIVERSITY
    if selected is None or selected.n == 0:
        if semantic:
            if candidate_label is None:
                raise InvalidInputError("semantic quality score needs the candidate label")
            return 0.0
        appended = FeatureMatrix(x[:, None])
        return coding_rate(appended, rc)
    if x.shape[0] != selected.d:
        raise InvalidInputError(
            f"candidate dimension {x.shape[0]} != selected dimension {selected.d}"
        )
    if semantic:
        if selected.labels is None:
            raise InvalidInputError("semantic quality scores require labels")
        if candidate_label is None:
            raise InvalidInputError("semantic quality score needs the candidate label")
        appended = selected.append_columns(x, labels=[candidate_label])
        return semantic_diversity(appended, rc)
    appended = FeatureMatrix(np.hstack([selected.data, x[:, None]]))
    return coding_rate(appended, rc)


class QDKernel:
    """Quality-diversity kernel: K = diag(quality) . Gram . diag(quality)."""

    __slots__ = ("matrix", "quality", "candidate_ids")

    def __init__(
        self,
        matrix: np.ndarray,
        quality: np.ndarray,
        candidate_ids: np.ndarray,
        validate: bool = True,
    ):
        mat = np.array(matrix, dtype=np.float64, copy=True)
        mat = _sym(mat)
        if validate:
            evals = np.linalg.eigvalsh(mat)
            floor = -PSD_REL_TOL * max(1.0, float(evals[-1]))
            if float(evals[0]) < floor:
                raise NumericalError(
                    f"quality-diversity kernel not PSD: min eigenvalue {evals[0]:.3e}"
                )
        mat.setflags(write=False)
        self.matrix = mat
        self.quality = np.array(quality, dtype=np.float64, copy=True)
        self.candidate_ids = np.array(candidate_ids, dtype=np.int64, copy=True)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]


def build_qd_kernel(
    selected: Optional[FeatureMatrix],
    candidates: FeatureMatrix,
    cfg: SchedulerConfig,
    candidate_ids: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
) -> QDKernel:
    """Kernel over candidates combining quality scores with inner products.

    Semantic mode uses the raw candidate Gram; rate-gain mode scales the Gram
    by d / ((n_selected + 1) * eps2), matching the per-candidate appended
    matrices.
    """
    if candidates.n < 1:
        raise InvalidInputError("need at least one candidate")
    scorer = QualityScorer(selected, cfg, rng=rng)
    phi = scorer.score_matrix(candidates)
    gram = _sym(candidates.data.T @ candidates.data)
    if cfg.quality_mode == QualityMode.RATE_GAIN:
        n_sel = 0 if selected is None else selected.n
        gram = gram * (candidates.d / ((n_sel + 1) * cfg.eps2))
    K = phi[:, None] * gram * phi[None, :]
    ids = np.arange(candidates.n) if candidate_ids is None else np.asarray(candidate_ids)
    return QDKernel(K, phi, ids)


# ---------------------------------------------------------------------------
# Uncertainty scores
# ---------------------------------------------------------------------------


def _check_distribution(probs: np.ndarray) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size < 1 or not np.all(np.isfinite(p)):
        raise InvalidInputError("probability vector must be finite and non-empty")
    if np.any(p < -1e-12):
        raise InvalidInputError(f"negative probability {p.min():.3e}")
    if abs(float(p.sum()) - 1.0) > PROB_SUM_TOL:
        raise InvalidInputError(f"probabilities sum to {p.sum():.8f}, expected 1")
    return np.clip(p, 0.0, None)


def uncertainty_entropy(probs: Sequence[float]) -> float:
    """Shannon entropy (bits) of a predicted class distribution."""
    p = _check_distribution(np.asarray(probs))
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log2(nz))))


def min_margin(probs: Sequence[float]) -> float:
    """Gap between the two largest predicted probabilities (small = uncertain)."""
    p = _check_distribution(np.asarray(probs))
    if p.size < 2:
        raise InvalidInputError("margin needs at least two classes")
    top2 = np.partition(p, -2)[-2:]
    return float(top2[1] - top2[0])


# ---------------------------------------------------------------------------
# Selection state, report records
# ---------------------------------------------------------------------------


@dataclass
class SelectionState:
    """Mutable bookkeeping for one selection run."""

    selected: List[int]
    remaining: List[int]
    k: int
    budget: int
    transition_flag: bool = False
    sdiv_history: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def mode(self) -> Mode:
        return Mode.UNCERTAINTY if self.transition_flag else Mode.DIVERSITY

    def set_transition(self):
        self.transition_flag = True

    def apply_choice(self, chosen: Sequence[int]):
        chosen = [int(c) for c in chosen]
        remaining = set(self.remaining)
        for c in chosen:
            if c not in remaining:
                raise InvalidArgumentError(f"candidate {c} not in the remaining set")
            remaining.discard(c)
        self.selected.extend(chosen)
        self.remaining = sorted(remaining)


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    mode: str
    chosen_indices: tuple
    sdiv_before: Optional[float]
    sdiv_after: Optional[float]

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "mode": self.mode,
            "chosen_indices": list(self.chosen_indices),
            "sdiv_before": self.sdiv_before,
            "sdiv_after": self.sdiv_after,
        }


@dataclass(frozen=True)
class SelectionReport:
    """Reproducibility record of one selection run."""

    strategy: str
    config: dict
    seed: Optional[int]
    init: tuple
    selected: tuple
    rounds: tuple
    transition_round: Optional[int]
    selected_samples: Optional[tuple] = None

    def to_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "strategy": self.strategy,
            "config": self.config,
            "seed": self.seed,
            "init": list(self.init),
            "selected": list(self.selected),
            "rounds": [r.to_dict() for r in self.rounds],
            "transition_round": self.transition_round,
        }
        if self.selected_samples is not None:
            out["selected_samples"] = list(self.selected_samples)
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "SelectionReport":
        rounds = tuple(
            RoundRecord(
                round_index=r["round_index"],
                mode=r["mode"],
                chosen_indices=tuple(r["chosen_indices"]),
                sdiv_before=r["sdiv_before"],
                sdiv_after=r["sdiv_after"],
            )
            for r in doc["rounds"]
        )
        samples = doc.get("selected_samples")
        return cls(
            strategy=doc["strategy"],
            config=doc["config"],
            seed=doc["seed"],
            init=tuple(doc["init"]),
            selected=tuple(doc["selected"]),
            rounds=rounds,
            transition_round=doc["transition_round"],
            selected_samples=None if samples is None else tuple(samples),
        )


# ---------------------------------------------------------------------------
# Per-round strategies
# ---------------------------------------------------------------------------


def select_round_diversity(
    state: SelectionState,
    pool: Union[CandidatePool, FeatureMatrix],
    cfg: SchedulerConfig,
    k: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[List[int], bool]:
    """One quality-diversity DPP round over the remaining candidates.

    Returns the chosen pool indices and a rank-exhausted flag; fewer than
    ``k`` indices come back when the kernel ran out of rank.
    """
    pool = as_pool(pool)
    k = cfg.k if k is None else k
    if len(state.remaining) < k:
        raise InvalidArgumentError(
            f"{len(state.remaining)} candidates remain, round needs {k}"
        )
    remaining = list(state.remaining)
    candidates = pool.subset(remaining)
    selected_fm = pool.subset(state.selected) if state.selected else None
    kernel = build_qd_kernel(
        selected_fm, candidates, cfg, candidate_ids=remaining, rng=rng
    )
    if np.all(kernel.quality == 0.0):
        # No selected set to score against (or every gain vanished): fall
        # back to plain diversity on the raw Gram for this round.
        logger.debug("all quality scores zero; using unweighted Gram this round")
        kernel = PsdKernel(_sym(candidates.data.T @ candidates.data))
    result = greedy_map(kernel, k)
    chosen = [remaining[i] for i in result.indices]
    return chosen, result.rank_exhausted


def select_round_uncertainty(
    state: SelectionState,
    pool: Union[CandidatePool, FeatureMatrix],
    model_probs: np.ndarray,
    cfg: SchedulerConfig,
    k: Optional[int] = None,
) -> List[int]:
    """Top-k most uncertain remaining candidates.

    Entropy mode takes the k highest entropies, margin mode the k smallest
    margins; ties break toward the lowest index.  For packet pools the
    candidate score is the mean over its member samples.
    """
    pool = as_pool(pool)
    k = cfg.k if k is None else k
    if len(state.remaining) < k:
        raise InvalidArgumentError(
            f"{len(state.remaining)} candidates remain, round needs {k}"
        )
    scores = candidate_uncertainty(pool, state.remaining, model_probs, cfg.uncertainty_mode)
    if cfg.uncertainty_mode == UncertaintyMode.ENTROPY:
        order = sorted(range(len(state.remaining)), key=lambda i: (-scores[i], state.remaining[i]))
    else:
        order = sorted(range(len(state.remaining)), key=lambda i: (scores[i], state.remaining[i]))
    return [state.remaining[i] for i in order[:k]]


def candidate_uncertainty(
    pool: CandidatePool,
    ids: Sequence[int],
    model_probs: np.ndarray,
    mode: UncertaintyMode,
) -> np.ndarray:
    """Per-candidate uncertainty; packet candidates average member scores."""
    probs = np.asarray(model_probs, dtype=np.float64)
    if probs.ndim != 2:
        raise InvalidInputError("model probabilities must be a 2-D array")
    score_fn = uncertainty_entropy if mode == UncertaintyMode.ENTROPY else min_margin

    def row_score(row_index: int) -> float:
        if row_index >= probs.shape[0] or row_index < 0:
            raise InvalidInputError(f"missing probability row for sample {row_index}")
        row = probs[row_index]
        if not np.all(np.isfinite(row)):
            raise InvalidInputError(f"missing probability row for sample {row_index}")
        return score_fn(row)

    out = np.empty(len(ids))
    for pos, cand in enumerate(ids):
        members = pool.member_samples([cand])
        out[pos] = float(np.mean([row_score(s) for s in members]))
    return out


def select_marginal_rate_gain(
    state: SelectionState,
    pool: Union[CandidatePool, FeatureMatrix],
    cfg: SchedulerConfig,
    k: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> List[int]:
    """Top-k candidates by individual quality score, ignoring their Gram."""
    pool = as_pool(pool)
    k = cfg.k if k is None else k
    if len(state.remaining) < k:
        raise InvalidArgumentError(
            f"{len(state.remaining)} candidates remain, round needs {k}"
        )
    remaining = list(state.remaining)
    candidates = pool.subset(remaining)
    selected_fm = pool.subset(state.selected) if state.selected else None
    scorer = QualityScorer(selected_fm, cfg, rng=rng)
    phi = scorer.score_matrix(candidates)
    order = sorted(range(len(remaining)), key=lambda i: (-phi[i], remaining[i]))
    return [remaining[i] for i in order[:k]]


def select_k_center(
    pool: Union[CandidatePool, FeatureMatrix],
    selected: Sequence[int],
    k: int,
) -> List[int]:
    """Farthest-first traversal over Euclidean candidate features.

    Each step adds the candidate farthest from the nearest already-covered
    point (selected plus earlier choices).  With nothing covered, the first
    pick is the candidate farthest from the pool centroid.
    """
    pool = as_pool(pool)
    X = pool.features.data
    m = X.shape[1]
    covered = [int(i) for i in selected]
    if any(i < 0 or i >= m for i in covered):
        raise InvalidArgumentError(f"selected index out of range [0, {m})")
    available = sorted(set(range(m)) - set(covered))
    if not available:
        raise InvalidInputError("no candidates available")
    if k < 1 or k > len(available):
        raise InvalidArgumentError(f"k must lie in [1, {len(available)}], got {k}")

    def sq_dists_to(col: np.ndarray) -> np.ndarray:
        diff = X - col[:, None]
        return np.sum(diff * diff, axis=0)

    if covered:
        min_d2 = np.full(m, np.inf)
        for c in covered:
            min_d2 = np.minimum(min_d2, sq_dists_to(X[:, c]))
    else:
        min_d2 = sq_dists_to(X.mean(axis=1))

    chosen: List[int] = []
    taken = set(covered)
    for _ in range(k):
        best, best_d2 = -1, -np.inf
        for cand in available:
            if cand in taken:
                continue
            if min_d2[cand] > best_d2:
                best, best_d2 = cand, min_d2[cand]
        chosen.append(best)
        taken.add(best)
        min_d2 = np.minimum(min_d2, sq_dists_to(X[:, best]))
    return chosen


def select_dpp_coreset(pool: Union[CandidatePool, FeatureMatrix], k: int) -> GreedyResult:
    """Greedy MAP on the raw candidate Gram: plain diversity, no quality."""
    pool = as_pool(pool)
    return greedy_map(gram_kernel(pool.features, 1.0), k)


def select_random(
    pool: Union[CandidatePool, FeatureMatrix, Sequence[int]],
    k: int,
    seed: Union[int, np.random.Generator],
) -> List[int]:
    """Uniform choice of k candidates without replacement."""
    if isinstance(pool, (CandidatePool, FeatureMatrix)):
        ids = list(range(as_pool(pool).m))
    else:
        ids = [int(i) for i in pool]
    if k < 1 or k > len(ids):
        raise InvalidArgumentError(f"k must lie in [1, {len(ids)}], got {k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return [int(i) for i in rng.choice(ids, size=k, replace=False)]


# ---------------------------------------------------------------------------
# The round loop
# ---------------------------------------------------------------------------

ModelHook = Callable[[Sequence[int], Sequence[int]], np.ndarray]


def run_bimodal(
    pool: Union[CandidatePool, FeatureMatrix],
    init: Sequence[int],
    cfg: SchedulerConfig,
    model_hook: Optional[ModelHook] = None,
    seed: int = 0,
) -> SelectionReport:
    """Bi-modal scheduling: diversity rounds until the semantic-diversity
    gain drops below ``phi0``, then uncertainty rounds for good.

    Accepts the bi-modal and diversity-only strategies; the latter is the
    bi-modal loop with the switch threshold at -inf.
    """
    if cfg.strategy not in (Strategy.RD_DPP_BIMODAL, Strategy.RD_DPP_DIVERSITY_ONLY):
        raise ConfigurationError(
            f"run_bimodal cannot drive strategy {cfg.strategy.value!r}"
        )
    return run_selection(pool, init, cfg, model_hook=model_hook, seed=seed)


def run_selection(
    pool: Union[CandidatePool, FeatureMatrix],
    init: Sequence[int],
    cfg: SchedulerConfig,
    model_hook: Optional[ModelHook] = None,
    seed: int = 0,
) -> SelectionReport:
    """Run the configured strategy round by round and return the full report.

    Budget counts items chosen on top of ``init`` and is consumed in rounds
    of ``cfg.k`` (a final short round takes any remainder).  All randomness
    flows from ``seed``.
    """
    pool = as_pool(pool)
    rng = np.random.default_rng(seed)
    init = [int(i) for i in init]
    if len(set(init)) != len(init):
        raise InvalidArgumentError("initial indices must be distinct")
    if any(i < 0 or i >= pool.m for i in init):
        raise InvalidArgumentError(f"initial index out of range [0, {pool.m})")

    strategy = cfg.strategy
    labeled = pool.labels is not None
    if strategy in _LABELED_STRATEGIES and not labeled:
        raise ConfigurationError(
            f"strategy {strategy.value!r} requires a labeled pool"
        )
    if strategy in _MODEL_STRATEGIES and model_hook is None:
        raise ConfigurationError(
            f"strategy {strategy.value!r} requires a model hook"
        )

    state = SelectionState(
        selected=list(init),
        remaining=sorted(set(range(pool.m)) - set(init)),
        k=cfg.k,
        budget=cfg.budget,
    )
    rc = cfg.rate_config()

    def current_sdiv() -> Optional[float]:
        if not labeled or not state.selected:
            return None
        return semantic_diversity(pool.subset(state.selected), rc)

    sdiv_now = current_sdiv()
    if sdiv_now is not None:
        state.sdiv_history.append((len(state.selected), sdiv_now))

    phi0 = cfg.phi0
    if strategy == Strategy.RD_DPP_DIVERSITY_ONLY:
        phi0 = -math.inf

    def hook_probs() -> np.ndarray:
        if model_hook is None:
            raise ConfigurationError(
                "uncertainty mode engaged but no model hook was provided"
            )
        return np.asarray(model_hook(list(state.selected), list(state.remaining)))

    def fill_shortfall(already: List[int], want: int) -> List[int]:
        leftovers = [i for i in state.remaining if i not in set(already)]
        if want <= 0 or not leftovers:
            return []
        if model_hook is not None:
            probs = hook_probs()
            scores = candidate_uncertainty(pool, leftovers, probs, cfg.uncertainty_mode)
            if cfg.uncertainty_mode == UncertaintyMode.ENTROPY:
                order = sorted(range(len(leftovers)), key=lambda i: (-scores[i], leftovers[i]))
            else:
                order = sorted(range(len(leftovers)), key=lambda i: (scores[i], leftovers[i]))
            return [leftovers[i] for i in order[:want]]
        return select_random(leftovers, min(want, len(leftovers)), rng)

    rounds: List[RoundRecord] = []
    budget_left = min(cfg.budget, len(state.remaining))
    round_index = 0
    transition_round: Optional[int] = None

    while budget_left > 0 and state.remaining:
        round_index += 1
        round_k = min(cfg.k, budget_left, len(state.remaining))
        sdiv_before = state.sdiv_history[-1][1] if state.sdiv_history else None

        if strategy in (Strategy.RD_DPP_BIMODAL, Strategy.RD_DPP_DIVERSITY_ONLY):
            if not state.transition_flag and len(state.sdiv_history) >= 2:
                gain = state.sdiv_history[-1][1] - state.sdiv_history[-2][1]
                if not gain > phi0:
                    state.set_transition()
            if state.transition_flag:
                mode = Mode.UNCERTAINTY
                chosen = select_round_uncertainty(state, pool, hook_probs(), cfg, k=round_k)
            else:
                mode = Mode.DIVERSITY
                chosen, exhausted = select_round_diversity(state, pool, cfg, k=round_k, rng=rng)
                if exhausted and len(chosen) < round_k:
                    chosen = chosen + fill_shortfall(chosen, round_k - len(chosen))
                    state.set_transition()
        elif strategy == Strategy.MARGINAL_RATE_GAIN:
            mode = Mode.DIVERSITY
            chosen = select_marginal_rate_gain(state, pool, cfg, k=round_k, rng=rng)
        elif strategy in _MODEL_STRATEGIES:
            mode = Mode.UNCERTAINTY
            state.set_transition()
            forced = (
                UncertaintyMode.ENTROPY
                if strategy == Strategy.ENTROPY
                else UncertaintyMode.MIN_MARGIN
            )
            ucfg = cfg if cfg.uncertainty_mode == forced else _with_uncertainty(cfg, forced)
            chosen = select_round_uncertainty(state, pool, hook_probs(), ucfg, k=round_k)
        elif strategy == Strategy.K_CENTER:
            mode = Mode.DIVERSITY
            chosen = select_k_center(pool, state.selected, round_k)
        elif strategy == Strategy.DPP_CORESET:
            mode = Mode.DIVERSITY
            remaining = list(state.remaining)
            sub = pool.subset(remaining)
            result = select_dpp_coreset(CandidatePool(sub), round_k)
            chosen = [remaining[i] for i in result.indices]
            if result.rank_exhausted and len(chosen) < round_k:
                chosen = chosen + select_random(
                    [i for i in remaining if i not in set(chosen)],
                    round_k - len(chosen),
                    rng,
                )
        elif strategy == Strategy.RANDOM:
            mode = Mode.DIVERSITY
            chosen = select_random(state.remaining, round_k, rng)
        else:  # pragma: no cover
            raise ConfigurationError(f"unhandled strategy {strategy!r}")

        state.apply_choice(chosen)
        budget_left -= len(chosen)
        sdiv_after = current_sdiv()
        if sdiv_after is not None:
            state.sdiv_history.append((len(state.selected), sdiv_after))
        if mode == Mode.UNCERTAINTY and transition_round is None:
            transition_round = round_index
        rounds.append(
            RoundRecord(
                round_index=round_index,
                mode=mode.value,
                chosen_indices=tuple(chosen),
                sdiv_before=sdiv_before,
                sdiv_after=sdiv_after,
            )
        )

    config_echo = {
        "strategy": strategy.value,
        "budget": cfg.budget,
        "k": cfg.k,
        "phi0": cfg.phi0,
        "eps2": cfg.eps2,
        "quality_mode": cfg.quality_mode.value,
        "uncertainty_mode": cfg.uncertainty_mode.value,
        "bootstrap_cap": cfg.bootstrap_cap,
        "pool_kind": "packets" if pool.is_packet else "samples",
        "pool_size": pool.m,
    }
    return SelectionReport(
        strategy=strategy.value,
        config=config_echo,
        seed=seed,
        init=tuple(init),
        selected=tuple(state.selected),
        rounds=tuple(rounds),
        transition_round=transition_round,
        selected_samples=tuple(pool.member_samples(state.selected)) if pool.is_packet else None,
    )


def _with_uncertainty(cfg: SchedulerConfig, mode: UncertaintyMode) -> SchedulerConfig:
    return SchedulerConfig(
        budget=cfg.budget,
        k=cfg.k,
        phi0=cfg.phi0,
        eps2=cfg.eps2,
        quality_mode=cfg.quality_mode,
        uncertainty_mode=mode,
        strategy=cfg.strategy,
        bootstrap_cap=cfg.bootstrap_cap,
    )
