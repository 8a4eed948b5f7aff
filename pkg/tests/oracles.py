"""Independent reference implementations used to cross-check the library.

Everything here is deliberately naive and shares no code with the package:
dense slogdet-based rates, brute-force subset enumeration, and a
re-factorizing greedy.
"""

import itertools

import numpy as np


def dense_rate(Z: np.ndarray, eps2: float, form: str = "primal") -> float:
    """Coding rate straight from the definition via slogdet."""
    d, n = Z.shape
    alpha = d / (n * eps2)
    if form == "primal":
        mat = np.eye(d) + alpha * (Z @ Z.T)
    else:
        mat = np.eye(n) + alpha * (Z.T @ Z)
    sign, logdet = np.linalg.slogdet(mat)
    assert sign > 0
    return 0.5 * logdet / np.log(2.0)


def dense_hadamard(Z: np.ndarray, eps2: float) -> float:
    d, n = Z.shape
    diag = np.diag(Z @ Z.T)
    return float(np.sum(np.log2((d / eps2) * diag / n + 1.0)))


def dense_class_rate(Z: np.ndarray, labels: np.ndarray, c: int, eps2: float) -> float:
    cols = np.flatnonzero(labels == c)
    return dense_rate(Z[:, cols], eps2)


def dense_sdiv(Z: np.ndarray, labels: np.ndarray, eps2: float) -> float:
    """Total rate minus class-weighted per-class rates, all via slogdet."""
    n = Z.shape[1]
    total = dense_rate(Z, eps2)
    acc = 0.0
    for c in np.unique(labels):
        w = np.sum(labels == c) / n
        acc += w * dense_class_rate(Z, labels, int(c), eps2)
    return total - acc


def brute_normalizer(L: np.ndarray) -> float:
    """Sum of det(L_A) over every subset, empty set contributing 1."""
    m = L.shape[0]
    total = 1.0
    for r in range(1, m + 1):
        for combo in itertools.combinations(range(m), r):
            idx = np.asarray(combo)
            total += np.linalg.det(L[np.ix_(idx, idx)])
    return total


def subset_det(L: np.ndarray, idx) -> float:
    idx = np.asarray(list(idx), dtype=np.int64)
    if idx.size == 0:
        return 1.0
    return float(np.linalg.det(L[np.ix_(idx, idx)]))


def naive_greedy(L: np.ndarray, k: int, eps: float = 1e-12):
    """Greedy MAP by re-evaluating det gains densely each step.

    Returns (indices, gains) where gains are determinant ratios
    det(A + c) / det(A); stops when the best ratio drops below eps.
    """
    m = L.shape[0]
    chosen = []
    gains = []
    for _ in range(k):
        base = subset_det(L, chosen)
        best_idx, best_gain = -1, -np.inf
        for c in range(m):
            if c in chosen:
                continue
            gain = subset_det(L, chosen + [c]) / base
            if gain > best_gain:
                best_idx, best_gain = c, gain
        if best_gain < eps:
            break
        chosen.append(best_idx)
        gains.append(best_gain)
    return chosen, gains


def random_psd(rng: np.random.Generator, m: int, rank: int = None) -> np.ndarray:
    """Random PSD matrix as a Gram of Gaussian factors."""
    r = m if rank is None else rank
    F = rng.standard_normal((r, m))
    return F.T @ F
