"""Pairwise-controlled 2D embedding of latent datasets.

Three pair classes anchor the layout: nearest neighbors under a locally
scaled distance, mid-near pairs (closer than random on average), and
further pairs sampled from non-neighbors. Their loss terms are weighted on
a three-phase schedule and minimized with Adam from a small PCA init.

The estimator follows the scikit-learn protocol: `fit` / `fit_transform`
build the embedding, `transform` places new points by inverse-distance
interpolation over their nearest training points, and `get_params` exposes
the full configuration snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .errors import InsufficientData, NonFiniteLoss

NB_DENOM = 10.0
MN_DENOM = 10000.0


@dataclass(frozen=True)
class PhaseWeights:
    w_nb: float
    w_mn: float
    w_fp: float

    def __post_init__(self):
        if min(self.w_nb, self.w_mn, self.w_fp) < 0:
            raise ValueError("phase weights must be non-negative")


@dataclass
class PairSets:
    """Index pairs (anchored at their first point) for the three loss terms."""

    neighbor: np.ndarray   # (n, 2) int
    mid_near: np.ndarray
    further: np.ndarray
    scale_fallback: bool = False

    def validate(self, n_points: int) -> None:
        for name in ("neighbor", "mid_near", "further"):
            pairs = getattr(self, name)
            if pairs.size == 0:
                continue
            if pairs.min() < 0 or pairs.max() >= n_points:
                raise ValueError(f"{name} pairs index out of range")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise ValueError(f"{name} pairs contain self-pairs")


def _pairwise_sq_dists(data: np.ndarray, anchors: np.ndarray | None = None):
    """Squared Euclidean distances, (len(anchors) or N) x N."""
    rows = data if anchors is None else data[anchors]
    sq = (
        np.sum(rows**2, axis=1)[:, None]
        + np.sum(data**2, axis=1)[None, :]
        - 2.0 * rows @ data.T
    )
    return np.maximum(sq, 0.0)


def neighbor_scales(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point scale = mean distance to the 4th-6th nearest neighbors.

    Returns (scales, degenerate mask); degenerate points (duplicate-heavy
    data where the scale would be 0) fall back to scale 1.
    """
    n = data.shape[0]
    scales = np.ones(n)
    degenerate = np.zeros(n, dtype=bool)
    lo = min(3, n - 2)
    hi = min(6, n - 1)  # self-distance sorts to the end; keep it out
    for start in range(0, n, 512):
        block = np.arange(start, min(start + 512, n))
        d = np.sqrt(_pairwise_sq_dists(data, block))
        d[np.arange(block.size), block] = np.inf
        d.sort(axis=1)
        sig = d[:, lo:hi].mean(axis=1)
        bad = ~(sig > 0)
        scales[block] = np.where(bad, 1.0, sig)
        degenerate[block] = bad
    return scales, degenerate


def scaled_distance(x_i, x_j, sigma_i: float, sigma_j: float) -> float:
    """Squared Euclidean distance divided by the two local scales."""
    if sigma_i <= 0 or sigma_j <= 0:
        raise ValueError("scales must be positive")
    diff = np.asarray(x_i, dtype=float) - np.asarray(x_j, dtype=float)
    return float(diff @ diff) / (sigma_i * sigma_j)


def build_pairs(data: np.ndarray, n_neighbors: int = 10, mn_ratio: float = 0.5,
                fp_ratio: float = 2.0, seed: int = 0) -> PairSets:
    """Construct the three pair sets, deterministically for a given seed."""
    data = np.asarray(data, dtype=float)
    n = data.shape[0]
    if n < n_neighbors + 1:
        raise InsufficientData(
            f"need at least n_neighbors + 1 = {n_neighbors + 1} points, got {n}"
        )
    rng = np.random.default_rng(seed)
    scales, degenerate = neighbor_scales(data)

    neighbor_rows = []
    neighbor_sets: list[set[int]] = []
    for start in range(0, n, 512):
        block = np.arange(start, min(start + 512, n))
        scaled = _pairwise_sq_dists(data, block) / np.outer(scales[block], scales)
        scaled[np.arange(block.size), block] = np.inf
        nearest = np.argsort(scaled, axis=1, kind="stable")[:, :n_neighbors]
        for local, i in enumerate(block):
            neighbor_sets.append(set(int(j) for j in nearest[local]))
            for j in nearest[local]:
                neighbor_rows.append((i, int(j)))

    mn_count = math.ceil(mn_ratio * n_neighbors)
    fp_count = math.ceil(fp_ratio * n_neighbors)

    mid_rows = []
    for i in range(n):
        chosen: set[int] = set()
        for _ in range(mn_count):
            for _attempt in range(100):
                cand = rng.choice(n - 1, size=min(6, n - 1), replace=False)
                cand = np.where(cand >= i, cand + 1, cand)
                d = np.sum((data[cand] - data[i]) ** 2, axis=1)
                second = int(cand[np.argsort(d, kind="stable")[min(1, cand.size - 1)]])
                if second not in chosen:
                    chosen.add(second)
                    mid_rows.append((i, second))
                    break

    fp_rows = []
    for i in range(n):
        allowed = np.array(
            [j for j in range(n) if j != i and j not in neighbor_sets[i]],
            dtype=int,
        )
        take = min(fp_count, allowed.size)
        picks = rng.choice(allowed, size=take, replace=False)
        for j in picks:
            fp_rows.append((i, int(j)))

    def as_array(rows):
        return (np.array(rows, dtype=int) if rows
                else np.empty((0, 2), dtype=int))

    pairs = PairSets(
        neighbor=as_array(neighbor_rows),
        mid_near=as_array(mid_rows),
        further=as_array(fp_rows),
        scale_fallback=bool(degenerate.any()),
    )
    pairs.validate(n)
    return pairs


def _pair_sq_dists(coords: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    diff = coords[pairs[:, 0]] - coords[pairs[:, 1]]
    return np.sum(diff**2, axis=1)


def pacmap_loss(coords: np.ndarray, pairs: PairSets, w: PhaseWeights) -> float:
    """The three-term pair loss at the given 2D coordinates."""
    total = 0.0
    if pairs.neighbor.size:
        d = _pair_sq_dists(coords, pairs.neighbor)
        total += w.w_nb * float(np.sum(d / (NB_DENOM + d)))
    if pairs.mid_near.size:
        d = _pair_sq_dists(coords, pairs.mid_near)
        total += w.w_mn * float(np.sum(d / (MN_DENOM + d)))
    if pairs.further.size:
        d = _pair_sq_dists(coords, pairs.further)
        total += w.w_fp * float(np.sum(1.0 / (1.0 + d)))
    return total


def loss_gradient(coords: np.ndarray, pairs: PairSets, w: PhaseWeights) -> np.ndarray:
    """Exact gradient of `pacmap_loss` w.r.t. every embedding coordinate."""
    grad = np.zeros_like(coords)

    def accumulate(pair_arr, dloss_dd):
        # d(loss)/d(y_i) = dloss_dd * 2 (y_i - y_j), opposite sign for y_j
        diff = coords[pair_arr[:, 0]] - coords[pair_arr[:, 1]]
        contrib = (2.0 * dloss_dd)[:, None] * diff
        for col in range(coords.shape[1]):
            grad[:, col] += np.bincount(
                pair_arr[:, 0], weights=contrib[:, col], minlength=len(coords)
            )
            grad[:, col] -= np.bincount(
                pair_arr[:, 1], weights=contrib[:, col], minlength=len(coords)
            )

    if pairs.neighbor.size and w.w_nb != 0.0:
        d = _pair_sq_dists(coords, pairs.neighbor)
        accumulate(pairs.neighbor, w.w_nb * NB_DENOM / (NB_DENOM + d) ** 2)
    if pairs.mid_near.size and w.w_mn != 0.0:
        d = _pair_sq_dists(coords, pairs.mid_near)
        accumulate(pairs.mid_near, w.w_mn * MN_DENOM / (MN_DENOM + d) ** 2)
    if pairs.further.size and w.w_fp != 0.0:
        d = _pair_sq_dists(coords, pairs.further)
        accumulate(pairs.further, w.w_fp * (-1.0) / (1.0 + d) ** 2)
    return grad


def weight_schedule(iteration: int, total_iters: int) -> PhaseWeights:
    """Three phases: anneal mid-near pull, consolidate, then separate."""
    if not 0 <= iteration < total_iters:
        raise ValueError("iteration out of range")
    phase1 = max(1, round(0.1 * total_iters))
    phase2_end = phase1 + max(1, round(0.3 * total_iters))
    if iteration < phase1:
        frac = iteration / max(1, phase1 - 1)
        return PhaseWeights(2.0, 1000.0 * (1.0 - frac) + 3.0 * frac, 1.0)
    if iteration < phase2_end:
        return PhaseWeights(3.0, 3.0, 1.0)
    return PhaseWeights(1.0, 0.0, 1.0)


def pca_init(data: np.ndarray, scale: float = 0.01) -> np.ndarray:
    """Deterministic 2D principal-component projection, scaled small."""
    centered = data - data.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:2]
    # Fix the SVD sign ambiguity: largest-magnitude loading made positive.
    signs = np.sign(comps[np.arange(comps.shape[0]),
                          np.argmax(np.abs(comps), axis=1)])
    signs[signs == 0] = 1.0
    comps = comps * signs[:, None]
    proj = centered @ comps.T
    if proj.shape[1] < 2:
        proj = np.column_stack([proj, np.zeros(len(proj))])
    return proj * scale


class PacmapEmbedding(BaseEstimator):
    """Pair-controlled manifold embedding to 2D.

    Parameters mirror the method defaults: 10 neighbors, mid-near ratio 0.5,
    further ratio 2.0, 450 Adam iterations at step size 1.0.
    """

    def __init__(self, n_neighbors: int = 10, mn_ratio: float = 0.5,
                 fp_ratio: float = 2.0, n_iters: int = 450,
                 learning_rate: float = 1.0, init_scale: float = 0.01,
                 n_project_neighbors: int = 5, seed: int = 0):
        self.n_neighbors = n_neighbors
        self.mn_ratio = mn_ratio
        self.fp_ratio = fp_ratio
        self.n_iters = n_iters
        self.learning_rate = learning_rate
        self.init_scale = init_scale
        self.n_project_neighbors = n_project_neighbors
        self.seed = seed

    def fit(self, X, y=None) -> "PacmapEmbedding":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("expected a 2D data matrix")
        if not np.all(np.isfinite(X)):
            raise ValueError("data contains non-finite values")
        if X.shape[0] < 20:
            raise InsufficientData(f"need at least 20 points, got {X.shape[0]}")

        pairs = build_pairs(X, self.n_neighbors, self.mn_ratio, self.fp_ratio,
                            self.seed)
        coords = pca_init(X, self.init_scale)

        beta1, beta2, eps = 0.9, 0.999, 1e-7
        m = np.zeros_like(coords)
        v = np.zeros_like(coords)
        history = []
        for it in range(self.n_iters):
            w = weight_schedule(it, self.n_iters)
            loss = pacmap_loss(coords, pairs, w)
            if not math.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss became {loss} at iteration {it} "
                    f"(weights {w}, coord range {np.abs(coords).max():.3g})"
                )
            history.append(loss)
            grad = loss_gradient(coords, pairs, w)
            m = beta1 * m + (1.0 - beta1) * grad
            v = beta2 * v + (1.0 - beta2) * grad**2
            m_hat = m / (1.0 - beta1 ** (it + 1))
            v_hat = v / (1.0 - beta2 ** (it + 1))
            coords = coords - self.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

        self.embedding_ = coords
        self.loss_history_ = history
        self.pairs_ = pairs
        self.training_data_ = X.copy()
        return self

    def fit_transform(self, X, y=None) -> np.ndarray:
        return self.fit(X).embedding_

    def transform(self, X) -> np.ndarray:
        """Place new points among their nearest training points.

        Inverse-distance weighting over the `n_project_neighbors` nearest
        original-space training points; an exact duplicate of a training
        point lands on that point's embedding coordinate (within the
        1e-9 weighting epsilon).
        """
        if not hasattr(self, "embedding_"):
            raise NotFittedError("fit must be called before transform")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        k = min(self.n_project_neighbors, len(self.training_data_))
        out = np.empty((X.shape[0], 2))
        for row, point in enumerate(X):
            d = np.sqrt(np.sum((self.training_data_ - point) ** 2, axis=1))
            nearest = np.argsort(d, kind="stable")[:k]
            weights = 1.0 / (d[nearest] + 1e-9)
            weights /= weights.sum()
            out[row] = weights @ self.embedding_[nearest]
        return out
