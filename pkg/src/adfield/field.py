"""Score-modulated Gaussian kernel field over ECEF points.

For a query x with retrieved neighbours j (positions p_j, scores s_j)::

    F(x) = sum_j s_j * exp(-|x - p_j|^2 / (2 sigma_j^2)),  sigma_j = sigma0 / (s_j + eps)

so high-score points get narrow, peaked kernels and low-score points broad
ones. F is an unnormalised influence value, not a density. Neighbours come
from an :class:`~adfield.ann.IvfIndex`, which makes F an approximation of the
full sum whenever the index misses a true neighbour.

Also home to the k-NN mean-distance baseline (:func:`knn_density`).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ann
from .errors import NonFiniteInputError, TooFewPointsError

UNDERFLOW = 1e-300


@dataclass(frozen=True)
class AdfParams:
    sigma0_m: float = 500.0
    k: int = 100
    nprobe: int = 16
    epsilon: float = 1e-6
    # None selects the adaptive bandwidth; a value pins every kernel to it
    fixed_sigma_m: float | None = None

    def __post_init__(self):
        if not self.sigma0_m > 0:
            raise ValueError("sigma0_m must be positive")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.fixed_sigma_m is not None and not self.fixed_sigma_m > 0:
            raise ValueError("fixed_sigma_m must be positive")
        ann.SearchParams(self.k, self.nprobe)

    @property
    def bandwidth_mode(self) -> str:
        return "adaptive" if self.fixed_sigma_m is None else "fixed"

    @property
    def search_params(self) -> ann.SearchParams:
        return ann.SearchParams(k=self.k, nprobe=self.nprobe)


def softplus_scores(x):
    x = np.asarray(x, dtype=float)
    return np.logaddexp(0.0, x)


class ScoredPointSet:
    """ECEF positions with one non-negative score each.

    Negative scores are rejected unless ``softplus=True``, in which case every
    score is mapped through log(1 + e^s) (applied to all scores, not just the
    negative ones).
    """

    def __init__(self, positions, scores, softplus: bool = False):
        pos = np.ascontiguousarray(positions, dtype=np.float64).reshape(-1, 3)
        sc = np.ascontiguousarray(scores, dtype=np.float64).reshape(-1)
        if len(pos) != len(sc):
            raise ValueError(f"{len(pos)} positions but {len(sc)} scores")
        if not (np.isfinite(pos).all() and np.isfinite(sc).all()):
            raise NonFiniteInputError("positions and scores must be finite")
        if softplus:
            sc = softplus_scores(sc)
        elif (sc < 0).any():
            raise ValueError("negative scores; pass softplus=True to transform them")
        pos.setflags(write=False)
        sc.setflags(write=False)
        self.positions = pos
        self.scores = sc

    def __len__(self):
        return len(self.scores)

    def build_index(self, nlist: int | None = None, cfg: ann.KMeansConfig = ann.KMeansConfig()) -> ann.IvfIndex:
        return ann.train(self.positions, nlist, cfg)


def adaptive_bandwidth(score, params: AdfParams):
    """Kernel width for a neighbour of the given score (metres)."""
    if params.fixed_sigma_m is not None:
        return np.full_like(np.asarray(score, dtype=float), params.fixed_sigma_m)[()]
    return params.sigma0_m / (np.asarray(score, dtype=float) + params.epsilon)


def kernel_contribution(sq_dist, sigma):
    """exp(-d^2 / 2 sigma^2), with values below 1e-300 flushed to zero."""
    sq_dist = np.asarray(sq_dist, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    val = np.exp(-0.5 * sq_dist / (sigma * sigma))
    return np.where(val < UNDERFLOW, 0.0, val)[()]


def field_from_neighbors(sq_dists: np.ndarray, scores: np.ndarray, params: AdfParams) -> float:
    """Sum of score-weighted kernels; ``sq_dists`` must already be ascending."""
    sigma = adaptive_bandwidth(scores, params)
    terms = scores * kernel_contribution(sq_dists, sigma)
    return math.fsum(terms.tolist())


def evaluate(query, pts: ScoredPointSet, idx: ann.IvfIndex, params: AdfParams) -> float:
    """Field value at one ECEF query, using the index's approximate neighbours."""
    nb = ann.search(idx, query, params.search_params)
    return field_from_neighbors(nb.sq_dists, pts.scores[nb.indices], params)


def evaluate_exact(query, pts: ScoredPointSet, params: AdfParams) -> float:
    """Same as :func:`evaluate` but with exact (brute-force) neighbour retrieval."""
    nb = ann.brute_force_search(pts.positions, query, params.k)
    return field_from_neighbors(nb.sq_dists, pts.scores[nb.indices], params)


def evaluate_many(queries, pts: ScoredPointSet, idx: ann.IvfIndex | None, params: AdfParams,
                  workers: int | None = None) -> np.ndarray:
    """Field at each query. ``idx=None`` falls back to brute-force neighbours."""
    qs = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    if idx is None:
        fn = lambda q: evaluate_exact(q, pts, params)  # noqa: E731
    else:
        fn = lambda q: evaluate(q, pts, idx, params)  # noqa: E731
    return np.array(ann._map_chunks(fn, qs, workers), dtype=np.float64)


def evaluate_all(pts: ScoredPointSet, idx: ann.IvfIndex, params: AdfParams,
                 exclude_self: bool = False, workers: int | None = None) -> np.ndarray:
    """Field evaluated at every point of ``pts``.

    By default each point counts as its own neighbour (distance zero). With
    ``exclude_self`` the point's own index is dropped from its neighbour set,
    and one extra neighbour is fetched so up to k others still contribute.
    """
    if not exclude_self:
        return evaluate_many(pts.positions, pts, idx, params, workers)
    wide = ann.SearchParams(k=params.k + 1, nprobe=params.nprobe)

    def one(i):
        nb = ann.search(idx, pts.positions[i], wide)
        keep = nb.indices != i
        ids, d2 = nb.indices[keep][:params.k], nb.sq_dists[keep][:params.k]
        return field_from_neighbors(d2, pts.scores[ids], params)

    return np.array(ann._map_chunks(one, np.arange(len(pts)), workers), dtype=np.float64)


def knn_density(query, ref_points, k: int, idx: ann.IvfIndex | None = None, nprobe: int = 16) -> float:
    """Mean Euclidean distance from ``query`` to its k nearest reference points.

    Lower means denser. Uses an exact scan unless an index is given.
    """
    n = len(ref_points) if idx is None else idx.n_points
    if n < k:
        raise TooFewPointsError(f"need at least k={k} reference points, have {n}")
    if idx is None:
        nb = ann.brute_force_search(ref_points, query, k)
    else:
        nb = ann.search(idx, query, ann.SearchParams(k=k, nprobe=nprobe))
    return math.fsum(np.sqrt(nb.sq_dists).tolist()) / len(nb)


def knn_density_mask(distances, percentile: float = 75.0) -> np.ndarray:
    """Flag samples whose mean k-NN distance is at or below the given percentile.

    At the default 75 this keeps the three quarters of a trace that sit
    closest to the reference points.
    """
    d = np.asarray(distances, dtype=float)
    if d.size == 0:
        return np.zeros(0, dtype=bool)
    return d <= np.percentile(d, percentile)
