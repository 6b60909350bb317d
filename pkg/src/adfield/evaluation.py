"""Spatial matching between two point sets, and latency benchmarks.

Matching is greedy and one-to-one: every pair closer than the threshold is a
candidate, candidates are consumed nearest first (ties by index in set A, then
set B) and each point can be used once. Set A is the reference (baseline) and
set B the detections, so::

    precision = matched / |B|,   recall = matched / |A|
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import ann, field


@dataclass(frozen=True)
class MatchReport:
    threshold_m: float
    matched: int
    unique_a: int
    unique_b: int

    @property
    def precision(self) -> float:
        n = self.matched + self.unique_b
        return self.matched / n if n else 0.0

    @property
    def recall(self) -> float:
        n = self.matched + self.unique_a
        return self.matched / n if n else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def as_row(self) -> dict:
        row = asdict(self)
        row.update(precision=self.precision, recall=self.recall, f1=self.f1)
        return row


def candidate_pairs(set_a, set_b, max_threshold_m: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """All (i, j, dist) with dist <= threshold, sorted by (dist, i, j)."""
    a = np.asarray(set_a, dtype=float).reshape(-1, 3)
    b = np.asarray(set_b, dtype=float).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    sdm = cKDTree(a).sparse_distance_matrix(cKDTree(b), max_threshold_m, output_type="ndarray")
    ia, ib, dist = sdm["i"].astype(np.int64), sdm["j"].astype(np.int64), sdm["v"]
    order = np.lexsort((ib, ia, dist))
    return ia[order], ib[order], dist[order]


def _greedy(ia, ib, dist, n_a: int, n_b: int, threshold_m: float) -> int:
    used_a = np.zeros(n_a, dtype=bool)
    used_b = np.zeros(n_b, dtype=bool)
    matched = 0
    stop = np.searchsorted(dist, threshold_m, side="right")
    for i, j in zip(ia[:stop].tolist(), ib[:stop].tolist()):
        if not used_a[i] and not used_b[j]:
            used_a[i] = used_b[j] = True
            matched += 1
    return matched


def spatial_match(set_a, set_b, threshold_m: float) -> MatchReport:
    if not threshold_m > 0:
        raise ValueError("threshold_m must be positive")
    return threshold_sweep(set_a, set_b, [threshold_m])[0]


def threshold_sweep(set_a, set_b, thresholds) -> list[MatchReport]:
    """One report per threshold; candidate pairs are found once at the largest."""
    thresholds = [float(t) for t in thresholds]
    if any(t <= 0 for t in thresholds):
        raise ValueError("thresholds must be positive")
    n_a, n_b = len(set_a), len(set_b)
    if not thresholds:
        return []
    ia, ib, dist = candidate_pairs(set_a, set_b, max(thresholds))
    out = []
    for thr in thresholds:
        m = _greedy(ia, ib, dist, n_a, n_b, thr)
        out.append(MatchReport(thr, m, n_a - m, n_b - m))
    return out


def report_from_counts(matched: int, unique_a: int, unique_b: int, threshold_m: float = float("nan")) -> MatchReport:
    return MatchReport(threshold_m, matched, unique_a, unique_b)


@dataclass(frozen=True)
class BenchReport:
    mode: str
    ms_per_query: float
    n_queries: int
    k: int
    nprobe: int
    sigma0_m: float
    nlist: int
    checksum: float


def bench_queries(pts: field.ScoredPointSet, n_queries: int, seed: int, jitter_m: float = 500.0) -> np.ndarray:
    """Seeded queries: random data points displaced by Gaussian noise."""
    rng = np.random.default_rng(seed)
    base = pts.positions[rng.integers(0, len(pts), size=n_queries)]
    return base + rng.normal(0.0, jitter_m, size=base.shape)


def latency_bench(pts: field.ScoredPointSet, params: field.AdfParams, mode: str, n_queries: int = 100,
                  seed: int = 0, idx: ann.IvfIndex | None = None, queries=None, repeats: int = 1) -> BenchReport:
    """Mean wall-clock time of one field evaluation, single-threaded.

    ``mode`` is ``"ivf"`` (needs ``idx``) or ``"brute"``. With ``repeats > 1``
    the fastest pass is reported.
    """
    if n_queries < 100:
        raise ValueError("n_queries must be at least 100")
    if mode not in ("ivf", "brute"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "ivf" and idx is None:
        raise ValueError("ivf mode needs a trained index")
    qs = bench_queries(pts, n_queries, seed) if queries is None else np.asarray(queries, dtype=float)
    best = float("inf")
    for _ in range(max(1, repeats)):
        start = time.perf_counter()
        if mode == "ivf":
            vals = [field.evaluate(q, pts, idx, params) for q in qs]
        else:
            vals = [field.evaluate_exact(q, pts, params) for q in qs]
        best = min(best, time.perf_counter() - start)
    return BenchReport(mode, 1000.0 * best / len(qs), len(qs), params.k, params.nprobe, params.sigma0_m,
                       idx.nlist if idx is not None else 0, float(np.sum(vals)))
