"""Inverted-file (IVF) approximate k-NN index over 3D points.

Training is plain Lloyd k-means on (a seeded sample of) the points; every
point is then filed under its nearest centroid. A query ranks the centroids,
scans the ``nprobe`` closest inverted lists and returns the exact k nearest
among those candidates. With ``nprobe == nlist`` the result equals
:func:`brute_force_search`.

Distances are squared Euclidean throughout. Ties are always broken towards
the smaller index so results are reproducible.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyIndexError, NonFiniteInputError, SnapshotFormatError, TooFewPointsError

SNAPSHOT_MAGIC = b"ADFI"
SNAPSHOT_VERSION = 1
DEFAULT_NLIST = 4096


@dataclass(frozen=True)
class KMeansConfig:
    max_iters: int = 25
    seed: int = 0
    init: str = "random_points"
    # cap on the training sample, as multiples of nlist
    max_points_per_centroid: int = 256

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init != "random_points":
            raise ValueError(f"unknown k-means init {self.init!r}")


@dataclass(frozen=True)
class SearchParams:
    k: int = 100
    nprobe: int = 16

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.nprobe < 1:
            raise ValueError("nprobe must be >= 1")


@dataclass(frozen=True)
class NeighborSet:
    indices: np.ndarray
    sq_dists: np.ndarray

    def __len__(self):
        return len(self.indices)


def default_nlist(n_points: int) -> int:
    """``min(4096, max(1, floor(sqrt(n)) * 4))``, never more than ``n_points``."""
    return max(1, min(DEFAULT_NLIST, max(1, math.isqrt(n_points) * 4), n_points))


def _as_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise NonFiniteInputError("points contain NaN or inf")
    return pts


def smallest_k(values: np.ndarray, k: int, keys: np.ndarray | None = None) -> np.ndarray:
    """Positions of the ``k`` smallest values in ascending order.

    Ties go to the smaller ``keys`` entry (default: the smaller position).
    """
    n = len(values)
    if k < n:
        part = np.argpartition(values, k - 1)[:k]
        cand = np.flatnonzero(values <= values[part].max())
    else:
        cand = np.arange(n)
    tie = cand if keys is None else keys[cand]
    order = np.lexsort((tie, values[cand]))
    return cand[order[:k]]


def _nearest_centroid(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    _, labels = cKDTree(centroids).query(points, k=1)
    return labels.astype(np.int64)


def _kmeans(sample: np.ndarray, nlist: int, cfg: KMeansConfig, rng: np.random.Generator) -> np.ndarray:
    n = len(sample)
    centroids = sample[rng.choice(n, size=nlist, replace=False)].copy()
    if nlist == 1:
        return sample.mean(axis=0, keepdims=True)
    labels = None
    for _ in range(cfg.max_iters):
        new_labels = _nearest_centroid(sample, centroids)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        counts = np.bincount(labels, minlength=nlist)
        sums = np.stack([np.bincount(labels, weights=sample[:, d], minlength=nlist) for d in range(3)], axis=1)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        for empty in np.flatnonzero(~nonempty):
            # split the largest cluster: its farthest member seeds the empty one
            big = int(np.argmax(counts))
            members = np.flatnonzero(labels == big)
            d2 = ((sample[members] - centroids[big]) ** 2).sum(axis=1)
            far = members[int(np.argmax(d2))]
            centroids[empty] = sample[far]
            labels[far] = empty
            counts[big] -= 1
            counts[empty] = 1
            centroids[big] = sample[labels == big].mean(axis=0)
    return centroids


class IvfIndex:
    """Trained IVF index. Immutable once built; safe to share across threads."""

    def __init__(self, centroids: np.ndarray, list_ids: list[np.ndarray], points: np.ndarray):
        self.centroids = np.ascontiguousarray(centroids, dtype=np.float64)
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        lengths = np.array([len(ids) for ids in list_ids], dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(lengths)])
        self.ids = (np.concatenate(list_ids).astype(np.int64) if list_ids else np.zeros(0, np.int64))
        # points stored contiguously in list order so a probe is one slice
        self._list_points = self.points[self.ids]
        for arr in (self.centroids, self.points, self.offsets, self.ids, self._list_points):
            arr.setflags(write=False)

    @property
    def nlist(self) -> int:
        return len(self.centroids)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def inverted_list(self, j: int) -> np.ndarray:
        return self.ids[self.offsets[j]:self.offsets[j + 1]]

    @property
    def inverted_lists(self) -> list[np.ndarray]:
        return [self.inverted_list(j) for j in range(self.nlist)]

    def check_invariants(self) -> None:
        """Raise AssertionError if the lists do not partition the points by nearest centroid."""
        assert self.offsets[-1] == self.n_points
        assert np.array_equal(np.sort(self.ids), np.arange(self.n_points))
        if self.n_points:
            labels = np.repeat(np.arange(self.nlist), np.diff(self.offsets))
            own = ((self._list_points - self.centroids[labels]) ** 2).sum(axis=1)
            best, _ = cKDTree(self.centroids).query(self._list_points, k=1)
            assert np.all(own <= best ** 2 * (1 + 1e-12) + 1e-9)

    def search(self, query, params: SearchParams) -> NeighborSet:
        return search(self, query, params)

    def search_batch(self, queries, params: SearchParams, workers: int | None = None) -> list[NeighborSet]:
        return search_batch(self, queries, params, workers)

    def __repr__(self):
        return f"IvfIndex(n_points={self.n_points}, nlist={self.nlist})"


def train(points, nlist: int | None = None, cfg: KMeansConfig = KMeansConfig()) -> IvfIndex:
    """Run k-means with ``nlist`` clusters and file every point under its nearest centroid."""
    pts = _as_points(points)
    n = len(pts)
    if nlist is None:
        if n == 0:
            raise TooFewPointsError("cannot train on zero points")
        nlist = default_nlist(n)
    if nlist < 1:
        raise ValueError("nlist must be >= 1")
    if n < nlist:
        raise TooFewPointsError(f"{n} points cannot fill {nlist} lists")
    rng = np.random.default_rng(cfg.seed)
    cap = cfg.max_points_per_centroid * nlist
    sample = pts if n <= cap else pts[np.sort(rng.choice(n, size=cap, replace=False))]
    centroids = _kmeans(sample, nlist, cfg, rng)
    labels = _nearest_centroid(pts, centroids) if nlist > 1 else np.zeros(n, np.int64)
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(nlist + 1))
    list_ids = [order[bounds[j]:bounds[j + 1]] for j in range(nlist)]
    return IvfIndex(centroids, list_ids, pts)


def _check_query(query) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64).reshape(3)
    if not np.isfinite(q).all():
        raise NonFiniteInputError("query is not finite")
    return q


def search(idx: IvfIndex, query, params: SearchParams) -> NeighborSet:
    """Exact k-NN restricted to the ``nprobe`` nearest inverted lists."""
    if idx.n_points == 0:
        raise EmptyIndexError("index holds no points")
    q = _check_query(query)
    nprobe = min(params.nprobe, idx.nlist)
    cdist = ((idx.centroids - q) ** 2).sum(axis=1)
    probes = smallest_k(cdist, nprobe)
    starts = idx.offsets[probes]
    stops = idx.offsets[probes + 1]
    cand_pts = np.concatenate([idx._list_points[a:b] for a, b in zip(starts, stops)])
    cand_ids = np.concatenate([idx.ids[a:b] for a, b in zip(starts, stops)])
    diff = cand_pts - q
    d2 = np.einsum("ij,ij->i", diff, diff)
    sel = smallest_k(d2, params.k, keys=cand_ids)
    return NeighborSet(cand_ids[sel], d2[sel])


def brute_force_search(points, query, k: int) -> NeighborSet:
    """Exact k nearest neighbours by a full scan."""
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) == 0:
        raise EmptyIndexError("no points to search")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = _check_query(query)
    diff = pts - q
    d2 = np.einsum("ij,ij->i", diff, diff)
    sel = smallest_k(d2, k)
    return NeighborSet(sel.astype(np.int64), d2[sel])


def _map_chunks(fn, items: np.ndarray, workers: int | None) -> list:
    if not workers or workers <= 1 or len(items) < 2:
        return [fn(q) for q in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def search_batch(idx: IvfIndex, queries, params: SearchParams, workers: int | None = None) -> list[NeighborSet]:
    qs = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    return _map_chunks(lambda q: search(idx, q, params), qs, workers)


def save(idx: IvfIndex, path) -> None:
    """Write the little-endian snapshot format (magic ``ADFI``, version 1)."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<IQI", SNAPSHOT_VERSION, idx.n_points, idx.nlist))
        fh.write(idx.centroids.astype("<f8").tobytes())
        for j in range(idx.nlist):
            ids = idx.inverted_list(j)
            fh.write(struct.pack("<Q", len(ids)))
            fh.write(ids.astype("<u8").tobytes())
        fh.write(idx.points.astype("<f8").tobytes())


def load(path) -> IvfIndex:
    data = Path(path).read_bytes()
    if data[:4] != SNAPSHOT_MAGIC:
        raise SnapshotFormatError(f"bad magic {data[:4]!r}")
    try:
        version, n_points, nlist = struct.unpack_from("<IQI", data, 4)
        if version != SNAPSHOT_VERSION:
            raise SnapshotFormatError(f"unsupported snapshot version {version}")
        pos = 4 + struct.calcsize("<IQI")
        centroids = np.frombuffer(data, "<f8", nlist * 3, pos).reshape(nlist, 3)
        pos += nlist * 24
        lists = []
        for _ in range(nlist):
            (length,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            lists.append(np.frombuffer(data, "<u8", length, pos).astype(np.int64))
            pos += 8 * length
        points = np.frombuffer(data, "<f8", n_points * 3, pos).reshape(n_points, 3)
        pos += n_points * 24
    except (struct.error, ValueError) as exc:
        raise SnapshotFormatError(f"truncated snapshot: {exc}") from exc
    if pos != len(data):
        raise SnapshotFormatError("trailing bytes after snapshot")
    idx = IvfIndex(centroids.copy(), lists, points.copy())
    if idx.offsets[-1] != n_points:
        raise SnapshotFormatError("inverted lists do not cover the points")
    return idx
