"""Trajectory-conditioned POI extraction from a field.

The field is sampled along each flight and a sample is flagged when its value
reaches the flight's own percentile (75th by default). The threshold is per
trace, never global, so a flight crossing a busy region only flags what stands
out against its own background.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import ann, field
from .trajectory import Trajectory

DEFAULT_PERCENTILE = 75.0


@dataclass
class FieldTrace:
    flight_id: str
    t: np.ndarray
    lon_deg: np.ndarray
    lat_deg: np.ndarray
    alt_m: np.ndarray
    values: np.ndarray
    poi_mask: np.ndarray

    def __len__(self):
        return len(self.values)


def evaluate_trace(traj: Trajectory, pts: field.ScoredPointSet, idx: ann.IvfIndex | None,
                   params: field.AdfParams) -> FieldTrace:
    """Field value at every sample of ``traj`` (ECEF), with geodetic coordinates kept alongside.

    ``idx=None`` uses exact neighbour retrieval. The mask starts all-false.
    """
    traj.validate()
    values = field.evaluate_many(traj.ecef(), pts, idx, params)
    return FieldTrace(traj.flight_id, traj.t, traj.lon_deg, traj.lat_deg, traj.alt_m,
                      values, np.zeros(len(values), dtype=bool))


def percentile_mask(values, percentile: float = DEFAULT_PERCENTILE) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty trace")
    if not 0 < percentile < 100:
        raise ValueError(f"percentile must lie in (0, 100), got {percentile}")
    return v >= np.percentile(v, percentile, method="linear")


def relative_threshold(trace: FieldTrace, percentile: float = DEFAULT_PERCENTILE) -> FieldTrace:
    return replace(trace, poi_mask=percentile_mask(trace.values, percentile))


def extract_pois(trajs, pts: field.ScoredPointSet, idx: ann.IvfIndex | None, params: field.AdfParams,
                 percentile: float = DEFAULT_PERCENTILE, workers: int | None = None) -> list[FieldTrace]:
    """Evaluate and threshold a batch of flights; output sorted by flight id."""
    def one(tr):
        return relative_threshold(evaluate_trace(tr, pts, idx, params), percentile)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(one, trajs))
    else:
        traces = [one(tr) for tr in trajs]
    return sorted(traces, key=lambda tr: tr.flight_id)


def knn_trace(traj: Trajectory, ref_points, k: int, idx: ann.IvfIndex | None = None, nprobe: int = 16,
              percentile: float = DEFAULT_PERCENTILE) -> FieldTrace:
    """k-NN mean-distance baseline along a flight.

    ``values`` holds the mean distances; the mask keeps samples at or below
    the trace's ``percentile`` of those distances.
    """
    traj.validate()
    d = np.array([field.knn_density(q, ref_points, k, idx, nprobe) for q in traj.ecef()])
    return FieldTrace(traj.flight_id, traj.t, traj.lon_deg, traj.lat_deg, traj.alt_m,
                      d, field.knn_density_mask(d, percentile))


def flagged_ecef(traces) -> np.ndarray:
    """ECEF positions of every flagged sample across ``traces``."""
    from .geo import lla_deg_to_ecef
    chunks = [lla_deg_to_ecef(tr.lon_deg[tr.poi_mask], tr.lat_deg[tr.poi_mask], tr.alt_m[tr.poi_mask])
              for tr in traces]
    chunks = [c.reshape(-1, 3) for c in chunks]
    return np.concatenate(chunks) if chunks else np.zeros((0, 3))
