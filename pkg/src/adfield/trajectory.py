"""Kinematic POI baseline for flight trajectories.

Per flight:

1. positions go to a local ENU frame anchored at the first sample;
2. velocity/acceleration come from finite differences (or reported velocity),
   curvature is ``|v x a| / |v|^3``;
3. each interior sample is predicted one step ahead by blending a
   constant-acceleration step with a cubic Hermite extrapolation, weighted
   by ``w = exp(-alpha * kappa)`` with ``alpha = ln 5 / kappa_95``;
4. residuals are scored with a per-flight Mahalanobis distance, divided by a
   time-spacing factor, min-max normalised and thresholded.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .errors import NonMonotoneTimeError, TooShortError

log = logging.getLogger(__name__)

MIN_SAMPLES = 5
MIN_INTERIOR = 4
SPEED_GUARD = 0.1       # m/s, below this curvature is forced to 0
KAPPA_FLOOR = 1e-9      # 1/m
TIKHONOV = 1e-5
NORM_EPS = 1e-12
FLAT_LOSS_TOL = 1e-6
POI_THRESHOLD = 0.75


@dataclass
class Trajectory:
    """One flight: timestamps (s), geodetic samples (deg, m), optional ENU velocity (m/s).

    ``vel_enu`` rows are expressed in each sample's own local east/north/up frame.
    """
    flight_id: str
    t: np.ndarray
    lon_deg: np.ndarray
    lat_deg: np.ndarray
    alt_m: np.ndarray
    vel_enu: np.ndarray | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.lon_deg = np.asarray(self.lon_deg, dtype=float)
        self.lat_deg = np.asarray(self.lat_deg, dtype=float)
        self.alt_m = np.asarray(self.alt_m, dtype=float)
        n = len(self.t)
        if not (len(self.lon_deg) == len(self.lat_deg) == len(self.alt_m) == n):
            raise ValueError("sample arrays differ in length")
        if self.vel_enu is not None:
            self.vel_enu = np.asarray(self.vel_enu, dtype=float).reshape(n, 3)

    def __len__(self):
        return len(self.t)

    def validate(self, min_samples: int = MIN_SAMPLES) -> None:
        if len(self) < min_samples:
            raise TooShortError(f"flight {self.flight_id}: {len(self)} samples, need {min_samples}")
        if np.any(np.diff(self.t) <= 0):
            raise NonMonotoneTimeError(f"flight {self.flight_id}: timestamps not strictly increasing")
        arrays = [self.t, self.lon_deg, self.lat_deg, self.alt_m]
        if self.vel_enu is not None:
            arrays.append(self.vel_enu.ravel())
        if not all(np.isfinite(a).all() for a in arrays):
            raise ValueError(f"flight {self.flight_id}: non-finite values")

    @property
    def origin(self) -> geo.GeodeticCoord:
        return geo.GeodeticCoord.from_degrees(self.lat_deg[0], self.lon_deg[0], self.alt_m[0])

    def ecef(self) -> np.ndarray:
        return geo.lla_deg_to_ecef(self.lon_deg, self.lat_deg, self.alt_m)

    def local_positions(self) -> np.ndarray:
        return geo.ecef_to_enu_array(self.ecef(), self.origin)

    def local_velocities(self) -> np.ndarray | None:
        """Reported velocities rotated into the flight's frame (ENU at sample 0)."""
        if self.vel_enu is None:
            return None
        lat = np.radians(self.lat_deg)
        lon = np.radians(self.lon_deg)
        sl, cl, so, co = np.sin(lat), np.cos(lat), np.sin(lon), np.cos(lon)
        # rows of each sample's ENU basis in ECEF, shape (n, 3, 3)
        basis = np.stack([
            np.stack([-so, co, np.zeros_like(so)], axis=-1),
            np.stack([-sl * co, -sl * so, cl], axis=-1),
            np.stack([cl * co, cl * so, sl], axis=-1),
        ], axis=1)
        v_ecef = np.einsum("ni,nij->nj", self.vel_enu, basis)
        o = self.origin
        return v_ecef @ geo.enu_rotation(o.lat_rad, o.lon_rad).T


@dataclass
class KinematicSeries:
    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    accelerations: np.ndarray
    curvatures: np.ndarray


@dataclass
class PredictionSeries:
    indices: np.ndarray         # interior sample indices
    predicted: np.ndarray
    residuals: np.ndarray
    weights: np.ndarray         # CA blending weight per interior sample
    alpha: float


@dataclass
class LossSeries:
    indices: np.ndarray
    distances: np.ndarray
    time_factors: np.ndarray
    losses: np.ndarray
    covariance: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PoiRecord:
    flight_id: str
    point_index: int
    lon_deg: float
    lat_deg: float
    alt_m: float
    score: float


def curvature(v: np.ndarray, a: np.ndarray, speed_guard: float = SPEED_GUARD) -> np.ndarray:
    speed = np.linalg.norm(v, axis=1)
    cross = np.linalg.norm(np.cross(v, a), axis=1)
    safe = np.where(speed < speed_guard, 1.0, speed)
    return np.where(speed < speed_guard, 0.0, cross / safe ** 3)


def kinematics_from_positions(t, positions, velocities=None) -> KinematicSeries:
    """Finite-difference kinematics for local Cartesian positions.

    Second-order differences throughout (central inside, one-sided at the
    ends), which are exact for quadratic motion.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(positions, dtype=float)
    if len(t) < MIN_SAMPLES:
        raise TooShortError(f"{len(t)} samples, need {MIN_SAMPLES}")
    if np.any(np.diff(t) <= 0):
        raise NonMonotoneTimeError("timestamps not strictly increasing")
    v = np.gradient(p, t, axis=0, edge_order=2) if velocities is None else np.asarray(velocities, dtype=float)
    a = np.gradient(v, t, axis=0, edge_order=2)
    return KinematicSeries(t, p, v, a, curvature(v, a))


def derive_kinematics(traj: Trajectory) -> KinematicSeries:
    traj.validate()
    return kinematics_from_positions(traj.t, traj.local_positions(), traj.local_velocities())


def smoothing_alpha(curvatures, kappa_floor: float = KAPPA_FLOOR) -> float:
    """ln 5 over the flight's 95th-percentile curvature, so w(kappa_95) = 0.2."""
    k = np.asarray(curvatures, dtype=float)
    if k.size == 0:
        raise ValueError("empty curvature list")
    k95 = float(np.percentile(k, 95))
    return math.log(5.0) / max(k95, kappa_floor)


def blend_weight(kappa, alpha: float):
    return np.exp(-alpha * np.asarray(kappa, dtype=float))


def hermite_extrapolate(t0, p0, v0, t1, p1, v1, t):
    """Cubic Hermite segment through (t0, p0, v0) and (t1, p1, v1), evaluated at t.

    Works row-wise on arrays; ``t`` outside [t0, t1] extrapolates the cubic.
    """
    h = (t1 - t0)[:, None]
    u = ((t - t0) / (t1 - t0))[:, None]
    u2, u3 = u * u, u * u * u
    h00 = 2 * u3 - 3 * u2 + 1
    h10 = u3 - 2 * u2 + u
    h01 = -2 * u3 + 3 * u2
    h11 = u3 - u2
    return h00 * p0 + h10 * h * v0 + h01 * p1 + h11 * h * v1


def interior_indices(n: int) -> np.ndarray:
    return np.arange(2, n - 2)


def predict_blended(kin: KinematicSeries, alpha: float | None = None) -> PredictionSeries:
    """One-step-ahead blended prediction for every interior sample ``[2, n-2)``.

    The CA step starts from sample i-1; the spline is the Hermite segment over
    [t_{i-2}, t_{i-1}] extrapolated to t_i, so sample i itself is never an
    interpolation node.
    """
    n = len(kin.t)
    if n < MIN_SAMPLES:
        raise TooShortError(f"{n} samples, need {MIN_SAMPLES}")
    if alpha is None:
        alpha = smoothing_alpha(kin.curvatures)
    i = interior_indices(n)
    t, p, v, a = kin.t, kin.positions, kin.velocities, kin.accelerations
    dt = (t[i] - t[i - 1])[:, None]
    p_ca = p[i - 1] + v[i - 1] * dt + 0.5 * a[i - 1] * dt * dt
    p_spline = hermite_extrapolate(t[i - 2], p[i - 2], v[i - 2], t[i - 1], p[i - 1], v[i - 1], t[i])
    w = blend_weight(kin.curvatures[i], alpha)
    pred = w[:, None] * p_ca + (1.0 - w[:, None]) * p_spline
    return PredictionSeries(i, pred, pred - p[i], w, alpha)


def mahalanobis_loss(pred: PredictionSeries, t, lam: float = TIKHONOV) -> LossSeries:
    """Time-normalised Mahalanobis loss of the prediction residuals.

    Residuals are centred on the flight mean, ``Sigma = cov + lam * I`` and the
    distance is divided by ``sqrt(dt_i / mean dt)``.
    """
    r = pred.residuals
    if len(r) < MIN_INTERIOR:
        raise TooShortError(f"{len(r)} interior residuals, need {MIN_INTERIOR}")
    t = np.asarray(t, dtype=float)
    centred = r - r.mean(axis=0)
    sigma = np.cov(centred, rowvar=False) + lam * np.eye(3)
    sigma = 0.5 * (sigma + sigma.T)
    chol = np.linalg.cholesky(sigma)
    z = np.linalg.solve(chol, centred.T)
    d = np.sqrt((z * z).sum(axis=0))
    step = t[pred.indices] - t[pred.indices - 1]
    tf = np.sqrt(step / step.mean())
    return LossSeries(pred.indices, d, tf, d / tf, sigma)


def normalize_scores(losses, eps: float = NORM_EPS, flat_tol: float = FLAT_LOSS_TOL) -> np.ndarray:
    """Min-max rescale to [0, 1]. A loss range under ``flat_tol`` counts as flat (all zeros)."""
    L = np.asarray(losses, dtype=float)
    if L.size == 0:
        return L.copy()
    lo, span = L.min(), L.max() - L.min()
    if span < flat_tol:
        return np.zeros_like(L)
    return np.clip((L - lo) / (span + eps), 0.0, 1.0)


def label_pois(loss: LossSeries, traj: Trajectory, threshold: float = POI_THRESHOLD,
               scores: np.ndarray | None = None) -> list[PoiRecord]:
    if scores is None:
        scores = normalize_scores(loss.losses)
    out = []
    for idx, s in zip(loss.indices[scores >= threshold], scores[scores >= threshold]):
        out.append(PoiRecord(traj.flight_id, int(idx), float(traj.lon_deg[idx]), float(traj.lat_deg[idx]),
                             float(traj.alt_m[idx]), float(s)))
    return out


@dataclass
class FlightResult:
    flight_id: str
    loss: LossSeries
    scores: np.ndarray
    pois: list[PoiRecord]


def score_flight(traj: Trajectory, threshold: float = POI_THRESHOLD, lam: float = TIKHONOV) -> FlightResult:
    kin = derive_kinematics(traj)
    pred = predict_blended(kin)
    loss = mahalanobis_loss(pred, traj.t, lam)
    scores = normalize_scores(loss.losses)
    return FlightResult(traj.flight_id, loss, scores, label_pois(loss, traj, threshold, scores))


def run_baseline(trajs, threshold: float = POI_THRESHOLD, lam: float = TIKHONOV,
                 workers: int | None = None) -> tuple[list[PoiRecord], list[str]]:
    """Score every flight; flights that cannot be scored are skipped and returned by id."""
    def one(tr):
        try:
            return score_flight(tr, threshold, lam)
        except (TooShortError, NonMonotoneTimeError, ValueError) as exc:
            log.warning("skipping flight %s: %s", tr.flight_id, exc)
            return tr.flight_id

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, trajs))
    else:
        results = [one(tr) for tr in trajs]
    pois, skipped = [], []
    for res in results:
        if isinstance(res, str):
            skipped.append(res)
        else:
            pois.extend(res.pois)
    pois.sort(key=lambda r: (r.flight_id, r.point_index))
    return pois, skipped
