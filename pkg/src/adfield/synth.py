"""Seeded synthetic flights and scored point sets.

Flights follow routes through shared waypoints. Each waypoint is flown-by on
a circular arc whose radius comes from the flight's speed and turn rate, and
some flights fly a full orbit (a holding turn) at one waypoint. Arc entry and
exit points are the ground-truth maneuver locations. Per-flight jitter on
waypoints, speed and altitude keeps flights on the same route close but not
identical.

Geometry is built in a flat local east/north plane around ``origin`` and
mapped to geodetic coordinates with the local meridian / prime-vertical radii;
heights are ellipsoidal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geo
from .field import ScoredPointSet
from .rng import stream
from .trajectory import Trajectory


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_reference_flights: int = 300
    n_eval_flights: int = 40
    n_sites: int = 14
    n_routes: int = 12
    waypoints_per_route: tuple[int, int] = (3, 3)
    region_km: float = 80.0
    min_site_spacing_km: float = 14.0
    speed_mps: tuple[float, float] = (40.0, 70.0)
    turn_rate_deg_s: float = 12.0       # 0 gives straight flights only
    holding_prob: float = 0.3
    dt_s: float = 1.0
    waypoint_jitter_m: float = 40.0
    position_noise_m: float = 0.02
    velocity_noise_mps: float = 0.05
    with_velocity: bool = False
    alt_range_m: tuple[float, float] = (1500.0, 6000.0)
    origin_lat_deg: float = 30.578
    origin_lon_deg: float = 103.947
    origin_alt_m: float = 0.0


def turn_heavy(**overrides) -> SynthConfig:
    """Every route turns and half the flights also hold."""
    return SynthConfig(**{"holding_prob": 0.5, **overrides})


def straight_only(**overrides) -> SynthConfig:
    return SynthConfig(**{"turn_rate_deg_s": 0.0, "holding_prob": 0.0, **overrides})


@dataclass
class SynthFlight:
    trajectory: Trajectory
    route: int
    maneuvers_enu: np.ndarray   # (m, 3) arc entry/exit points


@dataclass
class SynthData:
    config: SynthConfig
    reference: list[SynthFlight]
    evaluation: list[SynthFlight]
    sites_enu: np.ndarray
    routes: list[list[int]]

    @property
    def reference_trajectories(self) -> list[Trajectory]:
        return [f.trajectory for f in self.reference]

    @property
    def evaluation_trajectories(self) -> list[Trajectory]:
        return [f.trajectory for f in self.evaluation]

    def maneuvers_ecef(self, which: str = "evaluation") -> np.ndarray:
        flights = self.evaluation if which == "evaluation" else self.reference
        pts = [f.maneuvers_enu for f in flights if len(f.maneuvers_enu)]
        if not pts:
            return np.zeros((0, 3))
        return enu_plane_to_ecef(np.concatenate(pts), self.config)


def _origin(cfg: SynthConfig) -> geo.GeodeticCoord:
    return geo.GeodeticCoord.from_degrees(cfg.origin_lat_deg, cfg.origin_lon_deg, cfg.origin_alt_m)


def enu_plane_to_lla(enu: np.ndarray, cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Flat east/north/height -> (lon_deg, lat_deg, alt_m) via local radii of curvature."""
    o = _origin(cfg)
    e2 = geo.WGS84.ecc_sq
    n_rad = float(geo.prime_vertical_radius(o.lat_rad))
    m_rad = n_rad * (1 - e2) / (1 - e2 * math.sin(o.lat_rad) ** 2)
    lat = o.lat_rad + enu[:, 1] / m_rad
    lon = o.lon_rad + enu[:, 0] / (n_rad * math.cos(o.lat_rad))
    return np.degrees(lon), np.degrees(lat), cfg.origin_alt_m + enu[:, 2]


def enu_plane_to_ecef(enu: np.ndarray, cfg: SynthConfig) -> np.ndarray:
    lon, lat, alt = enu_plane_to_lla(np.asarray(enu, dtype=float).reshape(-1, 3), cfg)
    return geo.lla_deg_to_ecef(lon, lat, alt)


def _sites(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    half = cfg.region_km * 500.0
    out: list[np.ndarray] = []
    for _ in range(10000):
        if len(out) == cfg.n_sites:
            break
        cand = rng.uniform(-half, half, size=2)
        if all(np.hypot(*(cand - s)) >= cfg.min_site_spacing_km * 1000 for s in out):
            out.append(cand)
    return np.array(out)


def _routes(cfg: SynthConfig, sites: np.ndarray, rng: np.random.Generator) -> list[list[int]]:
    routes = []
    lo, hi = cfg.waypoints_per_route
    if cfg.turn_rate_deg_s <= 0:
        lo = hi = 2
    while len(routes) < cfg.n_routes:
        m = int(rng.integers(lo, hi + 1))
        route = [int(rng.integers(len(sites)))]
        attempts = 0
        while len(route) < m:
            nxt = int(rng.integers(len(sites)))
            if nxt in route:
                continue
            if len(route) >= 2:
                d0 = sites[route[-1]] - sites[route[-2]]
                d1 = sites[nxt] - sites[route[-1]]
                turn = abs(math.atan2(d0[0] * d1[1] - d0[1] * d1[0], d0 @ d1))
                # fly-by turns between 20 and 120 degrees
                if not math.radians(20) <= turn <= math.radians(120):
                    attempts += 1
                    if attempts > 200:
                        break
                    continue
            route.append(nxt)
        if len(route) == m:
            routes.append(route)
    return routes


@dataclass
class _Segment:
    kind: str                   # "line" | "arc"
    length: float
    start: np.ndarray
    heading: np.ndarray = field(default=None)   # line direction
    center: np.ndarray = field(default=None)
    radius: float = 0.0
    phase0: float = 0.0
    sign: float = 1.0           # +1 counter-clockwise

    def at(self, s: np.ndarray, speed: float) -> tuple[np.ndarray, np.ndarray]:
        if self.kind == "line":
            return self.start + s[:, None] * self.heading, np.broadcast_to(speed * self.heading, (len(s), 2))
        ang = self.phase0 + self.sign * s / self.radius
        pos = self.center + self.radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
        vel = speed * self.sign * np.stack([-np.sin(ang), np.cos(ang)], axis=1)
        return pos, vel


def _arc(center, radius, start, sign, sweep) -> _Segment:
    phase0 = math.atan2(start[1] - center[1], start[0] - center[0])
    return _Segment("arc", radius * sweep, start, center=center, radius=radius, phase0=phase0, sign=sign)


def _path(waypoints: np.ndarray, radius: float, hold_at: int | None):
    """Line/arc segments through the waypoints, plus maneuver points as (east, north, arc length)."""
    segs: list[_Segment] = []
    maneuvers = []
    cur = waypoints[0]
    travelled = 0.0
    for k in range(1, len(waypoints) - 1):
        d0 = waypoints[k] - waypoints[k - 1]
        d1 = waypoints[k + 1] - waypoints[k]
        d0 /= np.linalg.norm(d0)
        d1 /= np.linalg.norm(d1)
        cross = d0[0] * d1[1] - d0[1] * d1[0]
        theta = math.atan2(cross, d0 @ d1)
        sign = 1.0 if theta >= 0 else -1.0
        normal = sign * np.array([-d0[1], d0[0]])
        tang = radius * math.tan(abs(theta) / 2)
        entry = waypoints[k] - d0 * tang
        exit_ = waypoints[k] + d1 * tang
        segs.append(_Segment("line", float(np.linalg.norm(entry - cur)), cur, heading=d0))
        travelled += segs[-1].length
        maneuvers.append((*entry, travelled))
        if hold_at == k:
            # full orbit flown before the fly-by turn, entered and left at the same point
            segs.append(_arc(entry + normal * radius, radius, entry, sign, 2 * math.pi))
            travelled += segs[-1].length
        segs.append(_arc(entry + normal * radius, radius, entry, sign, abs(theta)))
        travelled += segs[-1].length
        maneuvers.append((*exit_, travelled))
        cur = exit_
    d = waypoints[-1] - cur
    segs.append(_Segment("line", float(np.linalg.norm(d)), cur, heading=d / np.linalg.norm(d)))
    return segs, np.array(maneuvers).reshape(-1, 3)


def _sample_path(segs: list[_Segment], speed: float, dt: float):
    total = sum(s.length for s in segs)
    t = np.arange(0.0, total / speed, dt)
    s_all = speed * t
    pos = np.empty((len(t), 2))
    vel = np.empty((len(t), 2))
    bounds = np.concatenate([[0.0], np.cumsum([s.length for s in segs])])
    seg_of = np.clip(np.searchsorted(bounds, s_all, side="right") - 1, 0, len(segs) - 1)
    for j, seg in enumerate(segs):
        m = seg_of == j
        if m.any():
            pos[m], vel[m] = seg.at(s_all[m] - bounds[j], speed)
    return t, pos, vel, s_all, total


def _flight(fid: str, route: list[int], sites: np.ndarray, cfg: SynthConfig, rng: np.random.Generator,
            route_id: int) -> SynthFlight:
    wps = sites[route] + rng.normal(0.0, cfg.waypoint_jitter_m, size=(len(route), 2))
    speed = float(rng.uniform(*cfg.speed_mps))
    if cfg.turn_rate_deg_s > 0:
        omega = math.radians(cfg.turn_rate_deg_s) * float(rng.uniform(0.9, 1.1))
        radius = speed / omega
    else:
        radius = 1.0
    hold_at = None
    if len(route) > 2 and rng.random() < cfg.holding_prob:
        hold_at = int(rng.integers(1, len(route) - 1))
    segs, man = _path(wps, radius, hold_at)
    t, pos2d, vel2d, s_all, total = _sample_path(segs, speed, cfg.dt_s)
    alt0, alt1 = rng.uniform(*cfg.alt_range_m, size=2)
    climb = (alt1 - alt0) / total
    alt = alt0 + climb * s_all
    enu = np.column_stack([pos2d, alt])
    vel = np.column_stack([vel2d, np.full(len(t), climb * speed)])
    noisy = enu + rng.normal(0.0, cfg.position_noise_m, size=enu.shape)
    lon, lat, h = enu_plane_to_lla(noisy, cfg)
    v = vel + rng.normal(0.0, cfg.velocity_noise_mps, size=vel.shape) if cfg.with_velocity else None
    maneuvers = np.column_stack([man[:, :2], alt0 + climb * man[:, 2]])
    t0 = float(rng.uniform(0, 3600))
    return SynthFlight(Trajectory(fid, t0 + t, lon, lat, h, v), route_id, maneuvers)


def generate(cfg: SynthConfig = SynthConfig()) -> SynthData:
    """Deterministic in ``cfg`` (including the seed)."""
    sites = _sites(cfg, stream(cfg.seed, "synth.routes"))
    routes = _routes(cfg, sites, stream(cfg.seed, "synth.routes.choice"))
    rng = stream(cfg.seed, "synth.flights")
    flights = []
    for i in range(cfg.n_reference_flights + cfg.n_eval_flights):
        tag = "R" if i < cfg.n_reference_flights else "E"
        r = int(rng.integers(len(routes)))
        flights.append(_flight(f"{tag}{i:05d}", routes[r], sites, cfg, rng, r))
    return SynthData(cfg, flights[:cfg.n_reference_flights], flights[cfg.n_reference_flights:], sites, routes)


def scored_points(n: int, seed: int = 0, n_clusters: int = 200, spread_m: float = 300.0,
                  background_frac: float = 0.1, region_km: float = 200.0,
                  score_range: tuple[float, float] = (0.75, 1.0), cfg: SynthConfig = SynthConfig()) -> ScoredPointSet:
    """Clustered ECEF points with uniform scores, for index and latency work.

    Clusters stand in for recurring maneuver sites; a fraction of points is
    spread uniformly over the region as background.
    """
    rng = stream(seed, "synth.points")
    half = region_km * 500.0
    centers = np.column_stack([rng.uniform(-half, half, size=(n_clusters, 2)),
                               rng.uniform(500.0, 8000.0, size=n_clusters)])
    n_bg = int(round(n * background_frac))
    which = rng.integers(n_clusters, size=n - n_bg)
    clustered = centers[which] + rng.normal(0.0, 1.0, size=(n - n_bg, 3)) * [spread_m, spread_m, spread_m / 3]
    bg = np.column_stack([rng.uniform(-half, half, size=(n_bg, 2)), rng.uniform(500.0, 8000.0, size=n_bg)])
    enu = np.concatenate([clustered, bg])
    scores = rng.uniform(*score_range, size=n)
    return ScoredPointSet(enu_plane_to_ecef(enu, cfg), scores)


@dataclass
class TwoRegime:
    """Straight flights over a dense low-score region and sparse high-score clusters.

    ``truth_ecef`` holds the flight samples within ``truth_radius_m`` of a
    cluster centre: the samples a good detector should flag.
    """
    points: ScoredPointSet
    trajectories: list[Trajectory]
    cluster_centers_ecef: np.ndarray
    truth_ecef: np.ndarray
    truth_masks: list[np.ndarray]


def two_regime(seed: int = 0, n_flights: int = 6, length_km: float = 40.0, spacing_m: float = 100.0,
               n_background: int = 20000, background_score: float = 0.05, clusters_per_flight: int = 24,
               cluster_size: int = 8, cluster_spread_m: float = 80.0, truth_radius_m: float = 300.0,
               cfg: SynthConfig = SynthConfig()) -> TwoRegime:
    """Dense background covers the western half of every flight; clusters sit anywhere on the paths."""
    rng = stream(seed, "synth.two_regime")
    half = length_km * 500.0
    ys = (np.arange(n_flights) - (n_flights - 1) / 2) * 3000.0
    alt = 3000.0
    band = (ys.min() - 2000.0, ys.max() + 2000.0)
    bg = np.column_stack([rng.uniform(-half, 0.0, n_background), rng.uniform(*band, n_background),
                          alt + rng.uniform(-200.0, 200.0, n_background)])
    centers = []
    for y in ys:
        xs = np.sort(rng.uniform(-half + 1000.0, half - 1000.0, clusters_per_flight))
        centers += [(x, y, alt) for x in xs]
    centers = np.array(centers)
    cl = (np.repeat(centers, cluster_size, axis=0)
          + rng.normal(0.0, cluster_spread_m, (len(centers) * cluster_size, 3)) * [1.0, 1.0, 0.25])
    enu = np.concatenate([bg, cl])
    scores = np.concatenate([np.full(len(bg), background_score), rng.uniform(0.8, 1.0, len(cl))])
    pts = ScoredPointSet(enu_plane_to_ecef(enu, cfg), scores)

    xs = np.arange(-half, half + spacing_m / 2, spacing_m)
    trajs, truth, masks = [], [], []
    for i, y in enumerate(ys):
        track = np.column_stack([xs, np.full_like(xs, y), np.full_like(xs, alt)])
        lon, lat, h = enu_plane_to_lla(track, cfg)
        trajs.append(Trajectory(f"T{i:03d}", xs / 100.0 + half / 100.0, lon, lat, h))
        d = np.min(np.linalg.norm(track[:, None, :] - centers[None, :, :], axis=2), axis=1)
        masks.append(d <= truth_radius_m)
        truth.append(enu_plane_to_ecef(track[masks[-1]], cfg))
    return TwoRegime(pts, trajs, enu_plane_to_ecef(centers, cfg), np.concatenate(truth), masks)
