"""WGS84 geodetic -> ECEF -> local ENU transforms.

All functions broadcast over numpy arrays. Angles are radians unless a
function name says ``deg``.

The ENU rotation is the usual geodesy one (rows are the east, north and up
unit vectors expressed in ECEF). Some printed versions of this transform
place the sin/cos terms differently, which does not give an orthonormal
basis; we do not follow those.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class Ellipsoid:
    semi_major_axis_m: float
    flattening: float

    def __post_init__(self):
        if not self.semi_major_axis_m > 0:
            raise ValueError("semi-major axis must be positive")
        if not 0 < self.flattening < 1:
            raise ValueError("flattening must lie in (0, 1)")

    @property
    def ecc_sq(self) -> float:
        f = self.flattening
        return f * (2.0 - f)

    @property
    def semi_minor_axis_m(self) -> float:
        return self.semi_major_axis_m * (1.0 - self.flattening)

    @classmethod
    def wgs84(cls) -> "Ellipsoid":
        return cls(6378137.0, 1.0 / 298.257223563)


WGS84 = Ellipsoid.wgs84()


def _wrap_lon(lon):
    # (-pi, pi]
    wrapped = np.mod(np.asarray(lon, dtype=float) + math.pi, 2 * math.pi) - math.pi
    return np.where(wrapped == -math.pi, math.pi, wrapped)


class GeodeticCoord(NamedTuple):
    lat_rad: float
    lon_rad: float
    height_m: float

    @classmethod
    def from_degrees(cls, lat_deg: float, lon_deg: float, height_m: float = 0.0) -> "GeodeticCoord":
        lat = math.radians(lat_deg)
        if abs(lat) > math.pi / 2 + 1e-15:
            raise ValueError(f"latitude out of range: {lat_deg}")
        return cls(lat, float(_wrap_lon(math.radians(lon_deg))), float(height_m))

    @property
    def lat_deg(self) -> float:
        return math.degrees(self.lat_rad)

    @property
    def lon_deg(self) -> float:
        return math.degrees(self.lon_rad)


class EcefCoord(NamedTuple):
    x_m: float
    y_m: float
    z_m: float


class EnuCoord(NamedTuple):
    east_m: float
    north_m: float
    up_m: float


def prime_vertical_radius(phi, ell: Ellipsoid = WGS84):
    """Radius of curvature in the prime vertical, N(phi) = a / sqrt(1 - e^2 sin^2 phi)."""
    s = np.sin(phi)
    return ell.semi_major_axis_m / np.sqrt(1.0 - ell.ecc_sq * s * s)


def geodetic_to_ecef_array(lat, lon, h, ell: Ellipsoid = WGS84) -> np.ndarray:
    """Vectorized geodetic -> ECEF. Returns an array of shape ``(..., 3)``."""
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    h = np.asarray(h, dtype=float)
    n = prime_vertical_radius(lat, ell)
    cos_lat = np.cos(lat)
    x = (n + h) * cos_lat * np.cos(lon)
    y = (n + h) * cos_lat * np.sin(lon)
    z = (n * (1.0 - ell.ecc_sq) + h) * np.sin(lat)
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def geodetic_to_ecef(g: GeodeticCoord, ell: Ellipsoid = WGS84) -> EcefCoord:
    x, y, z = geodetic_to_ecef_array(g.lat_rad, g.lon_rad, g.height_m, ell)
    return EcefCoord(float(x), float(y), float(z))


def lla_deg_to_ecef(lon_deg, lat_deg, alt_m, ell: Ellipsoid = WGS84) -> np.ndarray:
    """Degrees in, ECEF metres out; argument order follows the CSV columns."""
    return geodetic_to_ecef_array(np.radians(lat_deg), np.radians(lon_deg), alt_m, ell)


def enu_rotation(lat, lon) -> np.ndarray:
    """3x3 matrix whose rows are the local east, north, up axes in ECEF."""
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ])


def ecef_to_enu_array(p, origin: GeodeticCoord, ell: Ellipsoid = WGS84) -> np.ndarray:
    """Rotate ECEF points ``(..., 3)`` into the ENU frame anchored at ``origin``."""
    p = np.asarray(p, dtype=float)
    o = geodetic_to_ecef_array(origin.lat_rad, origin.lon_rad, origin.height_m, ell)
    rot = enu_rotation(origin.lat_rad, origin.lon_rad)
    return (p - o) @ rot.T


def ecef_to_enu(p: EcefCoord, origin: GeodeticCoord, ell: Ellipsoid = WGS84) -> EnuCoord:
    e, n, u = ecef_to_enu_array(np.asarray(p, dtype=float), origin, ell)
    return EnuCoord(float(e), float(n), float(u))


def enu_to_ecef_array(enu, origin: GeodeticCoord, ell: Ellipsoid = WGS84) -> np.ndarray:
    o = geodetic_to_ecef_array(origin.lat_rad, origin.lon_rad, origin.height_m, ell)
    rot = enu_rotation(origin.lat_rad, origin.lon_rad)
    return np.asarray(enu, dtype=float) @ rot + o
