import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from adfield import geo
from adfield.geo import WGS84, GeodeticCoord

A = 6378137.0
F = 1 / 298.257223563

lats = st.floats(-math.pi / 2, math.pi / 2)
lons = st.floats(-math.pi, math.pi)
heights = st.floats(-500.0, 15000.0)


def test_wgs84_constants():
    assert WGS84.semi_major_axis_m == A
    assert WGS84.ecc_sq == pytest.approx(6.69437999014e-3, rel=1e-11)
    assert WGS84.semi_minor_axis_m == pytest.approx(6356752.314245, abs=1e-6)


def test_ellipsoid_rejects_bad_values():
    with pytest.raises(ValueError):
        geo.Ellipsoid(-1.0, F)
    with pytest.raises(ValueError):
        geo.Ellipsoid(A, 1.5)


def test_prime_vertical_radius_equator_is_a():
    assert geo.prime_vertical_radius(0.0) == A


def test_prime_vertical_radius_pole_matches_high_precision():
    mpmath.mp.dps = 40
    a, f = mpmath.mpf(A), 1 / mpmath.mpf("298.257223563")
    e2 = f * (2 - f)
    oracle = a / mpmath.sqrt(1 - e2)
    assert float(geo.prime_vertical_radius(math.pi / 2)) == pytest.approx(float(oracle), abs=1e-6)
    assert float(oracle) == pytest.approx(6399593.626, abs=1e-3)


@given(lats)
def test_prime_vertical_radius_even(phi):
    assert geo.prime_vertical_radius(phi) == pytest.approx(geo.prime_vertical_radius(-phi), rel=1e-15)


def test_ecef_equator_prime_meridian():
    np.testing.assert_allclose(geo.geodetic_to_ecef(GeodeticCoord(0.0, 0.0, 0.0)), (A, 0, 0), atol=1e-6)


def test_ecef_equator_90_east():
    np.testing.assert_allclose(geo.geodetic_to_ecef(GeodeticCoord(0.0, math.pi / 2, 100.0)),
                               (0, A + 100, 0), atol=1e-6)


def test_ecef_pole_is_semi_minor_axis():
    x, y, z = geo.geodetic_to_ecef(GeodeticCoord(math.pi / 2, 0.0, 0.0))
    assert abs(x) < 1e-6 and abs(y) < 1e-6
    assert z == pytest.approx(A * (1 - F), abs=1e-6)
    assert z == pytest.approx(6356752.3142, abs=5e-5)


def test_from_degrees_wraps_longitude():
    g = GeodeticCoord.from_degrees(10.0, 190.0)
    assert g.lon_deg == pytest.approx(-170.0)
    assert GeodeticCoord.from_degrees(0.0, -180.0).lon_deg == pytest.approx(180.0)


@given(lats, lons, heights)
def test_ecef_matches_closed_form(lat, lon, h):
    # independent route: parametric ellipse point plus h along the normal
    e2 = F * (2 - F)
    n = A / math.sqrt(1 - e2 * math.sin(lat) ** 2)
    expect = ((n + h) * math.cos(lat) * math.cos(lon), (n + h) * math.cos(lat) * math.sin(lon),
              (n * (1 - e2) + h) * math.sin(lat))
    np.testing.assert_allclose(geo.geodetic_to_ecef_array(lat, lon, h), expect, atol=1e-6)


@given(lats, lons)
def test_ecef_point_lies_on_ellipsoid(lat, lon):
    x, y, z = geo.geodetic_to_ecef_array(lat, lon, 0.0)
    b = A * (1 - F)
    assert (x * x + y * y) / A**2 + z * z / b**2 == pytest.approx(1.0, abs=1e-12)


def test_enu_of_origin_is_zero():
    o = GeodeticCoord.from_degrees(30.5, 104.0, 500.0)
    p = geo.geodetic_to_ecef(o)
    np.testing.assert_allclose(geo.ecef_to_enu(p, o), (0, 0, 0), atol=1e-9)


def test_enu_radial_offset_is_up():
    o = GeodeticCoord(0.0, 0.0, 0.0)
    np.testing.assert_allclose(geo.ecef_to_enu(geo.EcefCoord(A + 1000, 0, 0), o), (0, 0, 1000), atol=1e-6)


def test_enu_small_east_offset():
    o = GeodeticCoord(0.0, 0.0, 0.0)
    e, n, u = geo.ecef_to_enu(geo.EcefCoord(A, 10.0, 0.0), o)
    assert e == pytest.approx(10.0, abs=1e-9)
    assert abs(n) < 1e-9 and abs(u) < 1e-4


@given(lats, lons)
def test_rotation_is_orthonormal_right_handed(lat, lon):
    r = geo.enu_rotation(lat, lon)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-12)
    # up is the ellipsoid normal
    np.testing.assert_allclose(r[2], [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon),
                                      math.sin(lat)], atol=1e-12)


@given(lats, lons, st.lists(st.floats(-1e5, 1e5), min_size=3, max_size=3))
def test_enu_preserves_norms(lat, lon, d):
    o = GeodeticCoord(lat, lon, 0.0)
    base = geo.geodetic_to_ecef_array(lat, lon, 0.0)
    d = np.array(d)
    enu = geo.ecef_to_enu_array(base + d, o)
    nd = np.linalg.norm(d)
    assert np.linalg.norm(enu) == pytest.approx(nd, rel=1e-9, abs=1e-6)


@given(lats, lons, st.lists(st.floats(-1e4, 1e4), min_size=3, max_size=3))
def test_enu_round_trip(lat, lon, e):
    o = GeodeticCoord(lat, lon, 100.0)
    back = geo.ecef_to_enu_array(geo.enu_to_ecef_array(e, o), o)
    np.testing.assert_allclose(back, e, atol=1e-6)


def test_array_and_scalar_paths_agree(rng):
    lat = rng.uniform(-1.5, 1.5, 20)
    lon = rng.uniform(-3, 3, 20)
    h = rng.uniform(0, 1e4, 20)
    arr = geo.geodetic_to_ecef_array(lat, lon, h)
    one = np.array([geo.geodetic_to_ecef(GeodeticCoord(*x)) for x in zip(lat, lon, h)])
    np.testing.assert_array_equal(arr, one)
    np.testing.assert_array_equal(geo.lla_deg_to_ecef(np.degrees(lon), np.degrees(lat), h),
                                  geo.geodetic_to_ecef_array(np.radians(np.degrees(lat)),
                                                             np.radians(np.degrees(lon)), h))
