"""Acceptance criteria C1-C10.

Each test records one PASS/FAIL line (printed in the terminal summary and to
stdout) before asserting, so a failing criterion still reports its numbers.
"""
import math
import time
from dataclasses import replace

import numpy as np
import pytest

from adfield import ann, evaluation as E, experiment as X, extract, field, geo, synth, trajectory as T
from adfield.field import AdfParams, ScoredPointSet
from adfield.geo import GeodeticCoord
from adfield.synth import SynthConfig, enu_plane_to_lla
from adfield.trajectory import Trajectory

from conftest import ACCEPTANCE


def record(key, ok, detail):
    ACCEPTANCE[key] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} {key} {detail}")
    assert ok, detail


def straight_tracks(n_tracks, n_samples, region_km, seed, cfg=SynthConfig()):
    """Random straight flights across a square region of the synthetic plane."""
    rng = np.random.default_rng(seed)
    half = region_km * 500.0
    out = []
    for i in range(n_tracks):
        a, b = rng.uniform(-half, half, (2, 2))
        alt = rng.uniform(500.0, 8000.0)
        s = np.linspace(0.0, 1.0, n_samples)[:, None]
        enu = np.column_stack([a + s * (b - a), np.full(n_samples, alt)])
        lon, lat, h = enu_plane_to_lla(enu, cfg)
        out.append(Trajectory(f"Q{i:03d}", np.arange(n_samples, dtype=float), lon, lat, h))
    return out


def test_c1_metric_arithmetic():
    rows = [(150, 16606, 10758, 4163), (200, 17225, 10492, 3544), (300, 17953, 10056, 2816)]
    reps = [E.report_from_counts(m, ua, ub, thr) for thr, m, ua, ub in rows]
    got_p = [round(100 * r.precision, 2) for r in reps]
    r150 = reps[0]
    ok = (all(abs(100 * r.precision - p) <= 0.01 for r, p in zip(reps, (79.96, 82.94, 86.44)))
          and abs(100 * r150.recall - 60.69) <= 0.01 and abs(100 * r150.f1 - 69.00) <= 0.01)
    record("C1", ok, f"metric arithmetic: precision {got_p}, recall@150 {100 * r150.recall:.2f}, "
                     f"f1@150 {100 * r150.f1:.2f}")


def test_c2_exhaustive_probe_oracle():
    rng = np.random.default_rng(2)
    pts = rng.uniform(-1e4, 1e4, (10000, 3))
    idx = ann.train(pts, cfg=ann.KMeansConfig(seed=2))
    p = ann.SearchParams(k=100, nprobe=idx.nlist)
    bad = 0
    for q in rng.uniform(-1e4, 1e4, (1000, 3)):
        a = ann.search(idx, q, p)
        b = ann.brute_force_search(pts, q, 100)
        same_set = set(a.indices.tolist()) == set(b.indices.tolist())
        bad += not (same_set and np.array_equal(a.sq_dists, b.sq_dists))
    record("C2", bad == 0, f"nprobe=nlist={idx.nlist} vs brute force: {1000 - bad}/1000 queries identical")


def field_agreement(pts, region_km, seed):
    """Mask agreement and share of samples within 1e-3 relative, IVF (nlist 1024, nprobe 16, k 100) vs brute force."""
    idx = pts.build_index(1024, ann.KMeansConfig(seed=seed))
    trajs = straight_tracks(24, 400, region_km, seed=seed)
    p = AdfParams(k=100, nprobe=16)
    fast = extract.extract_pois(trajs, pts, idx, p)
    slow = extract.extract_pois(trajs, pts, None, p)
    v1 = np.concatenate([t.values for t in fast])
    v0 = np.concatenate([t.values for t in slow])
    m1 = np.concatenate([t.poi_mask for t in fast])
    m0 = np.concatenate([t.poi_mask for t in slow])
    rel = np.abs(v1 - v0) / np.maximum(np.abs(v0), 1e-300)
    return float(np.mean(m1 == m0)), float(np.mean((rel <= 1e-3) | (v0 == v1))), len(v0)


@pytest.mark.slow
def test_c3_indexed_equals_brute_force_field():
    t0 = time.perf_counter()
    # judged on the default clustered generator, flights crossing its whole region
    mask_agree, close, n = field_agreement(synth.scored_points(100_000, seed=3), 200.0, seed=3)
    secs = time.perf_counter() - t0
    # reported only: flights kept inside a denser 60 km patch, where truncation error is larger
    dense_mask, dense_close, _ = field_agreement(
        synth.scored_points(100_000, seed=3, region_km=60.0, n_clusters=150), 60.0, seed=3)
    record("C3", mask_agree >= 0.999 and close >= 0.999 and secs < 120,
           f"100k clustered points nlist=1024 nprobe=16 k=100 over {n} samples: mask agreement "
           f"{100 * mask_agree:.3f}%, values within 1e-3 rel {100 * close:.3f}% ({secs:.0f}s); "
           f"dense 60 km patch (not judged): masks {100 * dense_mask:.3f}%, values {100 * dense_close:.3f}%")


@pytest.mark.slow
def test_c4_speedup_at_one_million():
    pts = synth.scored_points(1_000_000, seed=4)
    idx = pts.build_index(cfg=ann.KMeansConfig(seed=4))
    p = AdfParams()
    qs = E.bench_queries(pts, 100, seed=4)
    ivf = E.latency_bench(pts, p, "ivf", 100, seed=4, idx=idx, queries=qs, repeats=3)
    brute = E.latency_bench(pts, p, "brute", 100, seed=4, queries=qs)
    ratio = brute.ms_per_query / ivf.ms_per_query
    record("C4", ratio >= 10, f"n=1e6 nlist={idx.nlist}: brute {brute.ms_per_query:.3f} ms/query, "
                              f"ivf {ivf.ms_per_query:.4f} ms/query, speedup {ratio:.1f}x")


@pytest.mark.slow
def test_c5_nprobe_and_k_stability():
    bench = X.prepare(X.BenchmarkConfig())
    base = AdfParams()
    # k=100 is the base config, already covered by the nprobe sweep
    runs = X.ablate(bench, base, "nprobe") + [X.run_adf(bench, replace(base, k=k), f"k={k}")
                                              for k in X.KS if k != base.k]
    f1 = {r.label: 100 * r.report.f1 for r in runs}
    spread = max(f1.values()) - min(f1.values())
    # latency on a fixed query set, best of three passes per nprobe
    ev = np.concatenate([tr.ecef() for tr in bench.data.evaluation_trajectories])
    qs = ev[np.random.default_rng(5).choice(len(ev), 3000, replace=False)]
    lat = [E.latency_bench(bench.points, replace(base, nprobe=n), "ivf", len(qs), idx=bench.index, queries=qs,
                           repeats=3).ms_per_query for n in X.NPROBES]
    monotone = all(b > a for a, b in zip(lat, lat[1:]))
    record("C5", spread < 0.5 and monotone,
           f"F1 spread {spread:.3f} pp over {sorted(f1)} (F1 {min(f1.values()):.2f}-{max(f1.values()):.2f}%); "
           f"ms/query by nprobe {dict(zip(X.NPROBES, np.round(lat, 4).tolist()))}")


def test_c6_geodesy_fixtures():
    a, b = geo.WGS84.semi_major_axis_m, geo.WGS84.semi_minor_axis_m
    errs = [
        np.abs(np.subtract(geo.geodetic_to_ecef(GeodeticCoord(0, 0, 0)), (a, 0, 0))).max(),
        np.abs(np.subtract(geo.geodetic_to_ecef(GeodeticCoord(0, math.pi / 2, 100)), (0, a + 100, 0))).max(),
        np.abs(np.subtract(geo.geodetic_to_ecef(GeodeticCoord(math.pi / 2, 0, 0)), (0, 0, b))).max(),
        abs(geo.prime_vertical_radius(math.pi / 2) - a / math.sqrt(1 - geo.WGS84.ecc_sq)),
    ]
    o = GeodeticCoord.from_degrees(30.578, 103.947, 500.0)
    origin_enu = np.abs(geo.ecef_to_enu(geo.geodetic_to_ecef(o), o)).max()
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        g = GeodeticCoord(rng.uniform(-math.pi / 2, math.pi / 2), rng.uniform(-math.pi, math.pi), 0.0)
        d = rng.normal(0, 1e4, 3)
        e = geo.ecef_to_enu_array(geo.geodetic_to_ecef_array(*g) + d, g)
        worst = max(worst, abs(np.linalg.norm(e) / np.linalg.norm(d) - 1))
    ok = max(errs) <= 1e-6 and origin_enu <= 1e-6 and worst <= 1e-9
    record("C6", ok, f"fixture error {max(errs):.1e} m, ENU(origin) {origin_enu:.1e} m, "
                     f"norm distortion {worst:.1e} rel")


def test_c7_kernel_field_properties():
    rng = np.random.default_rng(7)
    pts = ScoredPointSet(rng.normal(0, 1500, (3000, 3)) + 6.3e6, rng.uniform(0, 2, 3000))
    idx = pts.build_index(50)
    p = AdfParams(nprobe=5)
    qs = rng.normal(0, 3000, (300, 3)) + 6.3e6
    vals = np.array([field.evaluate(q, pts, idx, p) for q in qs])
    nonneg = bool(np.all(vals >= 0))
    peak = all(field.evaluate_exact([1.0, 2.0, 3.0], ScoredPointSet([[1.0, 2.0, 3.0]], [s]), p) == s
               for s in (0.1, 0.75, 1.0, 3.0))
    far = max(field.evaluate_exact([0, 0, 6 * 500 / (s + 1e-6)], ScoredPointSet([[0.0, 0.0, 0.0]], [s]), p) / s
              for s in (0.1, 1.0, 3.0))
    shift = np.array([1234.5, -987.6, 4321.0])
    small = ScoredPointSet(pts.positions[:400], pts.scores[:400])
    moved = ScoredPointSet(pts.positions[:400] + shift, pts.scores[:400])
    trans = max(abs(field.evaluate_exact(q + shift, moved, p) / field.evaluate_exact(q, small, p) - 1)
                for q in qs[:50] if field.evaluate_exact(q, small, p) > 0)
    batch = field.evaluate_many(qs, pts, idx, p, workers=4)
    bitwise = np.array_equal(batch, vals)
    ok = nonneg and peak and far < 2e-8 and trans <= 1e-9 and bitwise
    record("C7", ok, f"F>=0 {nonneg}, peak=s {peak}, 6-sigma/s {far:.2e}, translation {trans:.1e} rel, "
                     f"batch bitwise {bitwise}")


def test_c8_kinematic_properties():
    t = np.arange(100.0)
    straight = T.kinematics_from_positions(t, np.column_stack([60 * t, 5 * t, 0 * t + 3000]))
    kappa0 = float(straight.curvatures.max())
    R = 2500.0
    ang = 60.0 * t / R
    circ = T.kinematics_from_positions(t, np.column_stack([R * np.cos(ang), R * np.sin(ang), 0 * t]))
    circ_err = float(np.abs(circ.curvatures[1:-1] * R - 1).max())
    rng = np.random.default_rng(8)
    w_err = 0.0
    for _ in range(500):
        k = rng.exponential(rng.uniform(1e-5, 1e-1), 80)
        w_err = max(w_err, abs(T.blend_weight(np.percentile(k, 95), T.smoothing_alpha(k)) - 0.2))
    w_unit = T.blend_weight(math.log(5), T.smoothing_alpha(np.full(10, math.log(5))))
    r = rng.normal(size=(60, 3))
    pred = T.PredictionSeries(T.interior_indices(64), np.zeros_like(r), r, np.ones(60), 1.0)
    loss = T.mahalanobis_loss(pred, np.arange(64.0))
    uniform = np.array_equal(loss.losses, loss.distances)
    aff = 0.0
    for s in range(50):
        g = np.random.default_rng(s)
        u, _ = np.linalg.qr(g.normal(size=(3, 3)))
        v, _ = np.linalg.qr(g.normal(size=(3, 3)))
        A = u @ np.diag(g.uniform(0.5, 2.0, 3)) @ v
        cov = np.cov(r, rowvar=False)
        lam2 = T.TIKHONOV * np.trace(A @ cov @ A.T) / np.trace(cov)
        p2 = T.PredictionSeries(pred.indices, pred.predicted, r @ A.T, pred.weights, 1.0)
        d2 = T.mahalanobis_loss(p2, np.arange(64.0), lam2).distances
        aff = max(aff, float(np.max(np.abs(d2 / loss.distances - 1))))
    data = synth.generate(synth.turn_heavy(n_reference_flights=0, n_eval_flights=20))
    in_range, monotone = True, True
    for tr in data.evaluation_trajectories:
        res = T.score_flight(tr)
        in_range &= bool(np.all((res.scores >= 0) & (res.scores <= 1)))
        prev = None
        for thr in (0.5, 0.6, 0.75, 0.9, 1.0):
            got = {q.point_index for q in T.label_pois(res.loss, tr, thr, res.scores)}
            monotone &= prev is None or got <= prev
            prev = got
    ok = (kappa0 == 0.0 and circ_err < 0.01 and w_unit == 0.2 and w_err <= 5.6e-17 and uniform
          and aff < 1e-3 and in_range and monotone)
    record("C8", ok, f"straight kappa {kappa0:.1e}, circle |kappa R - 1| {circ_err:.1e}, w(k95)=0.2 "
                     f"(max dev {w_err:.1e}), uniform dt L=d {uniform}, affine {aff:.1e} rel, "
                     f"scores in [0,1] {in_range}, threshold monotone {monotone}")


def test_c9_extraction_properties():
    rng = np.random.default_rng(9)
    exact_quartile = True
    affine = True
    for _ in range(300):
        n = int(rng.integers(4, 500))
        v = rng.permutation(n).astype(float) + rng.uniform(0, 0.5)
        m = extract.percentile_mask(v)
        top = int(n - 1 - math.floor(0.75 * (n - 1)))
        order = np.argsort(v)
        flagged = set(np.flatnonzero(m).tolist())
        # top ceil-quartile always flagged; the order statistic at the cut only when it hits the percentile
        exact_quartile &= set(order[n - top:].tolist()) <= flagged and len(flagged) <= top + 1
        a, b = rng.uniform(0.01, 100), rng.uniform(-100, 100)
        affine &= np.array_equal(extract.percentile_mask(a * np.arange(n, dtype=float) + b),
                                 extract.percentile_mask(np.arange(n, dtype=float)))
    quarter = int(extract.percentile_mask(np.arange(1.0, 101.0)).sum())
    fx = synth.two_regime(seed=9, n_flights=4, clusters_per_flight=8)
    idx = fx.points.build_index()
    batch = extract.extract_pois(fx.trajectories, fx.points, idx, AdfParams())
    indep = all(np.array_equal(extract.extract_pois([tr], fx.points, idx, AdfParams())[0].poi_mask, b.poi_mask)
                for tr, b in zip(fx.trajectories, batch))
    ok = exact_quartile and affine and indep and quarter == 25
    record("C9", ok, f"top quartile on distinct values {exact_quartile} (1..100 flags {quarter}), "
                     f"affine invariant {affine}, per-trace independent {indep}")


def test_c10_knn_tradeoff():
    fx = synth.two_regime(seed=10)
    idx = fx.points.build_index()
    adf = extract.extract_pois(fx.trajectories, fx.points, idx, AdfParams())
    knn = [extract.knn_trace(tr, fx.points.positions, 25, idx, 16) for tr in fx.trajectories]
    ra = E.spatial_match(fx.truth_ecef, extract.flagged_ecef(adf), 200.0)
    rk = E.spatial_match(fx.truth_ecef, extract.flagged_ecef(knn), 200.0)
    ok = rk.recall > ra.recall and rk.precision < ra.precision
    record("C10", ok, f"two-regime fixture at 200 m: KNN(k=25) P {rk.precision:.3f} R {rk.recall:.3f} vs "
                      f"adaptive field P {ra.precision:.3f} R {ra.recall:.3f}")
