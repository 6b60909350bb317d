"""End-to-end synthetic benchmark: baseline labels, field extraction, matching.

Reference flights are run through the kinematic baseline; their POIs (with
scores) become the scored point set behind the field. Evaluation flights are
labelled twice, once by the baseline (set A) and once by thresholding the
field along each flight (set B), and the two sets are matched spatially.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from . import ann, extract, field, io
from .evaluation import MatchReport, spatial_match
from .synth import SynthConfig, SynthData, generate
from .trajectory import POI_THRESHOLD, PoiRecord, run_baseline

BANDWIDTHS = ("adaptive", 250.0, 500.0, 750.0)
NPROBES = (4, 8, 16, 64, 256)
KS = (50, 100, 150)
KNN_KS = (25, 50, 75, 500)

# many lightly shared sites, so no turn collects more reference POIs than the smallest k
BENCHMARK_SYNTH = SynthConfig(n_reference_flights=800, n_eval_flights=250, n_sites=60, n_routes=100,
                              region_km=56.0, min_site_spacing_km=5.0)


@dataclass(frozen=True)
class BenchmarkConfig:
    synth: SynthConfig = dc_field(default_factory=lambda: BENCHMARK_SYNTH)
    match_threshold_m: float = 200.0
    baseline_threshold: float = POI_THRESHOLD
    # a number in (0, 100), or "auto" to flag as many samples as the baseline does
    percentile: float | str = "auto"
    nlist: int | None = 256
    workers: int | None = None


@dataclass
class Benchmark:
    config: BenchmarkConfig
    data: SynthData
    reference_pois: list[PoiRecord]
    points: field.ScoredPointSet
    index: ann.IvfIndex
    eval_pois: list[PoiRecord]
    eval_ecef: np.ndarray

    @property
    def n_eval_samples(self) -> int:
        return sum(len(tr) for tr in self.data.evaluation_trajectories)

    @property
    def percentile(self) -> float:
        return resolve_percentile(self.config.percentile, len(self.eval_pois), self.n_eval_samples)

    @property
    def knn_percentile(self) -> float:
        """KNN flags low distances; in auto mode mirror the percentile so both masks flag the same share."""
        if self.config.percentile == "auto":
            return 100.0 - self.percentile
        return float(self.config.percentile)


def resolve_percentile(percentile, n_flagged: int, n_samples: int) -> float:
    """``"auto"`` becomes the percentile whose upper tail matches the baseline's prevalence."""
    if percentile != "auto":
        return float(percentile)
    if n_samples == 0:
        raise ValueError("no samples to estimate prevalence from")
    prevalence = min(max(n_flagged / n_samples, 1e-6), 1 - 1e-6)
    return 100.0 * (1.0 - prevalence)


def prepare(cfg: BenchmarkConfig = BenchmarkConfig()) -> Benchmark:
    data = generate(cfg.synth)
    ref, _ = run_baseline(data.reference_trajectories, cfg.baseline_threshold, workers=cfg.workers)
    pts = io.pois_to_pointset(ref)
    nlist = cfg.nlist if cfg.nlist is not None else ann.default_nlist(len(pts))
    idx = pts.build_index(min(nlist, len(pts)), ann.KMeansConfig(seed=cfg.synth.seed))
    ev, _ = run_baseline(data.evaluation_trajectories, cfg.baseline_threshold, workers=cfg.workers)
    return Benchmark(cfg, data, ref, pts, idx, ev, io.pois_to_ecef(ev))


@dataclass(frozen=True)
class RunResult:
    label: str
    report: MatchReport
    ms_per_query: float
    n_flagged: int

    def as_row(self) -> dict:
        row = {"config": self.label}
        row.update(self.report.as_row())
        row.update(ms_per_query=self.ms_per_query, n_flagged=self.n_flagged)
        return row


def run_adf(bench: Benchmark, params: field.AdfParams, label: str = "", exact: bool = False) -> RunResult:
    trajs = bench.data.evaluation_trajectories
    start = time.perf_counter()
    traces = extract.extract_pois(trajs, bench.points, None if exact else bench.index, params,
                                  bench.percentile, bench.config.workers)
    elapsed = time.perf_counter() - start
    flagged = extract.flagged_ecef(traces)
    rep = spatial_match(bench.eval_ecef, flagged, bench.config.match_threshold_m)
    return RunResult(label, rep, 1000.0 * elapsed / bench.n_eval_samples, len(flagged))


def run_knn(bench: Benchmark, k: int, nprobe: int = 16, label: str = "") -> RunResult:
    trajs = bench.data.evaluation_trajectories
    start = time.perf_counter()
    traces = [extract.knn_trace(tr, bench.points.positions, k, bench.index, nprobe, bench.knn_percentile)
              for tr in trajs]
    elapsed = time.perf_counter() - start
    flagged = extract.flagged_ecef(traces)
    rep = spatial_match(bench.eval_ecef, flagged, bench.config.match_threshold_m)
    return RunResult(label or f"knn k={k}", rep, 1000.0 * elapsed / bench.n_eval_samples, len(flagged))


def ablate(bench: Benchmark, base: field.AdfParams = field.AdfParams(), sweep: str = "all") -> list[RunResult]:
    """Bandwidth, nprobe and k sweeps around ``base``; ``sweep`` picks one or ``"all"``."""
    out = []
    if sweep in ("all", "bandwidth"):
        for bw in BANDWIDTHS:
            p = replace(base, fixed_sigma_m=None if bw == "adaptive" else float(bw))
            out.append(run_adf(bench, p, f"bandwidth={bw}"))
    if sweep in ("all", "nprobe"):
        for nprobe in NPROBES:
            out.append(run_adf(bench, replace(base, nprobe=nprobe), f"nprobe={nprobe}"))
    if sweep in ("all", "k"):
        for k in KS:
            out.append(run_adf(bench, replace(base, k=k), f"k={k}"))
    if sweep in ("all", "knn"):
        for k in KNN_KS:
            if k <= len(bench.points):
                out.append(run_knn(bench, k, base.nprobe))
    return out
