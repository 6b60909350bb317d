"""Adaptive density fields over scored ECEF points.

Modules: ``geo`` (WGS-84 / ENU), ``ann`` (IVF index), ``field`` (kernel
field and k-NN baseline), ``trajectory`` (kinematic POI baseline),
``extract`` (per-flight percentile extraction), ``evaluation`` (matching and
latency), plus ``synth``, ``io``, ``experiment`` and ``cli``.
"""
from .ann import IvfIndex, KMeansConfig, SearchParams, brute_force_search, search, train
from .evaluation import MatchReport, spatial_match, threshold_sweep
from .extract import FieldTrace, extract_pois, relative_threshold
from .field import AdfParams, ScoredPointSet, evaluate, evaluate_exact
from .trajectory import PoiRecord, Trajectory, run_baseline, score_flight

__version__ = "0.1.0"

__all__ = [
    "AdfParams", "FieldTrace", "IvfIndex", "KMeansConfig", "MatchReport", "PoiRecord", "ScoredPointSet",
    "SearchParams", "Trajectory", "brute_force_search", "evaluate", "evaluate_exact", "extract_pois",
    "relative_threshold", "run_baseline", "score_flight", "search", "spatial_match", "threshold_sweep", "train",
]
