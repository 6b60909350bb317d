"""Command-line entry point: ``adfield <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal invariant
violation. Outputs are sorted by flight id and sample index, so the bytes
written never depend on worker count.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import ann, evaluation, experiment, extract, field, io, synth
from .errors import AdfError
from .trajectory import POI_THRESHOLD, run_baseline

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("adfield")


class UsageError(Exception):
    """Bad flag combination detected after parsing; message names the flag."""


@dataclass(frozen=True)
class RunConfig:
    sigma0_m: float = 500.0
    k: int = 100
    nprobe: int = 16
    nlist: int | None = None        # None: default rule, shrunk to fit the data
    fixed_sigma_m: float | None = None
    match_threshold_m: float = 200.0
    extract_percentile: float = 75.0
    baseline_threshold: float = POI_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma0_m", "k", "nprobe", "match_threshold_m"):
            if not getattr(self, name) > 0:
                raise UsageError(f"--{_FLAG[name]} must be positive")
        if self.nlist is not None and self.nlist < 1:
            raise UsageError("--nlist must be positive")
        if self.fixed_sigma_m is not None and not self.fixed_sigma_m > 0:
            raise UsageError("--fixed-bandwidth must be positive")
        if not 0 < self.extract_percentile < 100:
            raise UsageError("--percentile must lie in (0, 100)")
        if not 0 <= self.baseline_threshold <= 1:
            raise UsageError("--baseline-threshold must lie in [0, 1]")

    @property
    def adf_params(self) -> field.AdfParams:
        return field.AdfParams(self.sigma0_m, self.k, self.nprobe, fixed_sigma_m=self.fixed_sigma_m)


_FLAG = {"sigma0_m": "sigma0", "k": "k", "nprobe": "nprobe", "match_threshold_m": "threshold"}


def _run_config(args) -> RunConfig:
    thr = getattr(args, "threshold", None)
    return RunConfig(
        sigma0_m=getattr(args, "sigma0", 500.0),
        k=getattr(args, "k", 100),
        nprobe=getattr(args, "nprobe", 16),
        nlist=getattr(args, "nlist", None),
        fixed_sigma_m=getattr(args, "fixed_bandwidth", None),
        match_threshold_m=thr[0] if thr else 200.0,
        extract_percentile=getattr(args, "percentile", 75.0),
        baseline_threshold=getattr(args, "baseline_threshold", POI_THRESHOLD),
        seed=getattr(args, "seed", 0),
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_points(path) -> field.ScoredPointSet:
    recs = io.read_pois(path)
    if not recs:
        raise io.EmptyInputError(f"{path}: no POIs")
    return io.pois_to_pointset(recs)


def _index_for(pts: field.ScoredPointSet, cfg: RunConfig, snapshot: str | None) -> ann.IvfIndex:
    if snapshot:
        idx = ann.load(snapshot)
        if idx.n_points != len(pts) or not np.array_equal(idx.points, pts.positions):
            raise io.ParseError(f"index {snapshot} was not built from these points")
        return idx
    nlist = min(cfg.nlist or ann.default_nlist(len(pts)), len(pts))
    return pts.build_index(nlist, ann.KMeansConfig(seed=cfg.seed))


def _flagged_points(path) -> np.ndarray:
    """ECEF of the POIs in a file: a POI CSV as is, or the flagged rows of a trace CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh), None)
    if header == io.TRACE_COLUMNS:
        return extract.flagged_ecef(io.read_traces(path))
    return io.pois_to_ecef(io.read_pois(path))


# --- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    presets = {"default": synth.SynthConfig, "turn-heavy": synth.turn_heavy, "straight": synth.straight_only}
    cfg = presets[args.preset](seed=args.seed, n_reference_flights=args.n_reference, n_eval_flights=args.n_eval)
    data = synth.generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_trajectories(data.reference_trajectories, out / "reference.jsonl")
    io.write_trajectories(data.evaluation_trajectories, out / "evaluation.jsonl")
    rows = []
    for fl in sorted(data.evaluation, key=lambda f: f.trajectory.flight_id):
        lon, lat, alt = synth.enu_plane_to_lla(fl.maneuvers_enu.reshape(-1, 3), cfg)
        rows += [{"flight_id": fl.trajectory.flight_id, "lon_deg": a, "lat_deg": b, "alt_m": c}
                 for a, b, c in zip(lon, lat, alt)]
    (out / "maneuvers.tsv").write_text(io.write_tsv(rows) if rows else "", encoding="utf-8")
    print(f"wrote {len(data.reference)} reference and {len(data.evaluation)} evaluation flights to {out}")
    return EXIT_OK


def cmd_baseline_pois(args) -> int:
    cfg = _run_config(args)
    ing = io.read_trajectories(args.trajectories)
    pois, skipped = run_baseline(ing.trajectories, cfg.baseline_threshold, workers=args.workers)
    io.write_pois(pois, args.out)
    print(f"{len(pois)} POIs from {len(ing.trajectories) - len(skipped)} flights "
          f"({len(ing.skipped) + len(skipped)} skipped)")
    return EXIT_OK


def cmd_build_index(args) -> int:
    cfg = _run_config(args)
    pts = _load_points(args.points)
    idx = _index_for(pts, cfg, None)
    idx.check_invariants()
    ann.save(idx, args.out)
    print(f"indexed {idx.n_points} points in {idx.nlist} lists -> {args.out}")
    return EXIT_OK


def cmd_eval_field(args) -> int:
    cfg = _run_config(args)
    pts = _load_points(args.points)
    idx = None if args.exact else _index_for(pts, cfg, args.index)
    ing = io.read_trajectories(args.trajectories)
    traces = [extract.evaluate_trace(tr, pts, idx, cfg.adf_params) for tr in ing.trajectories]
    io.write_traces(traces, args.out)
    return EXIT_OK


def cmd_extract_pois(args) -> int:
    cfg = _run_config(args)
    pts = _load_points(args.points)
    idx = None if args.exact else _index_for(pts, cfg, args.index)
    ing = io.read_trajectories(args.trajectories)
    traces = extract.extract_pois(ing.trajectories, pts, idx, cfg.adf_params, cfg.extract_percentile,
                                  args.workers)
    io.write_traces(traces, args.out)
    n = sum(int(tr.poi_mask.sum()) for tr in traces)
    print(f"{n} of {sum(len(tr) for tr in traces)} samples flagged")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    thresholds = sorted(args.threshold or [200.0])
    if any(t <= 0 for t in thresholds):
        raise UsageError("--threshold must be positive")
    reps = evaluation.threshold_sweep(_flagged_points(args.baseline), _flagged_points(args.detections),
                                      thresholds)
    _emit(io.write_tsv([r.as_row() for r in reps]), args.out)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _run_config(args)
    scfg = replace(experiment.BENCHMARK_SYNTH, seed=cfg.seed)
    if args.n_reference is not None:
        scfg = replace(scfg, n_reference_flights=args.n_reference)
    if args.n_eval is not None:
        scfg = replace(scfg, n_eval_flights=args.n_eval)
    pct = "auto" if args.percentile_mode == "auto" else cfg.extract_percentile
    bench = experiment.prepare(experiment.BenchmarkConfig(
        synth=scfg, match_threshold_m=cfg.match_threshold_m, baseline_threshold=cfg.baseline_threshold,
        percentile=pct, nlist=cfg.nlist or 256))
    rows = [r.as_row() for r in experiment.ablate(bench, cfg.adf_params, args.sweep)]
    _emit(io.write_tsv(rows), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _run_config(args)
    if args.points:
        pts = _load_points(args.points)
    else:
        pts = synth.scored_points(args.synthetic, seed=cfg.seed)
    modes = ["brute", "ivf"] if args.mode == "both" else [args.mode]
    idx = _index_for(pts, cfg, args.index) if "ivf" in modes else None
    queries = evaluation.bench_queries(pts, args.n_queries, cfg.seed)
    reps = [evaluation.latency_bench(pts, cfg.adf_params, m, args.n_queries, cfg.seed, idx, queries,
                                     args.repeats) for m in modes]
    rows = [vars(r) for r in reps]
    text = io.write_tsv(rows)
    if len(reps) == 2:
        text += f"speedup\t{reps[0].ms_per_query / reps[1].ms_per_query:.2f}\n"
    _emit(text, args.out)
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _field_flags(p: argparse.ArgumentParser, index: bool = True) -> None:
    p.add_argument("--sigma0", type=float, default=500.0, help="base kernel width in metres")
    p.add_argument("--k", type=_positive_int, default=100, help="neighbours per query")
    p.add_argument("--nprobe", type=_positive_int, default=16, help="inverted lists scanned per query")
    p.add_argument("--nlist", type=_positive_int, default=None, help="inverted lists (default: sqrt rule)")
    p.add_argument("--fixed-bandwidth", type=float, default=None, metavar="M",
                   help="use one kernel width for every point instead of the adaptive rule")
    p.add_argument("--seed", type=int, default=0)
    if index:
        p.add_argument("--index", help="index snapshot built from the same points file")
        p.add_argument("--exact", action="store_true", help="brute-force neighbours, no index")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adfield", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write seeded synthetic flights")
    p.add_argument("--preset", choices=["default", "turn-heavy", "straight"], default="default")
    p.add_argument("--n-reference", type=int, default=300)
    p.add_argument("--n-eval", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("baseline-pois", help="label POIs with the kinematic baseline")
    p.add_argument("trajectories")
    p.add_argument("--baseline-threshold", type=float, default=POI_THRESHOLD)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline_pois)

    p = sub.add_parser("build-index", help="train and save an IVF index over a POI file")
    p.add_argument("points")
    _field_flags(p, index=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_index)

    p = sub.add_parser("eval-field", help="field values along each trajectory")
    p.add_argument("trajectories")
    p.add_argument("--points", required=True)
    _field_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_field)

    p = sub.add_parser("extract-pois", help="flag samples at or above the per-flight percentile")
    p.add_argument("trajectories")
    p.add_argument("--points", required=True)
    _field_flags(p)
    p.add_argument("--percentile", type=float, default=75.0)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract_pois)

    p = sub.add_parser("evaluate", help="match two POI sets (baseline first)")
    p.add_argument("baseline", help="POI CSV or trace CSV")
    p.add_argument("detections", help="POI CSV or trace CSV")
    p.add_argument("--threshold", type=float, action="append", metavar="M",
                   help="match distance in metres; repeat for a sweep (default 200)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="bandwidth / nprobe / k / KNN sweeps on the synthetic benchmark")
    _field_flags(p, index=False)
    p.add_argument("--sweep", choices=["all", "bandwidth", "nprobe", "k", "knn"], default="all")
    p.add_argument("--threshold", type=float, action="append", metavar="M")
    p.add_argument("--percentile", type=float, default=75.0)
    p.add_argument("--percentile-mode", choices=["auto", "fixed"], default="auto",
                   help="auto matches the baseline's share of flagged samples")
    p.add_argument("--baseline-threshold", type=float, default=POI_THRESHOLD)
    p.add_argument("--n-reference", type=int, default=None)
    p.add_argument("--n-eval", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="per-query latency, indexed vs brute force")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--points", help="POI CSV")
    src.add_argument("--synthetic", type=_positive_int, default=100_000, help="clustered synthetic points")
    _field_flags(p)
    p.add_argument("--mode", choices=["ivf", "brute", "both"], default="both")
    p.add_argument("--n-queries", type=int, default=100)
    p.add_argument("--repeats", type=_positive_int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"adfield {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AssertionError as exc:
        print(f"adfield {args.command}: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (AdfError, OSError, ValueError) as exc:
        print(f"adfield {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
