#!/usr/bin/env python3
"""Bandwidth, nprobe, k and KNN sweeps on the synthetic benchmark; writes a TSV."""
import argparse
import sys
import time
from dataclasses import replace

from adfield import experiment as X, io
from adfield.field import AdfParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sweep", default="all", choices=["all", "bandwidth", "nprobe", "k", "knn"])
    ap.add_argument("--n-reference", type=int, default=X.BENCHMARK_SYNTH.n_reference_flights)
    ap.add_argument("--n-eval", type=int, default=X.BENCHMARK_SYNTH.n_eval_flights)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threshold", type=float, default=200.0, help="match radius in metres")
    ap.add_argument("--out", default=None, help="TSV path (default: stdout)")
    args = ap.parse_args()

    synth = replace(X.BENCHMARK_SYNTH, n_reference_flights=args.n_reference, n_eval_flights=args.n_eval,
                    seed=args.seed)
    t0 = time.perf_counter()
    bench = X.prepare(X.BenchmarkConfig(synth=synth, match_threshold_m=args.threshold))
    print(f"prepared {len(bench.points)} reference POIs, {len(bench.eval_pois)} evaluation POIs over "
          f"{bench.n_eval_samples} samples (percentile {bench.percentile:.2f}) in {time.perf_counter() - t0:.1f}s",
          file=sys.stderr)
    rows = [r.as_row() for r in X.ablate(bench, AdfParams(), args.sweep)]
    text = io.write_tsv(rows, args.out)
    if args.out is None:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
