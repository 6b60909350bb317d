#!/usr/bin/env python3
"""Per-query latency of the indexed field against brute force over clustered points."""
import argparse
import time

from adfield import ann, evaluation as E, synth
from adfield.field import AdfParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 1_000_000])
    ap.add_argument("--n-queries", type=int, default=100)
    ap.add_argument("--nprobe", type=int, default=16)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    p = AdfParams(k=args.k, nprobe=args.nprobe)
    print("n\tnlist\ttrain_s\tivf_ms\tbrute_ms\tspeedup")
    for n in args.sizes:
        pts = synth.scored_points(n, seed=args.seed)
        t0 = time.perf_counter()
        idx = pts.build_index(cfg=ann.KMeansConfig(seed=args.seed))
        train_s = time.perf_counter() - t0
        qs = E.bench_queries(pts, args.n_queries, seed=args.seed)
        ivf = E.latency_bench(pts, p, "ivf", args.n_queries, idx=idx, queries=qs, repeats=3)
        brute = E.latency_bench(pts, p, "brute", args.n_queries, queries=qs)
        print(f"{n}\t{idx.nlist}\t{train_s:.1f}\t{ivf.ms_per_query:.4f}\t{brute.ms_per_query:.3f}\t"
              f"{brute.ms_per_query / ivf.ms_per_query:.1f}", flush=True)


if __name__ == "__main__":
    main()
