#!/usr/bin/env python3
"""Precision, recall and F1 from published match counts at 150, 200 and 300 m."""
from adfield import io
from adfield.evaluation import report_from_counts

# (threshold m, matched, unmatched baseline, unmatched field)
COUNTS = [(150, 16606, 10758, 4163), (200, 17225, 10492, 3544), (300, 17953, 10056, 2816)]


def main():
    rows = []
    for thr, m, ua, ub in COUNTS:
        r = report_from_counts(m, ua, ub, thr)
        rows.append({"threshold_m": thr, "matched": m, "unique_baseline": ua, "unique_field": ub,
                     "precision_pct": round(100 * r.precision, 2), "recall_pct": round(100 * r.recall, 2),
                     "f1_pct": round(100 * r.f1, 2)})
    print(io.write_tsv(rows), end="")


if __name__ == "__main__":
    main()
