"""File formats: trajectory JSONL, POI / trace CSV, report TSV."""
from __future__ import annotations

import csv
import json
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyInputError, NonMonotoneTimeError, ParseError, TooShortError
from .extract import FieldTrace
from .field import ScoredPointSet
from .geo import lla_deg_to_ecef
from .trajectory import MIN_SAMPLES, PoiRecord, Trajectory

log = logging.getLogger(__name__)

POI_COLUMNS = ["flight_id", "point_index", "lon_deg", "lat_deg", "alt_m", "score"]
TRACE_COLUMNS = ["flight_id", "point_index", "lon_deg", "lat_deg", "alt_m", "adf_value", "is_poi"]
_VEL_KEYS = ("ve", "vn", "vu")


@dataclass
class IngestResult:
    trajectories: list[Trajectory]
    skipped: dict[str, str]


def _num(obj: dict, key: str, line: int) -> float:
    if key not in obj:
        raise ParseError(f"missing key {key!r}", line)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ParseError(f"{key!r} is not a number", line)
    if not math.isfinite(val):
        raise ParseError(f"{key!r} is not finite", line)
    return float(val)


def read_trajectories(path, min_samples: int = MIN_SAMPLES) -> IngestResult:
    """Parse one-sample-per-line JSON into flights.

    Keys: flight_id, t, lon, lat, alt and optionally ve/vn/vu (all three or
    none). Samples are grouped by flight in file order. Flights with
    non-increasing time, too few samples or partial velocity are skipped with a
    warning; syntax errors raise :class:`ParseError` with the line number.
    """
    rows = defaultdict(list)
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", lineno) from None
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", lineno)
            if "flight_id" not in obj:
                raise ParseError("missing key 'flight_id'", lineno)
            fid = str(obj["flight_id"])
            sample = [_num(obj, k, lineno) for k in ("t", "lon", "lat", "alt")]
            present = [k in obj for k in _VEL_KEYS]
            vel = [_num(obj, k, lineno) for k in _VEL_KEYS] if all(present) else (None if not any(present) else "partial")
            rows[fid].append((sample, vel))
    if not rows:
        raise EmptyInputError(f"{path}: no samples")
    trajs, skipped = [], {}
    for fid, samples in rows.items():
        arr = np.array([s for s, _ in samples], dtype=float)
        vels = [v for _, v in samples]
        if any(v == "partial" for v in vels) or (any(v is None for v in vels) and not all(v is None for v in vels)):
            skipped[fid] = "velocity present on some samples only"
        else:
            vel = None if vels[0] is None else np.array(vels, dtype=float)
            tr = Trajectory(fid, arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], vel)
            try:
                tr.validate(min_samples)
                trajs.append(tr)
                continue
            except (TooShortError, NonMonotoneTimeError, ValueError) as exc:
                skipped[fid] = str(exc)
        log.warning("skipping flight %s: %s", fid, skipped[fid])
    return IngestResult(trajs, skipped)


def write_trajectories(trajs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tr in trajs:
            for i in range(len(tr)):
                obj = {"flight_id": tr.flight_id, "t": float(tr.t[i]), "lon": float(tr.lon_deg[i]),
                       "lat": float(tr.lat_deg[i]), "alt": float(tr.alt_m[i])}
                if tr.vel_enu is not None:
                    obj.update(zip(_VEL_KEYS, map(float, tr.vel_enu[i])))
                fh.write(json.dumps(obj) + "\n")


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_pois(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(POI_COLUMNS)
        for r in records:
            w.writerow([r.flight_id, r.point_index, _fmt(r.lon_deg), _fmt(r.lat_deg), _fmt(r.alt_m), _fmt(r.score)])


def _read_csv(path, columns):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != columns:
            raise ParseError(f"expected header {','.join(columns)}, got {header}", 1)
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(columns):
                raise ParseError(f"expected {len(columns)} columns, got {len(row)}", lineno)
            yield lineno, row


def read_pois(path) -> list[PoiRecord]:
    out = []
    for lineno, row in _read_csv(path, POI_COLUMNS):
        try:
            rec = PoiRecord(row[0], int(row[1]), float(row[2]), float(row[3]), float(row[4]), float(row[5]))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
        if not all(math.isfinite(v) for v in (rec.lon_deg, rec.lat_deg, rec.alt_m, rec.score)):
            raise ParseError("non-finite value", lineno)
        if rec.score < 0:
            raise ParseError("negative score", lineno)
        out.append(rec)
    return out


def pois_to_ecef(records) -> np.ndarray:
    if not records:
        return np.zeros((0, 3))
    arr = np.array([(r.lon_deg, r.lat_deg, r.alt_m) for r in records], dtype=float)
    return lla_deg_to_ecef(arr[:, 0], arr[:, 1], arr[:, 2])


def pois_to_pointset(records, softplus: bool = False) -> ScoredPointSet:
    return ScoredPointSet(pois_to_ecef(records), [r.score for r in records], softplus=softplus)


def write_traces(traces, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for tr in sorted(traces, key=lambda tr: tr.flight_id):
            for i in range(len(tr)):
                w.writerow([tr.flight_id, i, _fmt(tr.lon_deg[i]), _fmt(tr.lat_deg[i]), _fmt(tr.alt_m[i]),
                            _fmt(tr.values[i]), int(bool(tr.poi_mask[i]))])


def read_traces(path) -> list[FieldTrace]:
    rows = defaultdict(list)
    for lineno, row in _read_csv(path, TRACE_COLUMNS):
        try:
            rows[row[0]].append((int(row[1]), float(row[2]), float(row[3]), float(row[4]), float(row[5]),
                                 int(row[6])))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    out = []
    for fid, recs in rows.items():
        recs.sort()
        a = np.array(recs, dtype=float)
        out.append(FieldTrace(fid, a[:, 0], a[:, 1], a[:, 2], a[:, 3], a[:, 4], a[:, 5].astype(bool)))
    return sorted(out, key=lambda tr: tr.flight_id)


def write_tsv(rows: list[dict], path=None) -> str:
    """Tab-separated table with a header row; returned and optionally written."""
    if not rows:
        text = ""
    else:
        cols = list(rows[0])
        lines = ["\t".join(cols)]
        for r in rows:
            lines.append("\t".join(f"{r[c]:.6g}" if isinstance(r[c], float) else str(r[c]) for c in cols))
        text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text
