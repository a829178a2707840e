"""Result files: CSV tables, the JSON summary and the binary record."""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .grid import RadialGrid, SpacetimeRecord

TIMESERIES_COLUMNS = ("t", "kinetic", "gradient", "potential", "energy", "n_l2",
                      "strichartz_f", "support_radius", "decay_value", "decay_tail")
CONFORMAL_COLUMNS = ("T", "energy", "flux", "pt_integral", "mantle_V", "mantle_dV", "exp_cone")

MAGIC = b"CRWVREC1"
_HEADER = struct.Struct("<8sqddq")


def fmt_float(x) -> str:
    """17 significant digits, enough to round-trip any float64."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
            w.writerow([fmt_float(v) for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, np.array([[float(v) for v in row] for row in r]).reshape(-1, len(header))


def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "name") and hasattr(obj, "value"):
        return obj.name
    return obj


def write_json(path, obj):
    Path(path).write_text(json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n")


def write_record(path, rec: SpacetimeRecord):
    """Header (magic, n_cells, dr, dt_rec, n_snap), snapshot times, then u and w per snapshot."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rec.grid.n_cells, rec.grid.dr, rec.dt_rec, len(rec)))
        fh.write(np.asarray(rec.times, dtype="<f8").tobytes())
        for i in range(len(rec)):
            fh.write(np.asarray(rec.u[i], dtype="<f8").tobytes())
            fh.write(np.asarray(rec.w[i], dtype="<f8").tobytes())


def read_record(path) -> SpacetimeRecord:
    raw = Path(path).read_bytes()
    magic, n, dr, dt_rec, ns = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a record file")
    off = _HEADER.size
    need = off + 8 * ns * (1 + 2 * n)
    if len(raw) != need:
        raise ValueError(f"{path}: expected {need} bytes, found {len(raw)}")
    times = np.frombuffer(raw, "<f8", ns, off).astype(np.float64)
    body = np.frombuffer(raw, "<f8", 2 * n * ns, off + 8 * ns).reshape(ns, 2, n)
    return SpacetimeRecord(RadialGrid(dr, n), dt_rec, times, body[:, 0].copy(), body[:, 1].copy())
