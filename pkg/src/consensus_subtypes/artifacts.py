"""CSV artifacts written by the pipeline and read back by the report renderer.

Floats are written with ``repr`` so files round-trip exactly and repeated
runs produce byte-identical output.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ParseError


def _fmt(x):
    return repr(float(x))


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_assignment(path, sample_ids, assignment):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["sample_id", "cluster"])
        for sid, lab in zip(sample_ids, assignment.labels):
            w.writerow([sid, int(lab)])


def read_assignment(path):
    rows = read_table(path, ["sample_id", "cluster"])
    return [r["sample_id"] for r in rows], np.array([int(r["cluster"]) for r in rows])


def write_square(path, sample_ids, values, integer=False):
    """N x N matrix with a header row and first column of sample IDs."""
    fmt = (lambda v: str(int(v))) if integer else _fmt
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["sample_id", *sample_ids])
        for sid, row in zip(sample_ids, values):
            w.writerow([sid, *(fmt(v) for v in row)])


def read_square(path):
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty matrix file", path)
    ids = rows[0][1:]
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(ids) + 1:
            raise ParseError(f"expected {len(ids) + 1} fields, found {len(row)}", path, lineno)
        try:
            values.append([float(v) for v in row[1:]])
        except ValueError:
            raise ParseError("non-numeric matrix entry", path, lineno) from None
    values = np.array(values)
    if values.shape != (len(ids), len(ids)):
        raise ParseError(f"matrix is {values.shape}, expected {len(ids)} x {len(ids)}", path)
    return ids, values


def write_cdf(path, curve):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["index", "cdf"])
        for x, y in zip(curve.grid, curve.cdf):
            w.writerow([_fmt(x), _fmt(y)])


def read_cdf(path):
    rows = read_table(path, ["index", "cdf"])
    return np.array([float(r["index"]) for r in rows]), np.array([float(r["cdf"]) for r in rows])


def write_k_selection(path, report):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["k", "area", "delta_area", "flatness", "chosen"])
        for k in report.ks:
            c = report.curves[k]
            w.writerow([k, _fmt(c.area), _fmt(report.delta_area[k]), _fmt(c.flatness), int(k == report.chosen_k)])


def read_k_selection(path):
    return read_table(path, ["k", "area", "delta_area", "flatness", "chosen"])


def write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_table(path, required):
    """Rows of a headed CSV as dicts, checking that ``required`` columns exist."""
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"missing column(s) {', '.join(missing)}", path, 1)
        return list(reader)


def read_silhouette(path):
    rows = read_table(path, ["sample_id", "cluster", "width"])
    return [(r["sample_id"], int(r["cluster"]), float(r["width"])) for r in rows]
