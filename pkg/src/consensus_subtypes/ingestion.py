"""Reading, merging and variance filtering of expression matrices.

Files are delimited text with one header line of IDs. Orientation
``features_as_rows`` means the header lists samples and the first column lists
features (the usual gene-expression layout); ``samples_as_rows`` is the
transpose. Internally every matrix is samples x features, with missing cells
stored as NaN.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParseError

ORIENTATIONS = ("features_as_rows", "samples_as_rows")
NA_TOKEN = "NA"


@dataclass
class ExpressionMatrix:
    sample_ids: list[str]
    feature_ids: list[str]
    values: np.ndarray
    name: str = "view"

    def __post_init__(self):
        self.sample_ids = [str(s) for s in self.sample_ids]
        self.feature_ids = [str(f) for f in self.feature_ids]
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (len(self.sample_ids), len(self.feature_ids)):
            raise DataError(
                f"{self.name}: values shape {self.values.shape} does not match "
                f"{len(self.sample_ids)} samples x {len(self.feature_ids)} features"
            )
        _check_unique(self.sample_ids, "sample", self.name)
        _check_unique(self.feature_ids, "feature", self.name)

    @property
    def n_samples(self):
        return len(self.sample_ids)

    @property
    def n_features(self):
        return len(self.feature_ids)

    @property
    def has_missing(self):
        return bool(np.isnan(self.values).any())


@dataclass
class ViewSet:
    """Views over one identically ordered sample list."""

    views: list[ExpressionMatrix]

    def __post_init__(self):
        if not self.views:
            raise DataError("a ViewSet needs at least one view")
        ref = self.views[0].sample_ids
        for view in self.views[1:]:
            if view.sample_ids != ref:
                raise DataError(f"view {view.name!r} sample IDs differ from view {self.views[0].name!r}")

    @property
    def sample_ids(self):
        return self.views[0].sample_ids

    @property
    def n_samples(self):
        return len(self.sample_ids)

    @property
    def names(self):
        return [v.name for v in self.views]

    def __len__(self):
        return len(self.views)

    def __iter__(self):
        return iter(self.views)

    def concatenated(self):
        """All views side by side as one samples x features array."""
        return np.hstack([v.values for v in self.views])

    def subset(self, samples, features=None):
        """Restrict to sample indices and optionally per-view feature indices."""
        samples = np.asarray(samples)
        ids = [self.sample_ids[i] for i in samples]
        out = []
        for j, view in enumerate(self.views):
            cols = np.arange(view.n_features) if features is None else np.asarray(features[j])
            out.append(
                ExpressionMatrix(
                    ids, [view.feature_ids[c] for c in cols], view.values[np.ix_(samples, cols)], view.name
                )
            )
        return ViewSet(out)


@dataclass
class SelectionReport:
    feature_ids: list[str]
    variances: np.ndarray
    kept: np.ndarray
    view: str = "view"
    kept_feature_ids: list[str] = field(default_factory=list)

    @property
    def variance_explained(self):
        total = float(np.sum(self.variances))
        if total == 0:
            return 1.0
        return float(np.sum(self.variances[self.kept])) / total


def _check_unique(ids, kind, name):
    seen = set()
    for i in ids:
        if i in seen:
            raise DataError(f"{name}: duplicate {kind} ID {i!r}")
        seen.add(i)


def _delimiter_for(path, first_line):
    if Path(path).suffix.lower() == ".csv":
        return ","
    if "\t" in first_line:
        return "\t"
    return ","


def load_expression_matrix(path, orientation="features_as_rows", name=None):
    """Parse a delimited expression file into a samples x features matrix.

    Raises
    ------
    ParseError
        On ragged rows, duplicate IDs or non-numeric cells other than ``NA``;
        the message carries the file path and 1-based line number.
    """
    if orientation not in ORIENTATIONS:
        raise DataError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    path = Path(path)
    name = name or path.stem
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file: {exc.strerror}", path) from exc
    lines = text.splitlines()
    if not lines:
        raise ParseError("file is empty", path)
    delim = _delimiter_for(path, lines[0])
    rows = list(csv.reader(lines, delimiter=delim))

    header = rows[0]
    col_ids = [h.strip() for h in header[1:]]
    if not col_ids:
        raise ParseError("header has no ID columns", path, 1)
    seen = {}
    for c in col_ids:
        if c in seen:
            raise ParseError(f"duplicate ID {c!r} in header", path, 1)
        seen[c] = True

    row_ids, body = [], []
    row_seen = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, found {len(row)}", path, lineno)
        rid = row[0].strip()
        if rid in row_seen:
            raise ParseError(f"duplicate ID {rid!r}", path, lineno)
        row_seen[rid] = True
        values = []
        for cell in row[1:]:
            cell = cell.strip()
            if cell == NA_TOKEN:
                values.append(np.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r}", path, lineno) from None
            if not np.isfinite(v):
                raise ParseError(f"non-finite cell {cell!r}", path, lineno)
            values.append(v)
        row_ids.append(rid)
        body.append(values)
    if not body:
        raise ParseError("no data rows", path)

    values = np.array(body, dtype=np.float64)
    if orientation == "features_as_rows":
        return ExpressionMatrix(col_ids, row_ids, values.T, name)
    return ExpressionMatrix(row_ids, col_ids, values, name)


def _format_value(v):
    return NA_TOKEN if np.isnan(v) else repr(float(v))


def write_expression_matrix(X, path, orientation="features_as_rows"):
    """Write ``X`` in the format read by :func:`load_expression_matrix`.

    Floats are written with ``repr`` so reloading is bit-exact.
    """
    if orientation not in ORIENTATIONS:
        raise DataError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    path = Path(path)
    delim = "," if path.suffix.lower() == ".csv" else "\t"
    if orientation == "features_as_rows":
        header, row_ids, values = X.sample_ids, X.feature_ids, X.values.T
        corner = "feature_id"
    else:
        header, row_ids, values = X.feature_ids, X.sample_ids, X.values
        corner = "sample_id"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, delimiter=delim, lineterminator="\n")
        writer.writerow([corner, *header])
        for rid, row in zip(row_ids, values):
            writer.writerow([rid, *(_format_value(v) for v in row)])


def merge_views(views):
    """Align views on their shared samples and drop features with missing values.

    Samples are restricted to the intersection of IDs across views, in
    lexicographic order. Missing values never remove samples; any feature that
    is missing for a retained sample is dropped from its view.
    """
    if isinstance(views, ViewSet):
        views = views.views
    views = list(views)
    if not views:
        raise DataError("merge_views needs at least one view")
    names = [v.name for v in views]
    if len(set(names)) != len(names):
        names = [f"{v.name}_{i}" for i, v in enumerate(views)]

    shared = set(views[0].sample_ids)
    for v in views[1:]:
        shared &= set(v.sample_ids)
    if len(shared) < 2:
        raise DataError(f"views share only {len(shared)} sample(s); at least 2 required")
    samples = sorted(shared)

    merged = []
    for view, name in zip(views, names):
        index = {s: i for i, s in enumerate(view.sample_ids)}
        rows = [index[s] for s in samples]
        values = view.values[rows]
        complete = ~np.isnan(values).any(axis=0)
        if not complete.any():
            raise DataError(f"view {name!r}: every feature has missing values")
        merged.append(
            ExpressionMatrix(
                samples,
                [f for f, keep in zip(view.feature_ids, complete) if keep],
                values[:, complete],
                name,
            )
        )
    return ViewSet(merged)


def variance_order(feature_ids, variances):
    """Feature indices by descending variance; equal variances by ID."""
    return sorted(range(len(feature_ids)), key=lambda j: (-variances[j], feature_ids[j]))


def select_by_variance(X, n_top):
    """Keep the ``n_top`` features with the largest sample variance (ddof=1).

    Kept features are returned in descending-variance order with ties broken
    by feature ID, so the result does not depend on input column order.
    """
    if X.has_missing:
        raise DataError(f"{X.name}: remove missing values before variance selection")
    if not isinstance(n_top, (int, np.integer)) or not 1 <= n_top <= X.n_features:
        raise DataError(f"{X.name}: n_top must lie in [1, {X.n_features}], got {n_top}")
    if X.n_samples < 2:
        raise DataError(f"{X.name}: variance needs at least 2 samples")
    variances = X.values.var(axis=0, ddof=1)
    order = variance_order(X.feature_ids, variances)
    top = order[:n_top]
    kept = np.zeros(X.n_features, dtype=bool)
    kept[top] = True
    selected = ExpressionMatrix(
        X.sample_ids, [X.feature_ids[j] for j in top], X.values[:, top], X.name
    )
    report = SelectionReport(
        list(X.feature_ids), variances, kept, X.name, [X.feature_ids[j] for j in top]
    )
    return selected, report


def transform(X, log2=False, standardize=False):
    """Optional ``log2(x + 1)`` transform and per-feature z-scoring."""
    values = X.values
    if log2:
        if np.nanmin(values) <= -1:
            raise DataError(f"{X.name}: log2(x+1) requires values > -1")
        values = np.log2(values + 1.0)
    if standardize:
        mean = np.nanmean(values, axis=0)
        std = np.nanstd(values, axis=0, ddof=1)
        std[~(std > 0)] = 1.0
        values = (values - mean) / std
    return ExpressionMatrix(X.sample_ids, X.feature_ids, values, X.name)


def write_selection_report(report, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature_id", "variance", "kept"])
        for fid, var, kept in zip(report.feature_ids, report.variances, report.kept):
            writer.writerow([fid, repr(float(var)), int(kept)])
