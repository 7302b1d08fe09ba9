"""Silhouette widths, adjusted Rand index and heatmap ordering."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .algorithms import ClusterAssignment
from .errors import DataError
from .matrix import check_distance_matrix


@dataclass
class SilhouetteReport:
    widths: np.ndarray
    labels: np.ndarray
    k: int

    @property
    def asw(self):
        return float(np.mean(self.widths))

    def per_cluster(self):
        """Widths of each cluster sorted descending, the silhouette-plot layout."""
        return [np.sort(self.widths[self.labels == c])[::-1] for c in range(self.k)]


def _labels_of(assignment):
    if isinstance(assignment, ClusterAssignment):
        return assignment.labels, assignment.k
    a = ClusterAssignment(assignment)
    return a.labels, a.k


def silhouette_widths(D, assignment):
    """Per-sample silhouette ``s(i) = (b - a) / max(a, b)``.

    ``a`` is the mean distance to the other members of the sample's cluster,
    ``b`` the smallest mean distance to any other cluster. Members of
    singleton clusters get 0.
    """
    D = check_distance_matrix(D)
    labels, k = _labels_of(assignment)
    n = len(labels)
    if D.shape[0] != n:
        raise DataError(f"distance matrix covers {D.shape[0]} samples, assignment {n}")
    if k < 2:
        raise DataError("silhouette needs at least 2 clusters")
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    counts = onehot.sum(axis=0)
    sums = D @ onehot
    own_count = counts[labels]
    own_sum = sums[np.arange(n), labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = own_sum / (own_count - 1)
        means = sums / counts[None, :]
    means[np.arange(n), labels] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    widths = np.zeros(n)
    ok = (own_count > 1) & (denom > 0)
    widths[ok] = (b[ok] - a[ok]) / denom[ok]
    return SilhouetteReport(widths, labels, k)


def asw(D, assignment):
    """Average silhouette width over all samples."""
    return silhouette_widths(D, assignment).asw


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def adjusted_rand_index(a, b):
    """Adjusted Rand index between two labelings of the same samples."""
    a = np.asarray(a.labels if isinstance(a, ClusterAssignment) else a).ravel()
    b = np.asarray(b.labels if isinstance(b, ClusterAssignment) else b).ravel()
    if len(a) != len(b):
        raise DataError(f"label vectors differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1)
    index = _comb2(table).sum()
    rows = _comb2(table.sum(axis=1)).sum()
    cols = _comb2(table.sum(axis=0)).sum()
    expected = rows * cols / _comb2(n)
    best = (rows + cols) / 2.0
    if best == expected:
        return 1.0
    return float((index - expected) / (best - expected))


def reorder_for_heatmap(M, assignment):
    """Sample order that renders the consensus matrix block-diagonally.

    Samples are grouped by cluster; inside a cluster they are sorted by
    descending mean consensus with the other members (ties keep index order).
    """
    values = np.asarray(getattr(M, "values", M), dtype=np.float64)
    labels, k = _labels_of(assignment)
    if values.shape != (len(labels), len(labels)):
        raise DataError("consensus matrix and assignment sizes differ")
    order = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        block = values[np.ix_(members, members)]
        if len(members) > 1:
            score = (block.sum(axis=1) - np.diag(block)) / (len(members) - 1)
        else:
            score = np.zeros(1)
        order.extend(members[np.argsort(-score, kind="stable")].tolist())
    return np.array(order, dtype=np.int64)


def write_silhouette_csv(report, sample_ids, path):
    """Rows grouped by cluster with descending widths, as drawn in a silhouette plot."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_id", "cluster", "width"])
        for c in range(report.k):
            members = np.flatnonzero(report.labels == c)
            members = members[np.argsort(-report.widths[members], kind="stable")]
            for i in members:
                writer.writerow([sample_ids[i], c, repr(float(report.widths[i]))])


def write_order_csv(order, sample_ids, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["position", "sample_id", "index"])
        for pos, i in enumerate(order):
            writer.writerow([pos, sample_ids[i], int(i)])
