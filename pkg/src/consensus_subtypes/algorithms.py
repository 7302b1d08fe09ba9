"""Base clustering algorithms: Lloyd k-means, agglomerative linkage, spectral."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .matrix import as_matrix, check_distance_matrix, normalized_laplacian, symmetric_eigen

LINKAGES = ("single", "complete", "average")
KMEANS_INITS = ("kmeanspp", "random")
CENTER_TOL = 1e-10
DEFAULT_N_INIT = 10


def canonical_labels(labels):
    """Renumber labels 0, 1, ... in order of first appearance."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels.tolist()):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    k: int = None
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        labels = canonical_labels(np.asarray(self.labels).ravel())
        present = len(np.unique(labels)) if labels.size else 0
        if self.k is None:
            self.k = present
        if present != self.k:
            raise DataError(f"assignment has {present} non-empty clusters, expected {self.k}")
        self.labels = labels

    def __len__(self):
        return len(self.labels)

    def __eq__(self, other):
        if not isinstance(other, ClusterAssignment):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.labels, other.labels)

    def clusters(self):
        return [np.flatnonzero(self.labels == c) for c in range(self.k)]


@dataclass
class KMeansResult:
    assignment: ClusterAssignment
    centers: np.ndarray
    objective_trace: list
    iterations: int
    converged: bool

    @property
    def objective(self):
        return self.objective_trace[-1]


def _sq_dists_to_centers(X, centers):
    out = np.empty((X.shape[0], centers.shape[0]))
    for c, center in enumerate(centers):
        diff = X - center
        out[:, c] = np.einsum("ij,ij->i", diff, diff)
    return out


def _kmeanspp(X, k, rng):
    # greedy variant: draw 2 + log(k) candidates per step, keep the best
    n = X.shape[0]
    trials = 2 + int(np.log(k))
    chosen = [int(rng.integers(n))]
    closest = _sq_dists_to_centers(X, X[chosen])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise DataError("k-means++ ran out of distinct points")
        candidates = rng.choice(n, size=trials, p=closest / total)
        cand_d = np.minimum(closest[:, None], _sq_dists_to_centers(X, X[candidates]))
        best = int(np.argmin(cand_d.sum(axis=0)))
        chosen.append(int(candidates[best]))
        closest = cand_d[:, best]
    return X[chosen].copy()


def _random_init(X, k, rng):
    centers, seen = [], set()
    for idx in rng.permutation(X.shape[0]):
        key = X[idx].tobytes()
        if key not in seen:
            seen.add(key)
            centers.append(X[idx])
            if len(centers) == k:
                break
    return np.array(centers)


def kmeans(X, k, init="kmeanspp", max_iter=300, seed=0, n_init=DEFAULT_N_INIT):
    """Lloyd's algorithm with k-means++ or random initialization.

    The algorithm is restarted ``n_init`` times from independent
    initializations drawn from one generator seeded with ``seed``; the run
    with the lowest final objective is returned (earliest on ties). Each
    iteration assigns points to the nearest center (lowest index on ties),
    records the within-cluster sum of squares, and moves every center to the
    mean of its members. An empty cluster's center is reseeded at the point
    farthest from its current center. Iteration stops once no center moves by
    more than 1e-10 in max-norm, or after ``max_iter`` assignment steps.
    """
    X = as_matrix(X, "data matrix")
    if init not in KMEANS_INITS:
        raise DataError(f"init must be one of {KMEANS_INITS}, got {init!r}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DataError(f"k must be a positive integer, got {k!r}")
    if max_iter < 1:
        raise DataError("max_iter must be at least 1")
    if n_init < 1:
        raise DataError("n_init must be at least 1")
    n_distinct = len(np.unique(X, axis=0))
    if k > n_distinct:
        raise DataError(f"k={k} exceeds the number of distinct rows ({n_distinct})")

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        result = _lloyd(X, k, init, max_iter, rng)
        if best is None or result.objective < best.objective:
            best = result
    return best


def _lloyd(X, k, init, max_iter, rng):
    centers = _kmeanspp(X, k, rng) if init == "kmeanspp" else _random_init(X, k, rng)
    trace = []
    converged = False
    iterations = 0
    while iterations < max_iter:
        iterations += 1
        d2 = _sq_dists_to_centers(X, centers)
        labels = np.argmin(d2, axis=1)
        own = d2[np.arange(len(X)), labels]
        trace.append(float(own.sum()))

        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            taken = set()
            for c in empty:
                for idx in np.argsort(-own, kind="stable"):
                    if idx not in taken:
                        break
                taken.add(idx)
                centers[c] = X[idx]
                own[idx] = 0.0
            continue

        new = np.zeros_like(centers)
        np.add.at(new, labels, X)
        new /= counts[:, None]
        shift = np.max(np.abs(new - centers))
        centers = new
        if shift < CENTER_TOL:
            converged = True
            break

    # centers are the means of the last assignment's members
    final = np.zeros_like(centers)
    np.add.at(final, labels, X)
    final /= np.bincount(labels, minlength=k)[:, None]
    assignment = ClusterAssignment(labels, k)
    order = [int(labels[np.flatnonzero(assignment.labels == c)[0]]) for c in range(k)]
    return KMeansResult(assignment, final[order], trace, iterations, converged)


@dataclass
class Dendrogram:
    """Agglomerative merge history.

    ``merges[t] = (left, right, height, size)``. Leaves are nodes ``0..n-1``;
    merge ``t`` creates node ``n + t``.
    """

    merges: list
    n_leaves: int

    def __post_init__(self):
        if len(self.merges) != self.n_leaves - 1:
            raise DataError(f"dendrogram over {self.n_leaves} leaves needs {self.n_leaves - 1} merges")

    @property
    def heights(self):
        return np.array([m[2] for m in self.merges])

    def to_linkage(self):
        """The merge table as a scipy-style ``(n-1, 4)`` linkage array."""
        return np.array([[l, r, h, s] for l, r, h, s in self.merges], dtype=np.float64).reshape(-1, 4)


def hierarchical(D, linkage="average"):
    """Agglomerative clustering of a precomputed distance matrix.

    Cluster distances are updated with the Lance-Williams recurrence for
    single, complete or average linkage. When several pairs share the minimal
    distance, the pair with the lexicographically smallest
    ``(min node id, max node id)`` is merged first.
    """
    if linkage not in LINKAGES:
        raise DataError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    D = check_distance_matrix(D)
    n = D.shape[0]
    if n < 2:
        raise DataError("hierarchical clustering needs at least 2 samples")

    work = D.copy()
    work[np.diag_indices(n)] = np.inf
    node = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    merges = []
    for t in range(n - 1):
        height = work.min()
        rows, cols = np.nonzero(work == height)
        keep = rows < cols
        rows, cols = rows[keep], cols[keep]
        if len(rows) > 1:
            lo = np.minimum(node[rows], node[cols])
            hi = np.maximum(node[rows], node[cols])
            pick = np.lexsort((hi, lo))[0]
        else:
            pick = 0
        a, b = int(rows[pick]), int(cols[pick])
        left, right = sorted((int(node[a]), int(node[b])))
        new_size = int(size[a] + size[b])
        merges.append((left, right, float(height), new_size))

        da, db = work[a], work[b]
        if linkage == "single":
            row = np.minimum(da, db)
        elif linkage == "complete":
            row = np.maximum(da, db)
        else:
            row = (size[a] * da + size[b] * db) / new_size
        row[~active] = np.inf
        row[a] = np.inf
        work[a, :] = row
        work[:, a] = row
        work[b, :] = np.inf
        work[:, b] = np.inf
        active[b] = False
        node[a] = n + t
        size[a] = new_size
    return Dendrogram(merges, n)


def cut_dendrogram(dend, k):
    """Flat clustering with ``k`` clusters: undo the last ``k - 1`` merges."""
    n = dend.n_leaves
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise DataError(f"k must lie in [1, {n}], got {k!r}")
    parent = list(range(2 * n - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, (left, right, _, _) in enumerate(dend.merges[: n - k]):
        parent[find(left)] = n + t
        parent[find(right)] = n + t
    roots = [find(i) for i in range(n)]
    return ClusterAssignment(roots, k)


def gaussian_affinity(D, scale="global_median", k_n=7):
    """Gaussian kernel ``exp(-d_ij^2 / (sigma_i sigma_j))`` with zeroed diagonal.

    ``global_median`` uses one bandwidth, the median of the positive
    off-diagonal distances, so the result is invariant to rescaling ``D``.
    ``local_knn`` sets ``sigma_i`` to the distance from sample ``i`` to its
    ``k_n``-th nearest neighbour.
    """
    D = check_distance_matrix(D)
    n = D.shape[0]
    off = D[np.triu_indices(n, 1)]
    if n < 2 or not np.any(off > 0):
        raise DataError("all pairwise distances are zero; affinity undefined")
    if scale == "global_median":
        sigma = np.full(n, np.median(off[off > 0]))
    elif scale == "local_knn":
        if not 1 <= k_n < n:
            raise DataError(f"k_n must lie in [1, {n - 1}], got {k_n}")
        sigma = np.sort(D, axis=1)[:, k_n]
        positive = off[off > 0].min()
        sigma = np.where(sigma > 0, sigma, positive)
    else:
        raise DataError(f"unknown scale rule {scale!r}")
    A = np.exp(-(D**2) / np.outer(sigma, sigma))
    A[np.diag_indices(n)] = 0.0
    return (A + A.T) / 2.0


def spectral(A, k, seed=0):
    """Spectral clustering on an affinity matrix (normalized-Laplacian embedding).

    The eigenvectors of the ``k`` smallest Laplacian eigenvalues form an
    ``n x k`` embedding whose rows are scaled to unit length and clustered
    with k-means++. Rows of numerically zero norm are left unscaled and
    counted in ``diagnostics["zero_norm_rows"]``.
    """
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise DataError(f"k must be a positive integer, got {k!r}")
    L = normalized_laplacian(A)
    n = L.shape[0]
    if k > n:
        raise DataError(f"k={k} exceeds sample count {n}")
    pairs = symmetric_eigen(L, k, "smallest")
    emb = pairs.eigenvectors
    norms = np.linalg.norm(emb, axis=1)
    zero = norms <= 1e-12
    emb = emb.copy()
    emb[~zero] /= norms[~zero, None]
    result = kmeans(emb, k, init="kmeanspp", seed=seed)
    assignment = result.assignment
    assignment.diagnostics = {
        "zero_norm_rows": int(zero.sum()),
        "eigenvalues": pairs.eigenvalues.tolist(),
    }
    return assignment
