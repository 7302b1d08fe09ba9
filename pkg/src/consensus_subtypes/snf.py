"""Similarity network fusion across data views."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithms import spectral
from .errors import DataError, NumericalError
from .matrix import as_symmetric, check_distance_matrix, pairwise_distances

DEFAULT_MU = 0.5
DEFAULT_ITERATIONS = 20


def default_k_neighbors(n):
    return max(3, int(round(n / 10)))


@dataclass
class SNFParams:
    k_neighbors: int | None = None
    mu: float = DEFAULT_MU
    iterations: int = DEFAULT_ITERATIONS
    metric: str = "euclidean"

    def resolve_k(self, n):
        k = default_k_neighbors(n) if self.k_neighbors is None else self.k_neighbors
        return min(k, n - 1)


@dataclass
class FusedNetwork:
    fused: np.ndarray
    per_view: list
    k_neighbors: int
    iterations: int
    mu: float | None = None

    def silhouette_distance(self):
        return similarity_to_distance(self.fused)


def similarity_to_distance(W):
    """``1 - W / max(W)`` over off-diagonal entries, with a zero diagonal."""
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    off = ~np.eye(n, dtype=bool)
    top = W[off].max() if n > 1 else 1.0
    if top <= 0:
        raise NumericalError("similarity matrix has no positive off-diagonal entries")
    D = np.clip(1.0 - W / top, 0.0, None)
    D[np.diag_indices(n)] = 0.0
    return (D + D.T) / 2.0


def _knn_rows(M, k, largest):
    """Column indices of each row's k best off-diagonal entries, ties by index."""
    n = M.shape[0]
    out = np.empty((n, k), dtype=np.int64)
    cols = np.arange(n)
    for i in range(n):
        others = cols[cols != i]
        vals = M[i, others]
        order = np.lexsort((others, -vals if largest else vals))
        out[i] = others[order[:k]]
    return out


def snf_affinity(D, k_neighbors, mu=DEFAULT_MU):
    """Scaled exponential kernel ``exp(-d_ij^2 / (mu * eps_ij))``.

    ``eps_ij`` averages three squared distances: the mean over the
    ``k_neighbors`` nearest neighbours of ``i``, the same for ``j``, and
    ``d_ij^2`` itself. Numerator and scale are both quadratic in distance, so
    the kernel is unchanged when every distance is multiplied by a constant.
    """
    D = check_distance_matrix(D)
    n = D.shape[0]
    if not 1 <= k_neighbors < n:
        raise DataError(f"k_neighbors must lie in [1, {n - 1}], got {k_neighbors}")
    if mu <= 0:
        raise DataError(f"mu must be positive, got {mu}")
    D2 = D**2
    nn = _knn_rows(D, k_neighbors, largest=False)
    local = np.take_along_axis(D2, nn, axis=1).mean(axis=1)
    eps = (local[:, None] + local[None, :] + D2) / 3.0
    bad = np.argwhere(np.triu(eps <= 0, 1))
    if bad.size:
        i, j = bad[0]
        raise NumericalError(f"kernel scale is zero for samples {i} and {j} (duplicate-heavy data)")
    np.fill_diagonal(eps, 1.0)
    W = np.exp(-D2 / (mu * eps))
    W[np.diag_indices(n)] = 1.0
    return (W + W.T) / 2.0


def full_kernel(W):
    """Row normalization with half the mass on the diagonal, then symmetrized."""
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    off = W.copy()
    off[np.diag_indices(n)] = 0.0
    sums = off.sum(axis=1)
    if np.any(sums <= 0):
        raise NumericalError(f"sample {int(np.flatnonzero(sums <= 0)[0])} has no positive similarity")
    P = off / (2.0 * sums[:, None])
    P[np.diag_indices(n)] = 0.5
    return (P + P.T) / 2.0


def sparse_kernel(W, k_neighbors):
    """Keep each row's ``k_neighbors`` most similar off-diagonal entries, rows sum to 1."""
    W = np.asarray(W, dtype=np.float64)
    n = W.shape[0]
    nn = _knn_rows(W, k_neighbors, largest=True)
    S = np.zeros_like(W)
    rows = np.repeat(np.arange(n), k_neighbors)
    S[rows, nn.ravel()] = W[rows, nn.ravel()]
    sums = S.sum(axis=1)
    if np.any(sums <= 0):
        raise NumericalError(f"sample {int(np.flatnonzero(sums <= 0)[0])} has no positive neighbour affinity")
    return S / sums[:, None]


def snf_step(P, S):
    """One cross-diffusion update of every view; returns the new kernels."""
    m = len(P)
    new = []
    for v in range(m):
        others = sum(P[u] for u in range(m) if u != v) / (m - 1)
        new.append(full_kernel(S[v] @ others @ S[v].T))
    return new


def snf_fuse(affinities, k_neighbors, iterations=DEFAULT_ITERATIONS):
    """Fuse per-view affinity matrices by iterative cross-diffusion.

    Each view keeps a full kernel (half self-weight, symmetrized) and a
    sparse k-nearest-neighbour kernel. Every iteration replaces a view's full
    kernel by its sparse kernel applied on both sides of the mean of the other
    views' kernels, then renormalizes. With a single view there is nothing to
    diffuse and the kernel is returned unchanged.
    """
    mats = [as_symmetric(W, "affinity matrix", atol=1e-12) for W in affinities]
    if not mats:
        raise DataError("snf_fuse needs at least one affinity matrix")
    n = mats[0].shape[0]
    for W in mats[1:]:
        if W.shape != (n, n):
            raise DataError(f"affinity matrices differ in shape: {W.shape} vs {(n, n)}")
    if not 1 <= k_neighbors < n:
        raise DataError(f"k_neighbors must lie in [1, {n - 1}], got {k_neighbors}")
    if iterations < 0:
        raise DataError("iterations must be nonnegative")
    P = [full_kernel(W) for W in mats]
    if len(P) > 1:
        S = [sparse_kernel(W, k_neighbors) for W in mats]
        for _ in range(iterations):
            P = snf_step(P, S)
    fused = sum(P) / len(P)
    return FusedNetwork((fused + fused.T) / 2.0, P, k_neighbors, iterations)


def view_distances(views, metric="euclidean"):
    return [pairwise_distances(v.values, metric) for v in views]


def snf_network(views, params=None, distances=None):
    """Per-view distances, kernels and fusion for a ViewSet."""
    params = params or SNFParams()
    n = views.n_samples
    k = params.resolve_k(n)
    if distances is None:
        distances = view_distances(views, params.metric)
    affinities = [snf_affinity(D, k, params.mu) for D in distances]
    net = snf_fuse(affinities, k, params.iterations)
    net.mu = params.mu
    return net


def snf_cluster(views, k, params=None, seed=0, return_network=False):
    """Cluster a ViewSet by spectral clustering of its fused similarity network."""
    net = snf_network(views, params)
    A = net.fused.copy()
    A[np.diag_indices_from(A)] = 0.0
    assignment = spectral(A, k, seed=seed)
    if return_network:
        return assignment, net
    return assignment
