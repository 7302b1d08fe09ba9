"""Dense matrix primitives: pairwise distances, normalized Laplacian, eigenpairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import ConvergenceError, DataError

METRICS = ("euclidean", "squared_euclidean", "correlation")

# Dense LAPACK path up to this size, restarted Lanczos above.
DENSE_EIGEN_LIMIT = 512


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues sorted ascending with matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __len__(self):
        return len(self.eigenvalues)


def as_matrix(X, name="matrix"):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.size == 0:
        raise DataError(f"{name} must be a non-empty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError(f"{name} contains NaN or infinite values")
    return X


def as_symmetric(S, name="matrix", atol=0.0):
    """Validate a square finite matrix and return its exactly symmetric form.

    Entries differing from their transpose by more than ``atol`` (relative to the
    largest magnitude) are rejected; smaller discrepancies are averaged away.
    """
    S = as_matrix(S, name)
    if S.shape[0] != S.shape[1]:
        raise DataError(f"{name} must be square, got shape {S.shape}")
    gap = np.max(np.abs(S - S.T))
    if gap > atol * max(1.0, np.max(np.abs(S))):
        raise DataError(f"{name} is not symmetric (max asymmetry {gap:.3g})")
    if gap > 0:
        S = (S + S.T) / 2.0
    return S


def check_distance_matrix(D, name="distance matrix"):
    D = as_symmetric(D, name, atol=1e-12)
    if np.any(np.diag(D) != 0):
        raise DataError(f"{name} must have a zero diagonal")
    if np.any(D < 0):
        raise DataError(f"{name} has negative entries")
    return D


def pairwise_distances(X, metric="euclidean"):
    """Pairwise distances between the rows of ``X``.

    Differences are formed explicitly rather than through the
    ``|a|^2 + |b|^2 - 2ab`` expansion, so no negative round-off appears. Only
    the upper triangle is computed; the lower triangle is its mirror image.
    """
    if metric not in METRICS:
        raise DataError(f"unknown metric {metric!r}; expected one of {METRICS}")
    X = as_matrix(X, "data matrix")
    n = X.shape[0]
    if metric == "correlation":
        centered = X - X.mean(axis=1, keepdims=True)
        norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
        flat = np.flatnonzero(norms == 0)
        if flat.size:
            raise DataError(f"row {flat[0]} has zero variance; correlation distance undefined")
        X = centered / norms[:, None]

    D = np.zeros((n, n))
    for i in range(n - 1):
        diff = X[i + 1 :] - X[i]
        sq = np.einsum("ij,ij->i", diff, diff)
        if metric == "euclidean":
            row = np.sqrt(sq)
        elif metric == "squared_euclidean":
            row = sq
        else:
            # unit-norm centered rows: |u - v|^2 = 2 (1 - r)
            row = np.clip(sq / 2.0, 0.0, 2.0)
        D[i, i + 1 :] = row
    return D + D.T


def degree_vector(A):
    return A.sum(axis=1)


def normalized_laplacian(A):
    """Return ``D^{-1/2} (D - A) D^{-1/2}`` for a nonnegative symmetric affinity.

    Every vertex must have positive degree.
    """
    A = as_symmetric(A, "affinity matrix", atol=1e-12)
    if np.any(A < 0):
        raise DataError("affinity matrix has negative entries")
    deg = degree_vector(A)
    isolated = np.flatnonzero(deg <= 0)
    if isolated.size:
        raise DataError(
            f"sample {isolated[0]} has zero total affinity (isolated vertex); "
            "normalized Laplacian undefined"
        )
    inv_sqrt = 1.0 / np.sqrt(deg)
    L = -A * inv_sqrt[:, None] * inv_sqrt[None, :]
    L[np.diag_indices_from(L)] += deg * inv_sqrt * inv_sqrt
    return (L + L.T) / 2.0


def _fix_signs(vectors):
    # first component that is nonzero relative to the column scale made positive
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        scale = np.max(np.abs(col))
        if scale == 0:
            continue
        idx = np.flatnonzero(np.abs(col) > 1e-10 * scale)[0]
        if col[idx] < 0:
            out[:, j] = -col
    return out


def _residual(S, values, vectors):
    return np.linalg.norm(S @ vectors - vectors * values[None, :], axis=0)


def symmetric_eigen(S, k, which="smallest"):
    """Compute ``k`` eigenpairs of a symmetric matrix at one end of the spectrum.

    Parameters
    ----------
    S : array_like, shape (n, n)
        Symmetric matrix.
    k : int
        Number of eigenpairs, ``1 <= k <= n``.
    which : {"smallest", "largest"}
        End of the spectrum to return.

    Returns
    -------
    EigenPairs
        Eigenvalues ascending; each eigenvector's first clearly nonzero
        component is positive.

    Raises
    ------
    ConvergenceError
        If the solver fails or a returned pair misses the residual bound
        ``1e-8 * max(1, ||S||_F)``.
    """
    S = as_symmetric(S, "symmetric matrix", atol=1e-12)
    n = S.shape[0]
    if not 1 <= k <= n:
        raise DataError(f"k must lie in [1, {n}], got {k}")
    if which not in ("smallest", "largest"):
        raise DataError(f"which must be 'smallest' or 'largest', got {which!r}")

    tol = 1e-8 * max(1.0, np.linalg.norm(S))
    if n <= DENSE_EIGEN_LIMIT or k > n // 2:
        try:
            values, vectors = np.linalg.eigh(S)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError(f"dense eigensolver failed: {exc}", residual=np.inf) from exc
        if which == "smallest":
            values, vectors = values[:k], vectors[:, :k]
        else:
            values, vectors = values[n - k :], vectors[:, n - k :]
    else:
        v0 = np.ones(n) / np.sqrt(n)
        try:
            values, vectors = eigsh(
                S, k=k, which="SA" if which == "smallest" else "LA", v0=v0, tol=1e-12, maxiter=20 * n
            )
        except ArpackNoConvergence as exc:
            res = _residual(S, exc.eigenvalues, exc.eigenvectors) if len(exc.eigenvalues) else [np.inf]
            raise ConvergenceError(
                f"Lanczos did not converge ({len(exc.eigenvalues)} of {k} pairs)",
                residual=float(np.max(res)),
            ) from exc
        order = np.argsort(values, kind="stable")
        values, vectors = values[order], vectors[:, order]

    vectors = _fix_signs(vectors)
    res = _residual(S, values, vectors)
    if np.max(res) > tol:
        raise ConvergenceError(
            f"eigenpair residual {np.max(res):.3g} exceeds tolerance {tol:.3g}",
            residual=float(np.max(res)),
        )
    return EigenPairs(values, vectors)
