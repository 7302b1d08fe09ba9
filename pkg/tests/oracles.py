"""Independent reference implementations used only by the tests.

Each is written directly from the definition, with plain loops, and shares no
code with the package.
"""

import itertools
import math

import numpy as np


def jacobi_eigh(S, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi eigendecomposition of a symmetric matrix.

    Returns eigenvalues ascending and eigenvectors as columns.
    """
    A = np.array(S, dtype=np.float64)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * max(1.0, np.linalg.norm(A)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if A[p, q] == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                R = np.eye(n)
                R[p, p] = c
                R[q, q] = c
                R[p, q] = s
                R[q, p] = -s
                A = R.T @ A @ R
                V = V @ R
    values = np.diag(A).copy()
    order = np.argsort(values, kind="stable")
    return values[order], V[:, order]


def silhouette_bruteforce(D, labels):
    n = len(labels)
    out = []
    clusters = sorted(set(labels))
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(D[i][j] for j in own) / len(own)
        b = math.inf
        for c in clusters:
            if c == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == c]
            b = min(b, sum(D[i][j] for j in members) / len(members))
        m = max(a, b)
        out.append(0.0 if m == 0 else (b - a) / m)
    return out


def recount_consensus(masks, labelings):
    """Pair counts by direct enumeration. ``labelings[b][i]`` is None when excluded."""
    n = len(masks[0])
    together = [[0] * n for _ in range(n)]
    cosample = [[0] * n for _ in range(n)]
    for mask, labels in zip(masks, labelings):
        for i in range(n):
            for j in range(n):
                if mask[i] and mask[j]:
                    cosample[i][j] += 1
                    if labels[i] == labels[j]:
                        together[i][j] += 1
    return np.array(together), np.array(cosample)


def best_two_partition(points):
    """Minimal within-cluster SSE over every split of 1-D points into 2 non-empty groups."""
    n = len(points)
    best = (math.inf, None)
    for mask in itertools.product([0, 1], repeat=n):
        if 0 < sum(mask) < n:
            sse = 0.0
            for g in (0, 1):
                grp = [p for p, m in zip(points, mask) if m == g]
                mu = sum(grp) / len(grp)
                sse += sum((p - mu) ** 2 for p in grp)
            if sse < best[0] - 1e-12:
                best = (sse, mask)
    return best


def ari_from_contingency(a, b):
    from math import comb

    pairs = {}
    for x, y in zip(a, b):
        pairs[(x, y)] = pairs.get((x, y), 0) + 1
    rows, cols = {}, {}
    for (x, y), c in pairs.items():
        rows[x] = rows.get(x, 0) + c
        cols[y] = cols.get(y, 0) + c
    index = sum(comb(c, 2) for c in pairs.values())
    sr = sum(comb(c, 2) for c in rows.values())
    sc = sum(comb(c, 2) for c in cols.values())
    expected = sr * sc / comb(len(a), 2)
    return (index - expected) / ((sr + sc) / 2 - expected)


def snf_step_reference(P_list, S_list):
    """One cross-diffusion step written with explicit loops over entries."""
    m = len(P_list)
    n = P_list[0].shape[0]
    out = []
    for v in range(m):
        others = np.zeros((n, n))
        for u in range(m):
            if u != v:
                others += P_list[u]
        others /= m - 1
        Q = np.zeros((n, n))
        S = S_list[v]
        for i in range(n):
            for j in range(n):
                Q[i, j] = sum(S[i, a] * others[a, b] * S[j, b] for a in range(n) for b in range(n))
        # half mass on the diagonal, rows off-diagonal sum to 1/2, symmetrize
        R = np.zeros((n, n))
        for i in range(n):
            tot = sum(Q[i, j] for j in range(n) if j != i)
            for j in range(n):
                R[i, j] = 0.5 if i == j else Q[i, j] / (2 * tot)
        out.append((R + R.T) / 2)
    return out
