"""Resampling consensus clustering and consensus-CDF model selection.

An ensemble is a list of clusterings of random subsamples (and optionally
random feature subsets). Counting how often each pair of samples lands in the
same cluster, relative to how often both were drawn, gives the consensus
matrix; its off-diagonal distribution (the consensus CDF) is used to choose
the number of clusters, and spectral clustering of the matrix gives the final
partition.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .algorithms import DEFAULT_N_INIT, ClusterAssignment, cut_dendrogram, gaussian_affinity, hierarchical, kmeans, spectral
from .errors import ConfigError, DataError, NumericalError
from .matrix import pairwise_distances
from .snf import SNFParams, snf_affinity, snf_fuse

log = logging.getLogger(__name__)

BASE_ALGORITHMS = ("kmeans", "hierarchical", "spectral", "snf")
DEFAULT_RESAMPLE_FRACTION = 0.8
DEFAULT_ENSEMBLE_SIZE = 500
DEFAULT_TAU = 0.02
DEFAULT_FLATNESS_MAX = 0.1
GRID_POINTS = 101
MAX_RETRIES = 10
# seed stream for the final partition, disjoint from instance indices
PARTITION_STREAM = 2**31 - 1


@dataclass
class BaseParams:
    """Settings handed to the base algorithm of every ensemble instance."""

    metric: str = "euclidean"
    linkage: str = "average"
    kmeans_init: str = "kmeanspp"
    max_iter: int = 300
    n_init: int = DEFAULT_N_INIT
    affinity_scale: str = "global_median"
    snf: SNFParams = field(default_factory=SNFParams)


@dataclass
class EnsembleInstance:
    sample_mask: np.ndarray
    labels: ClusterAssignment
    seed: int
    resample_fraction: float
    features: list | None = None
    algo_seed: int | None = None

    @property
    def indices(self):
        return np.flatnonzero(self.sample_mask)


@dataclass
class ConsensusMatrix:
    together: np.ndarray
    cosample: np.ndarray
    n_instances: int

    @property
    def n(self):
        return self.together.shape[0]

    @property
    def values(self):
        out = np.zeros(self.together.shape)
        seen = self.cosample > 0
        out[seen] = self.together[seen] / self.cosample[seen]
        return out

    @property
    def never_cosampled(self):
        return self.cosample == 0


@dataclass
class CdfCurve:
    grid: np.ndarray
    cdf: np.ndarray
    area: float
    n_pairs: int

    @property
    def flatness(self):
        """Mean slope of the CDF between consensus indices 0.1 and 0.9."""
        lo = self.value_at(0.1)
        hi = self.value_at(0.9)
        return (hi - lo) / 0.8

    def value_at(self, x):
        idx = int(np.searchsorted(self.grid, x - 1e-12))
        return float(self.cdf[idx])


@dataclass
class KSelectionReport:
    ks: list
    curves: dict
    delta_area: dict
    matrices: dict
    chosen_k: int
    tau: float
    flatness_max: float
    warnings: list = field(default_factory=list)

    def summary(self):
        lines = ["k\tarea\tdelta_area\tflatness\tselected"]
        for k in self.ks:
            c = self.curves[k]
            mark = "*" if k == self.chosen_k else ""
            lines.append(f"{k}\t{c.area:.4f}\t{self.delta_area[k]:.4f}\t{c.flatness:.4f}\t{mark}")
        lines.append(
            f"chosen k = {self.chosen_k} (largest k with delta-area > {self.tau} "
            f"among k with CDF flatness < {self.flatness_max})"
        )
        lines.extend(f"warning: {w}" for w in self.warnings)
        return "\n".join(lines)


def child_seed(master_seed, *path):
    """Deterministic 32-bit seed for an ensemble member, independent of run order."""
    seq = np.random.SeedSequence([int(master_seed), *[int(p) for p in path]])
    return int(seq.generate_state(1)[0])


class _Clusterer:
    """Runs one base algorithm on subsets of a fixed ViewSet.

    Full-feature distance matrices are computed once and sliced per instance.
    """

    def __init__(self, base, views, k, params):
        if base not in BASE_ALGORITHMS:
            raise ConfigError(f"base algorithm must be one of {BASE_ALGORITHMS}, got {base!r}")
        self.base = base
        self.views = views
        self.k = k
        self.params = params
        self._merged = None
        self._merged_dist = None
        self._view_dist = None

    def merged(self):
        if self._merged is None:
            self._merged = self.views.concatenated()
        return self._merged

    def merged_distances(self):
        if self._merged_dist is None:
            self._merged_dist = pairwise_distances(self.merged(), self.params.metric)
        return self._merged_dist

    def view_distances(self):
        if self._view_dist is None:
            self._view_dist = [pairwise_distances(v.values, self.params.snf.metric) for v in self.views]
        return self._view_dist

    def __call__(self, idx, features, seed):
        p = self.params
        k = self.k
        if self.base == "kmeans":
            X = self.merged()[idx] if features is None else self.views.subset(idx, features).concatenated()
            return kmeans(X, k, init=p.kmeans_init, max_iter=p.max_iter, seed=seed, n_init=p.n_init).assignment
        if self.base in ("hierarchical", "spectral"):
            if features is None:
                D = self.merged_distances()[np.ix_(idx, idx)]
            else:
                D = pairwise_distances(self.views.subset(idx, features).concatenated(), p.metric)
            if self.base == "hierarchical":
                return cut_dendrogram(hierarchical(D, p.linkage), k)
            return spectral(gaussian_affinity(D, p.affinity_scale), k, seed=seed)
        if features is None:
            dists = [D[np.ix_(idx, idx)] for D in self.view_distances()]
        else:
            sub = self.views.subset(idx, features)
            dists = [pairwise_distances(v.values, p.snf.metric) for v in sub]
        kn = p.snf.resolve_k(len(idx))
        fused = snf_fuse([snf_affinity(D, kn, p.snf.mu) for D in dists], kn, p.snf.iterations).fused
        A = fused.copy()
        A[np.diag_indices_from(A)] = 0.0
        return spectral(A, k, seed=seed)


def _draw(rng, n, size):
    return np.sort(rng.choice(n, size=size, replace=False))


def generate_ensemble(
    base,
    data,
    k,
    size=DEFAULT_ENSEMBLE_SIZE,
    resample_fraction=DEFAULT_RESAMPLE_FRACTION,
    feature_fraction=1.0,
    master_seed=0,
    params=None,
    threads=1,
):
    """Cluster ``size`` random subsamples of ``data`` with one base algorithm.

    Instance ``b`` draws ``round(resample_fraction * N)`` samples without
    replacement (the same samples in every view) and, when
    ``feature_fraction < 1``, a random subset of each view's features. All of
    its randomness comes from ``child_seed(master_seed, b, attempt)``, so the
    ensemble is identical for any ``threads`` setting. An instance whose base
    clustering fails is redrawn with the next attempt number, up to
    ``MAX_RETRIES`` times.
    """
    params = params or BaseParams()
    n = data.n_samples
    if size < 1:
        raise ConfigError(f"ensemble size must be at least 1, got {size}")
    if not 0 < resample_fraction <= 1:
        raise ConfigError(f"resample_fraction must lie in (0, 1], got {resample_fraction}")
    if not 0 < feature_fraction <= 1:
        raise ConfigError(f"feature_fraction must lie in (0, 1], got {feature_fraction}")
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k!r}")
    n_sub = int(round(resample_fraction * n))
    if n_sub < max(k, 2):
        raise ConfigError(f"subsample of {n_sub} samples is too small for k={k}")
    run = _Clusterer(base, data, k, params)

    def one(b):
        last = None
        for attempt in range(MAX_RETRIES + 1):
            seed = child_seed(master_seed, b, attempt)
            rng = np.random.default_rng(seed)
            idx = np.arange(n) if n_sub == n else _draw(rng, n, n_sub)
            features = None
            if feature_fraction < 1:
                features = [
                    _draw(rng, v.n_features, max(1, int(round(feature_fraction * v.n_features))))
                    for v in data
                ]
            algo_seed = int(rng.integers(2**32))
            try:
                labels = run(idx, features, algo_seed)
            except (DataError, NumericalError) as exc:
                last = exc
                continue
            mask = np.zeros(n, dtype=bool)
            mask[idx] = True
            return EnsembleInstance(mask, labels, seed, resample_fraction, features, algo_seed)
        raise NumericalError(f"ensemble instance {b} failed after {MAX_RETRIES + 1} attempts: {last}")

    if threads > 1 and size > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(size)))
    return [one(b) for b in range(size)]


def consensus_matrix(ensemble, n=None):
    """Pair co-clustering and co-sampling counts over an ensemble."""
    if not ensemble:
        raise DataError("consensus matrix needs a non-empty ensemble")
    n = len(ensemble[0].sample_mask) if n is None else n
    blocks, masks = [], []
    for inst in ensemble:
        if len(inst.sample_mask) != n:
            raise DataError("ensemble instances cover different sample universes")
        idx = inst.indices
        if len(idx) != len(inst.labels):
            raise DataError("instance labels do not match its sample mask")
        H = np.zeros((n, inst.labels.k))
        H[idx, inst.labels.labels] = 1.0
        blocks.append(H)
        masks.append(inst.sample_mask.astype(np.float64))
    H = np.hstack(blocks)
    S = np.stack(masks, axis=1)
    # integer-valued float products are exact well below 2**53
    together = np.rint(H @ H.T).astype(np.int64)
    cosample = np.rint(S @ S.T).astype(np.int64)
    return ConsensusMatrix(together, cosample, len(ensemble))


def consensus_cdf(M, grid_points=GRID_POINTS):
    """Empirical CDF of the off-diagonal consensus indices of co-sampled pairs.

    ``area`` is the exact integral of the empirical CDF over [0, 1], which
    equals one minus the mean consensus index.
    """
    if grid_points < 2:
        raise DataError("grid_points must be at least 2")
    iu = np.triu_indices(M.n, 1)
    seen = M.cosample[iu] > 0
    if not seen.any():
        raise DataError("no pair of samples was ever co-sampled")
    vals = np.sort(M.values[iu][seen])
    grid = np.arange(grid_points) / (grid_points - 1)
    cdf = np.searchsorted(vals, grid, side="right") / len(vals)
    return CdfCurve(grid, cdf, float(1.0 - vals.mean()), int(len(vals)))


def delta_areas(curves, ks):
    """Relative change in CDF area from each k to the next searched k."""
    out = {}
    prev = None
    for k in ks:
        area = curves[k].area
        if prev is None:
            out[k] = area
        elif prev > 0:
            out[k] = (area - prev) / prev
        else:
            out[k] = np.inf
        prev = area
    return out


def choose_k(curves, ks, tau=DEFAULT_TAU, flatness_max=DEFAULT_FLATNESS_MAX):
    """Largest k whose delta-area exceeds ``tau``, among k with a flat CDF.

    A k whose CDF rises by more than ``flatness_max`` per unit on
    [0.1, 0.9] has many ambiguous pairs and is not eligible. If no k is
    eligible, the flattest one is returned.
    """
    delta = delta_areas(curves, ks)
    flat = [k for k in ks if curves[k].flatness < flatness_max]
    if not flat:
        return min(ks, key=lambda k: (curves[k].flatness, k)), delta
    rising = [k for k in flat if delta[k] > tau]
    if not rising:
        return min(flat, key=lambda k: (curves[k].flatness, k)), delta
    return max(rising), delta


def select_k(
    base,
    data,
    k_range,
    size=DEFAULT_ENSEMBLE_SIZE,
    resample_fraction=DEFAULT_RESAMPLE_FRACTION,
    feature_fraction=1.0,
    master_seed=0,
    params=None,
    threads=1,
    tau=DEFAULT_TAU,
    flatness_max=DEFAULT_FLATNESS_MAX,
):
    """Build a consensus matrix for every k in ``k_range`` and pick one.

    Each k uses its own seed family ``child_seed(master_seed, k)``.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ConfigError("k_range is empty")
    n = data.n_samples
    if ks[0] < 2 or ks[-1] > n - 1:
        raise ConfigError(f"k_range must lie within [2, {n - 1}], got {ks}")
    curves, matrices = {}, {}
    for k in ks:
        ens = generate_ensemble(
            base, data, k, size, resample_fraction, feature_fraction, child_seed(master_seed, k), params, threads
        )
        matrices[k] = consensus_matrix(ens, n)
        curves[k] = consensus_cdf(matrices[k])
    chosen, delta = choose_k(curves, ks, tau, flatness_max)
    warnings = []
    if len(ks) == 1:
        warnings.append(f"only k={ks[0]} was searched; no comparison between k values was possible")
    if curves[chosen].flatness >= flatness_max:
        warnings.append(f"no searched k has CDF flatness below {flatness_max}; returned the flattest")
    for w in warnings:
        log.warning(w)
    return KSelectionReport(ks, curves, delta, matrices, chosen, tau, flatness_max, warnings)


def consensus_partition(M, k, seed=0):
    """Spectral clustering of the consensus matrix used as an affinity."""
    A = np.array(M.values if isinstance(M, ConsensusMatrix) else M, dtype=np.float64)
    A[np.diag_indices_from(A)] = 0.0
    try:
        return spectral(A, k, seed=seed)
    except DataError as exc:
        raise NumericalError(f"consensus partition failed: {exc}") from exc


def run_consensus(base, data, k, size=DEFAULT_ENSEMBLE_SIZE, resample_fraction=DEFAULT_RESAMPLE_FRACTION,
                  feature_fraction=1.0, master_seed=0, params=None, threads=1):
    """Ensemble, consensus matrix and final partition in one call."""
    ens = generate_ensemble(base, data, k, size, resample_fraction, feature_fraction, master_seed, params, threads)
    M = consensus_matrix(ens, data.n_samples)
    return M, consensus_partition(M, k, seed=child_seed(master_seed, PARTITION_STREAM))

