"""Planted-partition generator for multi-view test data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algorithms import ClusterAssignment
from .errors import ConfigError, NumericalError
from .ingestion import ExpressionMatrix, ViewSet

MAX_PLACEMENT_TRIES = 1000


@dataclass
class SyntheticSpec:
    k: int = 4
    n_per_cluster: int = 50
    dims: int = 50
    separation: float = 10.0
    views: int = 1
    noise_views: int = 0
    seed: int = 0

    def validate(self):
        if self.k < 1 or self.n_per_cluster < 1 or self.dims < 1:
            raise ConfigError("k, n_per_cluster and dims must be positive")
        if not self.separation > 0:
            raise ConfigError(f"separation must be positive, got {self.separation}")
        if self.views < 1 or not 0 <= self.noise_views <= self.views:
            raise ConfigError(f"need views >= 1 and 0 <= noise_views <= views, got {self.views}/{self.noise_views}")

    @property
    def n_samples(self):
        return self.k * self.n_per_cluster


def _random_rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


def cluster_centers(k, dims, separation, rng):
    """``k`` centers with every pairwise distance at least ``separation``.

    When ``k <= dims + 1`` the centers are the vertices of a regular simplex
    with edge length ``separation``, randomly rotated; otherwise they are drawn
    at random and rejected until the separation holds.
    """
    if k == 1:
        return np.zeros((1, dims))
    if k <= dims + 1:
        # regular simplex: standard basis in R^k, centered, expressed in k-1 coordinates
        basis = np.eye(k) - 1.0 / k
        _, _, vt = np.linalg.svd(basis)
        coords = basis @ vt[: k - 1].T
        coords *= separation / np.sqrt(2.0)
        padded = np.zeros((k, dims))
        padded[:, : k - 1] = coords
        return padded @ _random_rotation(rng, dims).T
    radius = separation * np.sqrt(k)
    for _ in range(MAX_PLACEMENT_TRIES):
        centers = rng.uniform(-radius, radius, size=(k, dims))
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        if dist[np.triu_indices(k, 1)].min() >= separation:
            return centers
    raise NumericalError(f"could not place {k} centers {separation} apart in {dims} dimensions")


def generate(spec):
    """Draw a ViewSet with planted clusters and return ``(views, labels)``.

    Samples are shuffled so cluster membership is not visible in the row
    order; sample IDs follow the shuffled order. Informative views get their
    own center placement; noise views are isotropic standard normal.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n = spec.n_samples
    labels = np.repeat(np.arange(spec.k), spec.n_per_cluster)
    labels = labels[rng.permutation(n)]
    width = len(str(n - 1))
    sample_ids = [f"S{i:0{width}d}" for i in range(n)]
    fwidth = len(str(spec.dims - 1))

    views = []
    n_informative = spec.views - spec.noise_views
    for v in range(spec.views):
        noise = rng.normal(size=(n, spec.dims))
        if v < n_informative:
            centers = cluster_centers(spec.k, spec.dims, spec.separation, rng)
            values = centers[labels] + noise
            name = f"view{v + 1}"
        else:
            values = noise
            name = f"noise{v - n_informative + 1}"
        features = [f"{name}_f{j:0{fwidth}d}" for j in range(spec.dims)]
        views.append(ExpressionMatrix(sample_ids, features, values, name))
    return ViewSet(views), ClusterAssignment(labels, spec.k)
