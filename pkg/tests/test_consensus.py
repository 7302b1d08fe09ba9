import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_subtypes.algorithms import ClusterAssignment, kmeans
from consensus_subtypes.consensus import (
    BaseParams,
    ConsensusMatrix,
    EnsembleInstance,
    child_seed,
    consensus_cdf,
    consensus_matrix,
    consensus_partition,
    delta_areas,
    generate_ensemble,
    run_consensus,
    select_k,
)
from consensus_subtypes.errors import ConfigError, DataError
from consensus_subtypes.metrics import adjusted_rand_index
from consensus_subtypes.synthetic import SyntheticSpec, generate
from oracles import recount_consensus


def _instance(mask, labels):
    mask = np.asarray(mask, dtype=bool)
    return EnsembleInstance(mask, ClusterAssignment(labels), seed=0, resample_fraction=mask.mean())


def _random_ensemble(rng, n, b):
    masks, labelings, ens = [], [], []
    for _ in range(b):
        mask = np.zeros(n, dtype=bool)
        mask[rng.choice(n, int(round(0.8 * n)), replace=False)] = True
        k = int(rng.integers(1, min(3, mask.sum()) + 1))
        labels = np.concatenate([np.arange(k), rng.integers(0, k, mask.sum() - k)])
        rng.shuffle(labels)
        inst = _instance(mask, labels)
        full = [None] * n
        for i, lab in zip(inst.indices, inst.labels.labels):
            full[i] = int(lab)
        masks.append(mask.tolist())
        labelings.append(full)
        ens.append(inst)
    return ens, masks, labelings


def test_single_full_instance():
    M = consensus_matrix([_instance([1, 1, 1], [0, 0, 1])])
    np.testing.assert_array_equal(M.values, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])


def test_pair_half():
    ens = [_instance([1, 1, 1], [0, 0, 1]), _instance([1, 1, 1], [0, 1, 1])]
    M = consensus_matrix(ens)
    assert M.values[0, 1] == 0.5
    assert M.cosample[0, 1] == 2 and M.together[0, 1] == 1


def test_never_cosampled_flag():
    ens = [_instance([1, 1, 0], [0, 0]), _instance([1, 0, 1], [0, 1])]
    M = consensus_matrix(ens)
    assert M.never_cosampled[1, 2] and M.values[1, 2] == 0.0
    assert M.values[2, 2] == 1.0


def test_matches_recount_oracle():
    rng = np.random.default_rng(0)
    ens, masks, labelings = _random_ensemble(rng, 12, 50)
    M = consensus_matrix(ens)
    together, cosample = recount_consensus(masks, labelings)
    np.testing.assert_array_equal(M.together, together)
    np.testing.assert_array_equal(M.cosample, cosample)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_together_bounded_and_symmetric(seed):
    rng = np.random.default_rng(seed)
    ens, _, _ = _random_ensemble(rng, int(rng.integers(3, 15)), int(rng.integers(1, 20)))
    M = consensus_matrix(ens)
    assert np.all(M.together <= M.cosample)
    np.testing.assert_array_equal(M.values, M.values.T)
    cdf = consensus_cdf(M).cdf
    assert np.all(np.diff(cdf) >= 0) and cdf[-1] == 1.0


def test_identical_clusterings_binary():
    ens = [_instance([1] * 6, [0, 1, 0, 2, 1, 2]) for _ in range(7)]
    vals = consensus_matrix(ens).values
    assert set(np.unique(vals)) == {0.0, 1.0}


def test_cdf_perfect_two_by_two():
    M = consensus_matrix([_instance([1] * 4, [0, 0, 1, 1])])
    curve = consensus_cdf(M)
    assert curve.n_pairs == 6
    np.testing.assert_allclose(curve.cdf[:-1], 4 / 6)
    assert curve.cdf[-1] == 1.0
    assert curve.flatness == 0.0
    assert curve.area == pytest.approx(4 / 6)


def test_cdf_all_ones():
    M = consensus_matrix([_instance([1] * 4, [0, 0, 0, 0])])
    curve = consensus_cdf(M)
    assert np.all(curve.cdf[:-1] == 0) and curve.cdf[-1] == 1.0


def test_cdf_grid_anchors():
    M = consensus_matrix([_instance([1] * 4, [0, 0, 1, 1])])
    grid = consensus_cdf(M).grid
    assert len(grid) == 101 and 0.1 in grid and 0.9 in grid


def test_cdf_no_pairs():
    M = ConsensusMatrix(np.eye(3, dtype=int), np.eye(3, dtype=int), 1)
    with pytest.raises(DataError):
        consensus_cdf(M)


def test_delta_areas_relative():
    class C:
        def __init__(self, area):
            self.area = area

    d = delta_areas({2: C(0.5), 3: C(0.6), 4: C(0.6)}, [2, 3, 4])
    assert d == {2: 0.5, 3: pytest.approx(0.2), 4: 0.0}


def test_child_seed_stable():
    assert child_seed(7, 3) == child_seed(7, 3)
    assert len({child_seed(7, b) for b in range(100)}) == 100


@pytest.fixture(scope="module")
def planted4():
    return generate(SyntheticSpec(k=4, n_per_cluster=25, dims=20, separation=10, seed=3))


def test_mask_size(planted4):
    views, _ = planted4
    ens = generate_ensemble("kmeans", views, 4, size=10, resample_fraction=0.8, params=BaseParams(n_init=1))
    assert all(inst.sample_mask.sum() == 80 for inst in ens)
    assert all(len(inst.labels) == 80 for inst in ens)


def test_size_one_full_is_plain_kmeans(planted4):
    views, _ = planted4
    ens = generate_ensemble("kmeans", views, 4, size=1, resample_fraction=1.0, master_seed=5, params=BaseParams(n_init=1))
    plain = kmeans(views.concatenated(), 4, seed=ens[0].algo_seed, n_init=1)
    assert ens[0].labels == plain.assignment


def test_ensemble_thread_determinism(planted4):
    views, _ = planted4
    for base in ("kmeans", "hierarchical", "snf"):
        a = generate_ensemble(base, views, 4, size=12, master_seed=9, params=BaseParams(n_init=1), threads=1)
        b = generate_ensemble(base, views, 4, size=12, master_seed=9, params=BaseParams(n_init=1), threads=8)
        for x, y in zip(a, b):
            assert x.seed == y.seed
            np.testing.assert_array_equal(x.sample_mask, y.sample_mask)
            assert x.labels == y.labels


def test_feature_subsets(planted4):
    views, _ = planted4
    ens = generate_ensemble("hierarchical", views, 4, size=3, feature_fraction=0.5)
    assert all(len(inst.features[0]) == 10 for inst in ens)


def test_ensemble_errors(planted4):
    views, _ = planted4
    with pytest.raises(ConfigError):
        generate_ensemble("kmeans", views, 4, size=0)
    with pytest.raises(ConfigError):
        generate_ensemble("kmeans", views, 90, size=1, resample_fraction=0.5)
    with pytest.raises(ConfigError):
        generate_ensemble("dbscan", views, 4, size=1)


def test_partition_blocks():
    labels = np.repeat([0, 1, 2], [3, 4, 2])
    M = (labels[:, None] == labels[None, :]).astype(float)
    assert adjusted_rand_index(consensus_partition(M, 3), labels) == 1.0
    assert consensus_partition(M, 1).labels.tolist() == [0] * 9


def test_run_consensus_recovers(planted4):
    views, truth = planted4
    M, part = run_consensus("kmeans", views, 4, size=50, params=BaseParams(n_init=1))
    assert adjusted_rand_index(part, truth) == 1.0
    same = truth.labels[:, None] == truth.labels[None, :]
    assert M.values[same].min() > 0.95 and M.values[~same].max() < 0.05


def test_select_k_planted_four(planted4):
    views, _ = planted4
    rep = select_k("kmeans", views, range(2, 7), size=50, params=BaseParams(n_init=1))
    assert rep.chosen_k == 4
    assert rep.curves[4].flatness < 0.1
    assert "chosen k = 4" in rep.summary()


def test_select_k_planted_two():
    views, _ = generate(SyntheticSpec(k=2, n_per_cluster=25, dims=20, separation=10, seed=4))
    rep = select_k("kmeans", views, range(2, 7), size=50, params=BaseParams(n_init=1))
    assert rep.chosen_k == 2


def test_select_k_single_value_warns(planted4):
    views, _ = planted4
    rep = select_k("kmeans", views, [2], size=5, params=BaseParams(n_init=1))
    assert rep.chosen_k == 2
    assert any("no comparison" in w for w in rep.warnings)


def test_select_k_range_checks(planted4):
    views, _ = planted4
    with pytest.raises(ConfigError):
        select_k("kmeans", views, [], size=5)
    with pytest.raises(ConfigError):
        select_k("kmeans", views, [1, 2], size=5)
