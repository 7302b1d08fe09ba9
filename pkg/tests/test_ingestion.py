import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from consensus_subtypes.errors import DataError, ParseError
from consensus_subtypes.ingestion import (
    ExpressionMatrix,
    load_expression_matrix,
    merge_views,
    select_by_variance,
    transform,
    write_expression_matrix,
    write_selection_report,
)


@pytest.fixture
def toy_tsv(tmp_path):
    path = tmp_path / "rna.tsv"
    path.write_text("gene\tA\tB\ng1\t1.5\t2\ng2\tNA\t3\ng3\t0\t-1e3\n")
    return path


def test_load_features_as_rows(toy_tsv):
    X = load_expression_matrix(toy_tsv, "features_as_rows")
    assert X.sample_ids == ["A", "B"]
    assert X.feature_ids == ["g1", "g2", "g3"]
    assert X.values.shape == (2, 3)
    assert X.values[1, 2] == -1000.0


def test_na_is_missing_not_zero(toy_tsv):
    X = load_expression_matrix(toy_tsv)
    assert np.isnan(X.values[0, 1])
    assert X.has_missing


def test_load_samples_as_rows_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("sample,f1,f2\ns1,1,2\ns2,3,4\n")
    X = load_expression_matrix(path, "samples_as_rows")
    assert X.sample_ids == ["s1", "s2"]
    np.testing.assert_array_equal(X.values, [[1, 2], [3, 4]])


@pytest.mark.parametrize(
    "text, message, line",
    [
        ("gene\tA\tA\ng1\t1\t2\n", "duplicate ID 'A'", 1),
        ("gene\tA\tB\ng1\t1\t2\ng1\t3\t4\n", "duplicate ID 'g1'", 3),
        ("gene\tA\tB\ng1\t1\n", "expected 3 fields", 2),
        ("gene\tA\tB\ng1\t1\tx\n", "non-numeric cell 'x'", 2),
    ],
)
def test_parse_errors_carry_line(tmp_path, text, message, line):
    path = tmp_path / "bad.tsv"
    path.write_text(text)
    with pytest.raises(ParseError, match=message) as info:
        load_expression_matrix(path)
    assert info.value.line == line


def test_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(4, 5)) * 10.0 ** rng.integers(-8, 8, size=(4, 5))
    values[2, 3] = np.nan
    X = ExpressionMatrix([f"s{i}" for i in range(4)], [f"g{j}" for j in range(5)], values)
    for orientation in ("features_as_rows", "samples_as_rows"):
        path = tmp_path / f"x_{orientation}.tsv"
        write_expression_matrix(X, path, orientation)
        Y = load_expression_matrix(path, orientation)
        assert Y.sample_ids == X.sample_ids and Y.feature_ids == X.feature_ids
        assert np.array_equal(Y.values, X.values, equal_nan=True)


def _mat(samples, features, values, name="v"):
    return ExpressionMatrix(samples, features, np.array(values, dtype=float), name)


def test_merge_intersection_sorted():
    a = _mat(["C", "A", "B"], ["x"], [[1], [2], [3]], "a")
    b = _mat(["D", "B", "C"], ["y"], [[4], [5], [6]], "b")
    vs = merge_views([a, b])
    assert vs.sample_ids == ["B", "C"]
    np.testing.assert_array_equal(vs.views[0].values, [[3], [1]])
    np.testing.assert_array_equal(vs.views[1].values, [[5], [6]])


def test_merge_drops_features_with_missing():
    a = _mat(["A", "B", "C"], ["x", "y"], [[1, np.nan], [2, 1], [3, 2]])
    vs = merge_views([a])
    assert vs.views[0].feature_ids == ["x"]


def test_merge_missing_outside_intersection_kept():
    a = _mat(["A", "B", "C"], ["x", "y"], [[1, np.nan], [2, 1], [3, 2]], "a")
    b = _mat(["B", "C"], ["z"], [[1], [2]], "b")
    vs = merge_views([a, b])
    assert vs.views[0].feature_ids == ["x", "y"]


def test_merge_identity_and_idempotent():
    a = _mat(["A", "B", "C"], ["x", "y"], [[1, 0], [2, 1], [3, 2]])
    once = merge_views([a])
    assert once.views[0].sample_ids == a.sample_ids
    np.testing.assert_array_equal(once.views[0].values, a.values)
    twice = merge_views(once)
    assert twice.sample_ids == once.sample_ids
    np.testing.assert_array_equal(twice.views[0].values, once.views[0].values)


def test_merge_requires_two_shared_samples():
    a = _mat(["A", "B"], ["x"], [[1], [2]], "a")
    b = _mat(["B", "C"], ["x"], [[1], [2]], "b")
    with pytest.raises(DataError, match="share only 1"):
        merge_views([a, b])


def test_select_by_variance_hand_case():
    X = _mat(["s1", "s2"], ["f1", "f2", "f3"], [[0, 0, 0], [4, 2, 0]])
    sel, rep = select_by_variance(X, 1)
    assert sel.feature_ids == ["f1"]
    np.testing.assert_allclose(rep.variances, [8, 2, 0])
    assert rep.variance_explained == pytest.approx(0.8)


def test_select_all_is_identity_up_to_order():
    X = _mat(["s1", "s2", "s3"], ["a", "b"], [[0, 1], [1, 5], [2, 9]])
    sel, rep = select_by_variance(X, 2)
    assert set(sel.feature_ids) == {"a", "b"}
    assert rep.variance_explained == 1.0


def test_select_out_of_range():
    X = _mat(["s1", "s2"], ["a"], [[0], [1]])
    for bad in (0, 2):
        with pytest.raises(DataError):
            select_by_variance(X, bad)


def test_tie_break_lexicographic():
    X = _mat(["s1", "s2"], ["zeta", "alpha"], [[0, 0], [1, 1]])
    sel, _ = select_by_variance(X, 1)
    assert sel.feature_ids == ["alpha"]


def test_all_equal_variance_takes_first_ids():
    X = _mat(["s1", "s2"], ["d", "b", "c", "a"], [[0] * 4, [1] * 4])
    sel, _ = select_by_variance(X, 2)
    assert sel.feature_ids == ["a", "b"]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 8))
def test_selection_invariant_to_column_permutation(seed, n_top):
    rng = np.random.default_rng(seed)
    values = rng.integers(0, 3, size=(5, 8)).astype(float)
    ids = [f"g{j}" for j in range(8)]
    X = _mat([f"s{i}" for i in range(5)], ids, values)
    perm = rng.permutation(8)
    Y = _mat(X.sample_ids, [ids[j] for j in perm], values[:, perm])
    a, ra = select_by_variance(X, n_top)
    b, _ = select_by_variance(Y, n_top)
    assert a.feature_ids == b.feature_ids
    np.testing.assert_array_equal(a.values, b.values)
    kept = ra.variances[ra.kept]
    dropped = ra.variances[~ra.kept]
    if dropped.size:
        assert kept.min() >= dropped.max()
    assert ra.variance_explained == pytest.approx(kept.sum() / ra.variances.sum() if ra.variances.sum() else 1.0)


def test_selection_report_csv(tmp_path):
    X = _mat(["s1", "s2"], ["f1", "f2"], [[0, 0], [4, 2]])
    _, rep = select_by_variance(X, 1)
    path = tmp_path / "sel.csv"
    write_selection_report(rep, path)
    assert path.read_text().splitlines() == ["feature_id,variance,kept", "f1,8.0,1", "f2,2.0,0"]


def test_transform_flags():
    X = _mat(["s1", "s2", "s3"], ["a"], [[0], [1], [3]])
    np.testing.assert_allclose(transform(X, log2=True).values.ravel(), [0, 1, 2])
    z = transform(X, standardize=True).values.ravel()
    assert z.mean() == pytest.approx(0) and z.std(ddof=1) == pytest.approx(1)
