import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voicewell.errors import LengthMismatch, NTooLarge, TooFewRows
from voicewell.selection import SelectionMask, correlations, pearson, select_top_n


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert pearson([1, 1, 1], [1, 2, 3]) == 0.0
    # centered sums: sxy = 4, sxx = syy = 5
    assert pearson([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)


def test_pearson_errors():
    with pytest.raises(LengthMismatch):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(LengthMismatch):
        pearson([1], [1])


@given(st.integers(0, 10_000))
@settings(max_examples=50)
def test_correlations_match_numpy(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, 5)) * rng.uniform(0.1, 100, 5)
    y = rng.standard_normal(12)
    expected = [np.corrcoef(X[:, j], y)[0, 1] for j in range(5)]
    np.testing.assert_allclose(correlations(X, y), expected, atol=1e-12)
    assert np.all(np.abs(correlations(X, y)) <= 1.0)


def test_planted_features_are_found(rng):
    n = 200
    y = rng.standard_normal(n)
    X = rng.standard_normal((n, 50))
    planted = [3, 11, 20, 37, 44]
    for j in planted:
        X[:, j] = y + 0.5 * rng.standard_normal(n)
    X[:, 7] = 5.0
    names = [f"f{j:02d}" for j in range(50)]
    mask = select_top_n(X, y, 10, names)
    assert {f"f{j:02d}" for j in planted} <= set(mask.kept_names)
    full = select_top_n(X, y, 50, names)
    assert full.kept_names[-1] == "f07"
    assert full.correlations[-1] == 0.0


def test_ties_break_on_name():
    y = np.array([1.0, 2.0, 3.0, 4.0])
    X = np.column_stack([y, y, -y])
    assert select_top_n(X, y, 3, ["c", "a", "b"]).kept_names == ("a", "b", "c")


def test_determinism_and_round_trip(tmp_path, rng):
    X = rng.standard_normal((30, 20))
    y = rng.standard_normal(30)
    a = select_top_n(X, y, 5, measurement="STAI", source="Q1")
    assert a == select_top_n(X.copy(), y.copy(), 5, measurement="STAI", source="Q1")
    a.save(tmp_path / "m.json")
    assert SelectionMask.load(tmp_path / "m.json") == a
    np.testing.assert_array_equal(a.apply([f"f{i}" for i in range(20)], X), X[:, a.indices([f"f{i}" for i in range(20)])])


def test_selection_errors(rng):
    X = rng.standard_normal((5, 4))
    with pytest.raises(NTooLarge):
        select_top_n(X, rng.standard_normal(5), 5)
    with pytest.raises(NTooLarge):
        select_top_n(X, rng.standard_normal(5), 0)
    with pytest.raises(TooFewRows):
        select_top_n(X[:1], [1.0], 1)
    with pytest.raises(LengthMismatch):
        select_top_n(X, rng.standard_normal(4), 2)
