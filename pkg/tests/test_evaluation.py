import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voicewell.errors import TooFewSubjects
from voicewell.evaluation import (
    Dataset,
    EvalResult,
    ccc,
    cross_validate,
    make_folds,
    permutation_p,
    permute_labels,
    read_predictions,
    select_on_rows,
    stars,
    table3_rows,
    write_results,
)
from voicewell.model import Hyperparams
from voicewell.selection import MEASUREMENTS, pearson, select_top_n

import oracles


def test_ccc_examples():
    assert ccc([1, 2, 3], [2, 3, 4]) == pytest.approx(4 / 7, abs=1e-12)
    assert ccc([1, 2, 3], [1, 2, 3]) == 1.0
    assert ccc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    assert ccc([1, 1, 1], [1, 1, 1]) == 0.0


finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=30))
@settings(max_examples=300)
def test_ccc_bounded_by_pearson(pairs):
    x = np.array([p[0] for p in pairs])
    y = np.array([p[1] for p in pairs])
    c = ccc(x, y)
    assert abs(c) <= abs(pearson(x, y)) + 1e-9
    assert c == pytest.approx(oracles.ccc(x, y), abs=1e-9)


@given(st.integers(0, 10_000), st.floats(0.1, 10), st.floats(-5, 5))
@settings(max_examples=100)
def test_ccc_shared_affine_invariance(seed, scale, shift):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=20), rng.normal(size=20)
    assert ccc(scale * x + shift, scale * y + shift) == pytest.approx(ccc(x, y), abs=1e-9)


def test_permutation_p_floor_and_minimum():
    x = np.arange(12.0)
    assert permutation_p(x, x, 10_000, seed=0) == pytest.approx(1 / 10_001)
    with pytest.raises(ValueError):
        permutation_p(x, x, 999)


def test_permutation_p_null_calibration():
    ps = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        ps.append(permutation_p(rng.normal(size=30), rng.normal(size=30), 1000, seed=seed))
    ps = np.array(ps)
    assert np.mean(ps > 0.05) >= 0.9
    assert 0.3 < np.median(ps) < 0.7


def test_stars():
    assert [stars(p) for p in (0.5, 0.01, 0.0099, 1e-5, 9e-6)] == ["", "", "*", "*", "**"]


@pytest.mark.parametrize("n_subjects", [10, 11, 37])
def test_folds_partition_subjects(n_subjects):
    subjects = [f"S{i:03d}" for i in range(n_subjects) for _ in range(3)]
    plan = make_folds(subjects, 5, seed=1)
    sizes = [len(plan.subjects_in(f)) for f in range(5)]
    assert sum(sizes) == n_subjects and max(sizes) - min(sizes) <= 1
    assert make_folds(subjects, 5, seed=1) == plan
    assert make_folds(list(reversed(subjects)), 5, seed=1) == plan


def test_too_few_subjects():
    with pytest.raises(TooFewSubjects):
        make_folds(["a", "b", "c", "d"], 5)


def _planted(n_subjects=15, sessions=4, n_feat=30, seed=0):
    rng = np.random.default_rng(seed)
    subjects = [f"S{i:02d}" for i in range(n_subjects) for _ in range(sessions)]
    n = len(subjects)
    X = rng.normal(size=(n, n_feat))
    scores = {}
    for k, m in enumerate(MEASUREMENTS):
        scores[m] = 10 + 3 * X[:, k] + 0.1 * rng.normal(size=n)
    return Dataset(tuple(f"f{i:02d}" for i in range(n_feat)), X, subjects, [j % sessions for j in range(n)], scores)


FAST = Hyperparams(lr=3e-3, dropout=0.0, l2_lambda=0.0, epochs=150, hidden=(16,))


def test_cross_validate_recovers_planted_signal():
    ds = _planted()
    r = cross_validate(ds, "PSQI", n_select=5, hyperparams=FAST, n_perm=1000)
    assert r.n_sessions == 60 and len(r.pairs) == 60 and len(r.fold_ccc) == 5
    assert r.ccc > 0.8 and r.p_value < 0.01
    again = cross_validate(ds, "PSQI", n_select=5, hyperparams=FAST, n_perm=1000)
    assert again.pairs == r.pairs and again.p_value == r.p_value
    ctrl = cross_validate(permute_labels(ds, 3), "PSQI", n_select=5, hyperparams=FAST, n_perm=1000)
    assert abs(ctrl.ccc) < 0.4


def test_selection_ignores_held_out_rows():
    ds = _planted()
    y = ds.scores["STAI"]
    plan = make_folds(ds.subject_ids, 5, seed=42)
    train = np.array([plan.fold_of(s) != 0 for s in ds.subject_ids])
    withheld = select_top_n(ds.X[train], y[train], 10, ds.names)
    X2 = ds.X.copy()
    X2[~train] = 1e6 * np.random.default_rng(0).normal(size=X2[~train].shape)
    y2 = y.copy()
    y2[~train] = -y2[~train]
    assert select_on_rows(X2, y2, np.flatnonzero(train), 10, ds.names) == withheld


def _result(m, src, c, p):
    return EvalResult(m, src, c, c, p, 3, [(1.0, 1.5), (2.0, 2.5), (3.0, 2.0)])


def test_table3_layout_and_files(tmp_path):
    srcs = ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "concatenated"]
    results = [_result(m, s, 0.5, [0.5, 5e-3, 5e-6][i % 3]) for m in MEASUREMENTS for i, s in enumerate(srcs)]
    rows = table3_rows(results)
    assert len(rows) == 5 and all(len(r) == 10 for r in rows)
    assert rows[0][2:] == ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "Concatenated"]
    assert rows[1][2:5] == ["0.500", "0.500*", "0.500**"]
    write_results(results, tmp_path)
    back = read_predictions(tmp_path / "predictions.csv")
    assert back[("GAD7", "Q3")] == [(1.0, 1.5), (2.0, 2.5), (3.0, 2.0)]
    assert (tmp_path / "results.json").exists()


def test_table3_only_lists_computed_measurements():
    rows = table3_rows([_result("PSQI", "concatenated", 0.7, 0.5)])
    assert [r[0] for r in rows[1:]] == ["PSQI"]
    assert rows[1][-1] == "0.700" and rows[1][2] == ""
