"""Acceptance criteria, one test each; every test prints a PASS/FAIL line with its pinned tolerance.

Criteria 8-10 build synthetic corpora through the command-line interface (about 30 min on one CPU).
"""

import csv
import json
import time

import numpy as np
import pytest
from scipy.linalg import toeplitz

from voicewell.acoustic import levinson_durbin, mel_energies, mel_filterbank, track_pitch
from voicewell.cli import main
from voicewell.evaluation import ccc, make_folds, select_on_rows
from voicewell.features import CONCATENATED_DIM, READ_DIM, SPONTANEOUS_DIM
from voicewell.functionals import FUNCTIONAL_NAMES, column_functionals
from voicewell.model import Adam, gradient_check
from voicewell.selection import MEASUREMENTS, pearson, select_top_n
from voicewell.signal_io import frame

import oracles
from conftest import pulse_harmonics, sawtooth, tone, wave

# pinned tolerances
FUNCTIONAL_REL_TOL = 1e-9
F0_REL_TOL = 0.01
LEVINSON_RESIDUAL = 1e-8
GRADIENT_REL_TOL = 1e-4
ADAM_TARGET, ADAM_TOL = 0.9999, 1e-6
CCC_EXAMPLE_TOL = 1e-12
E2E_MIN_CCC = 0.8
CONTROL_BAND = 0.15
E2E_RUNTIME_S = 600.0


@pytest.fixture
def verdict(capsys):
    def emit(criterion, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def test_01_feature_dimensions(verdict):
    dims = (READ_DIM, SPONTANEOUS_DIM, CONCATENATED_DIM)
    verdict(1, dims == (2357, 2364, 16506), f"read/spontaneous/concatenated dims {dims}, expected (2357, 2364, 16506) exactly")


def test_02_functionals_match_oracle(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    bad = []
    for i in range(1000):
        col = oracles.random_column(rng, int(rng.integers(3, 1001)))
        got = column_functionals(col)[:, 0]
        for name, g, w in zip(FUNCTIONAL_NAMES, got, oracles.functionals(col)):
            err = abs(g - w) / max(abs(w), 1e-3)
            worst = max(worst, err)
            if not np.isclose(g, w, rtol=FUNCTIONAL_REL_TOL, atol=1e-12):
                bad.append((i, name, g, w))
    verdict(2, not bad, f"1000 random columns, {len(bad)} mismatches, worst scaled error {worst:.2e} (tol rel {FUNCTIONAL_REL_TOL})")


def test_03_signal_primitives(verdict):
    problems = []
    for f0_true in (100, 150, 200, 250, 350):
        for make in (sawtooth, pulse_harmonics):
            f0 = track_pitch(frame(wave(make(f0_true, 1.0)))).f0_hz
            voiced = f0 > 0
            share = np.mean(np.abs(f0[voiced] - f0_true) <= F0_REL_TOL * f0_true) if voiced.any() else 0.0
            if voiced.mean() < 0.9 or share < 0.95:
                problems.append(f"{make.__name__} {f0_true} Hz: voiced {voiced.mean():.2f}, within tol {share:.2f}")
    fs = frame(wave(tone(1000, 0.3)))
    _, centers = mel_filterbank()
    expected = int(np.argmin(np.abs(centers - 1000)))
    if not np.all(np.argmax(mel_energies(fs), axis=1) == expected):
        problems.append("1 kHz tone peaks outside the filter centred nearest 1 kHz")
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        x = rng.normal(size=400)
        order = int(rng.integers(1, 17))
        r = np.array([x[: len(x) - k] @ x[k:] for k in range(order + 1)]) / len(x)
        a, _ = levinson_durbin(r, order)
        worst = max(worst, float(np.linalg.norm(toeplitz(r[:order]) @ a[1:] + r[1 : order + 1])))
    if worst > LEVINSON_RESIDUAL:
        problems.append(f"Levinson residual {worst:.1e}")
    verdict(
        3,
        not problems,
        f"f0 within {F0_REL_TOL:.0%} at 100/150/200/250/350 Hz, 1 kHz mel peak filter {expected}, "
        f"Levinson residual {worst:.1e} <= {LEVINSON_RESIDUAL}" + (f"; problems: {problems}" if problems else ""),
    )


def test_04_gradient_check(verdict):
    worst = max(
        gradient_check(sizes, l2_lambda=l2, seed=seed)
        for sizes in ((6, 5, 4, 1), (3, 8, 1))
        for l2 in (0.0, 1e-3)
        for seed in range(3)
    )
    verdict(4, worst <= GRADIENT_REL_TOL, f"max relative backprop vs central-difference error {worst:.2e} <= {GRADIENT_REL_TOL}")


def test_05_adam_step(verdict):
    w = np.array([1.0])
    Adam(w, lr=1e-4).step(2.0 * w)
    verdict(5, abs(w[0] - ADAM_TARGET) <= ADAM_TOL, f"one step on w^2 from w=1 gives {w[0]:.10f}, expected {ADAM_TARGET} +- {ADAM_TOL}")


def test_06_ccc(verdict):
    example = ccc([1, 2, 3], [2, 3, 4])
    rng = np.random.default_rng(6)
    violations = 0
    for _ in range(10_000):
        n = int(rng.integers(2, 40))
        x = rng.normal(rng.normal(0, 3), rng.uniform(0.1, 5), n)
        y = rng.uniform(-1, 1) * x + rng.normal(rng.normal(0, 3), rng.uniform(0.1, 5), n)
        violations += abs(ccc(x, y)) > abs(pearson(x, y)) + 1e-12
    ok = (
        abs(example - 4 / 7) <= CCC_EXAMPLE_TOL
        and ccc([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0, abs=CCC_EXAMPLE_TOL)
        and ccc([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=CCC_EXAMPLE_TOL)
        and violations == 0
    )
    verdict(6, ok, f"CCC([1,2,3],[2,3,4]) = {example:.15f} (4/7 +- {CCC_EXAMPLE_TOL}), identity 1, reversal -1, |CCC| <= |r| violations {violations}/10000")


def test_07_subject_independence(verdict):
    rng = np.random.default_rng(7)
    leaks = 0
    for seed in range(100):
        subjects = [f"S{i:03d}" for i in range(int(rng.integers(5, 60))) for _ in range(int(rng.integers(1, 6)))]
        plan = make_folds(subjects, 5, seed)
        folds_per_subject = {}
        for s in subjects:
            folds_per_subject.setdefault(s, set()).add(plan.fold_of(s))
        leaks += sum(len(f) > 1 for f in folds_per_subject.values())
        leaks += sum(len(plan.subjects_in(f)) == 0 for f in range(5))
    subjects = [f"S{i:02d}" for i in range(12) for _ in range(4)]
    X = rng.normal(size=(48, 40))
    y = X[:, 0] + rng.normal(size=48)
    plan = make_folds(subjects, 5, 42)
    equal = True
    for f in range(5):
        train = np.array([plan.fold_of(s) != f for s in subjects])
        withheld = select_top_n(X[train], y[train], 10)
        X_masked, y_masked = X.copy(), y.copy()
        X_masked[~train] = rng.normal(size=X_masked[~train].shape) * 1e3
        y_masked[~train] = 1e3 * X_masked[~train, 5]
        equal &= select_on_rows(X_masked, y_masked, np.flatnonzero(train), 10) == withheld
    verdict(7, leaks == 0 and equal, f"100 seeded fold plans with {leaks} subject leaks or empty folds; selection mask identical with test rows withheld vs present-but-masked: {equal}")


# --- synthetic end to end ------------------------------------------------------------


def _run_pipeline(root):
    """synth -> extract -> concatenated CV, timed; returns the cv argument prefix and seconds taken."""
    corpus, feats = root / "corpus", root / "features"
    manifest = str(corpus / "manifest.json")
    start = time.perf_counter()
    assert main(["synth", "--out", str(corpus), "--subjects", "30", "--sessions", "5", "--seed", "42", "--noise", "0.2"]) == 0
    assert main(["extract", "--manifest", manifest, "--out", str(feats), "--format", "npz"]) == 0
    cv = ["cv", "--manifest", manifest, "--features", str(feats), "--n-select", "88", "--seed", "42"]
    assert main(cv + ["--source", "concatenated", "--out", str(root / "main")]) == 0
    return cv, time.perf_counter() - start


@pytest.fixture(scope="module")
def e2e(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e_a")
    cv, runtime = _run_pipeline(root)
    assert main(cv + ["--source", "concatenated", "--shuffle-labels", "--out", str(root / "control")]) == 0
    return {"root": root, "cv": cv, "runtime": runtime}


def _cccs(path):
    return {r["measurement"]: r["ccc"] for r in json.loads((path / "results.json").read_text())}


@pytest.mark.slow
def test_08_synthetic_end_to_end(e2e, verdict):
    got = _cccs(e2e["root"] / "main")
    control = _cccs(e2e["root"] / "control")
    ok = all(got[m] >= E2E_MIN_CCC for m in MEASUREMENTS) and all(abs(control[m]) <= CONTROL_BAND for m in MEASUREMENTS)
    fmt = ", ".join(f"{m} {got[m]:.3f}" for m in MEASUREMENTS)
    ctrl = ", ".join(f"{m} {control[m]:+.3f}" for m in MEASUREMENTS)
    verdict(8, ok, f"pooled CCC {fmt} (each >= {E2E_MIN_CCC}); shuffled-label control {ctrl} (each within +-{CONTROL_BAND})")


@pytest.mark.slow
def test_08_runtime(e2e, verdict):
    t = e2e["runtime"]
    verdict("8 (runtime)", t < E2E_RUNTIME_S, f"synth + extract + 4-measurement CV took {t:.0f} s (target < {E2E_RUNTIME_S:.0f} s)")


@pytest.fixture(scope="module")
def tables(e2e, tmp_path_factory):
    """Full table from the first run and from a second run rebuilt from scratch with the same seed."""
    second = tmp_path_factory.mktemp("e2e_b")
    cv_b, _ = _run_pipeline(second)
    out = []
    for root, cv in ((e2e["root"], e2e["cv"]), (second, cv_b)):
        assert main(cv + ["--out", str(root / "table")]) == 0
        out.append(root / "table" / "table3.csv")
    return out


@pytest.mark.slow
def test_09_table_is_reproducible(tables, verdict):
    a, b = (p.read_bytes() for p in tables)
    verdict(9, a == b, f"two full runs (synth, extract, cv) with seed 42 give byte-identical table3.csv ({len(a)} bytes each)")


@pytest.mark.slow
def test_10_table_layout(tables, verdict):
    rows = list(csv.reader(tables[0].open(newline="")))
    header, body = rows[0], rows[1:]
    sources = header[2:]
    cells = [c for r in body for c in r[2:]]
    results = json.loads((tables[0].parent / "results.json").read_text())
    p = {(r["measurement"], r["source"]): r["p_value"] for r in results}
    star_ok = all(
        c.endswith("**") == (p[(r[0], s)] < 1e-5) and c.endswith("*") == (p[(r[0], s)] < 1e-2)
        for r in body
        for s, c in zip(["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "concatenated"], r[2:])
    )
    ok = (
        [r[0] for r in body] == list(MEASUREMENTS)
        and sources == ["Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "Concatenated"]
        and all(len(r) == len(header) for r in body)
        and all(c for c in cells)
        and star_ok
    )
    verdict(10, ok, f"{len(body)} measurement rows x {len(sources)} source columns; '*' iff p < 1e-2, '**' iff p < 1e-5: {star_ok}")
