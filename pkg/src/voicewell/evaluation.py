"""Subject-independent cross-validation and agreement metrics."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, TooFewSubjects
from .model import Hyperparams, train
from .selection import MEASUREMENTS, SelectionMask, pearson, select_top_n

K_FOLDS = 5
MIN_PERMUTATIONS = 1000
DEFAULT_PERMUTATIONS = 100_000
STAR_LEVELS = ((1e-5, "**"), (1e-2, "*"))
SOURCES = ("Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "concatenated")
SCORE_RANGES = {"STAI": (20, 80), "GAD7": (0, 21), "PSQI": (0, 21), "PANAS": (10, 50)}


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} and {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least two points")
    return x, y


def ccc(x, y) -> float:
    """Lin's concordance correlation coefficient with population moments."""
    x, y = _pair(x, y)
    return float(_ccc_rows(x[None, :], y)[0])


def _ccc_rows(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """CCC of each row of ``X`` against ``y``."""
    mx = X.mean(axis=1)
    my = y.mean()
    Xc = X - mx[:, None]
    yc = y - my
    n = X.shape[1]
    vx = np.einsum("ij,ij->i", Xc, Xc) / n
    vy = yc @ yc / n
    cov = Xc @ yc / n
    denom = vx + vy + (mx - my) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(denom > 0, 2.0 * cov / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(out, -1.0, 1.0)


def permutation_p(x, y, n_perm: int = DEFAULT_PERMUTATIONS, seed: int = 0, chunk: int = 2000) -> float:
    """Two-sided permutation p-value of |CCC|: (1 + #{|CCC_perm| >= |CCC_obs|}) / (n_perm + 1)."""
    x, y = _pair(x, y)
    if n_perm < MIN_PERMUTATIONS:
        raise ValueError(f"n_perm must be at least {MIN_PERMUTATIONS}")
    observed = abs(ccc(x, y)) - 1e-12
    rng = np.random.default_rng(seed)
    base = np.broadcast_to(np.arange(len(y)), (min(chunk, n_perm), len(y)))
    hits = 0
    done = 0
    while done < n_perm:
        b = min(chunk, n_perm - done)
        idx = rng.permuted(base[:b], axis=1)
        hits += int(np.count_nonzero(np.abs(_ccc_rows(x[idx], y)) >= observed))
        done += b
    return (1 + hits) / (n_perm + 1)


def stars(p: float) -> str:
    for level, mark in STAR_LEVELS:
        if p < level:
            return mark
    return ""


# --------------------------------------------------------------------------
# folds


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: dict[str, int]
    seed: int

    def fold_of(self, subject_id: str) -> int:
        return self.assignments[subject_id]

    def subjects_in(self, fold: int) -> list[str]:
        return sorted(s for s, f in self.assignments.items() if f == fold)


def make_folds(subjects, k: int = K_FOLDS, seed: int = 0) -> FoldPlan:
    """Seeded shuffle of the distinct subject ids, then round-robin assignment."""
    unique = sorted(set(subjects))
    if len(unique) < k:
        raise TooFewSubjects(f"{len(unique)} subjects for {k} folds")
    order = np.random.default_rng(seed).permutation(len(unique))
    return FoldPlan(k, {unique[j]: pos % k for pos, j in enumerate(order)}, seed)


# --------------------------------------------------------------------------
# datasets and cross-validation


@dataclass
class Dataset:
    """Sessions (rows) with one feature source and the four consolidated scores."""

    names: tuple[str, ...]
    X: np.ndarray
    subject_ids: list[str]
    session_indices: list[int]
    scores: dict[str, np.ndarray]

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        n = self.X.shape[0]
        if len(self.subject_ids) != n or len(self.session_indices) != n:
            raise LengthMismatch("row metadata does not match feature rows")
        for m, v in self.scores.items():
            if len(v) != n:
                raise LengthMismatch(f"{m}: {len(v)} scores for {n} rows")

    @property
    def n_sessions(self) -> int:
        return self.X.shape[0]


def build_dataset(table, scores_by_key: dict[tuple[str, int], dict[str, float]]) -> Dataset:
    """Join a feature table with manifest scores on (subject_id, session_index)."""
    keys = table.keys()
    keep = [i for i, key in enumerate(keys) if key in scores_by_key]
    scores = {
        m: np.array([float(scores_by_key[keys[i]][m]) for i in keep], dtype=np.float64) for m in MEASUREMENTS
    }
    return Dataset(
        tuple(table.names),
        table.values[keep],
        [table.subject_ids[i] for i in keep],
        [table.session_indices[i] for i in keep],
        scores,
    )


def permute_labels(ds: Dataset, seed: int) -> Dataset:
    """Null-control copy: every measurement's scores shuffled across sessions."""
    rng = np.random.default_rng(seed)
    scores = {m: v[rng.permutation(len(v))] for m, v in ds.scores.items()}
    return Dataset(ds.names, ds.X, list(ds.subject_ids), list(ds.session_indices), scores)


@dataclass
class EvalResult:
    measurement: str
    source: str
    ccc: float
    pearson: float
    p_value: float
    n_sessions: int
    pairs: list[tuple[float, float]] = field(default_factory=list, repr=False)
    fold_ccc: list[float] = field(default_factory=list)

    @property
    def stars(self) -> str:
        return stars(self.p_value)

    def to_dict(self) -> dict:
        return {
            "measurement": self.measurement,
            "source": self.source,
            "ccc": self.ccc,
            "pearson": self.pearson,
            "p_value": self.p_value,
            "stars": self.stars,
            "n_sessions": self.n_sessions,
            "fold_ccc": self.fold_ccc,
        }


def select_on_rows(X, y, rows, n: int, names=None, measurement: str = "", source: str = "") -> SelectionMask:
    """Selection fitted on ``rows`` only; other rows may be present but never looked at."""
    rows = np.asarray(rows)
    return select_top_n(np.asarray(X)[rows], np.asarray(y)[rows], n, names, measurement, source)


def _fit_fold(job) -> np.ndarray:
    X_train, y_train, X_test, names, n_select, hyperparams, seed, measurement, source = job
    mask = select_top_n(X_train, y_train, n_select, names, measurement, source)
    cols = mask.indices(names)
    model, _ = train(X_train[:, cols], y_train, hyperparams, seed, mask.kept_names)
    return model.predict(X_test[:, cols])


def cross_validate(
    ds: Dataset,
    measurement: str,
    source: str = "concatenated",
    n_select: int = 88,
    hyperparams: Hyperparams = Hyperparams(),
    seed: int = 42,
    k: int = K_FOLDS,
    n_perm: int = DEFAULT_PERMUTATIONS,
    fold_averaged: bool = False,
    clip_predictions: bool = False,
    map_fn=map,
) -> EvalResult:
    """Per fold: select features and fit the standardizer/model on training
    sessions, predict the held-out subjects; metrics on the pooled pairs.

    ``map_fn`` may be an executor's ``map`` to train folds in parallel; fold
    seeds are fixed up front so the result does not depend on scheduling.
    """
    y = ds.scores[measurement]
    plan = make_folds(ds.subject_ids, k, seed)
    fold = np.array([plan.fold_of(s) for s in ds.subject_ids])
    jobs, tests = [], []
    for f in range(k):
        test = fold == f
        train_rows = ~test
        train_subjects = {s for s, t in zip(ds.subject_ids, train_rows) if t}
        test_subjects = {s for s, t in zip(ds.subject_ids, test) if t}
        assert not train_subjects & test_subjects, "subject leaked across folds"
        if not test.any():
            continue
        # only training rows reach selection and the standardizer
        jobs.append(
            (ds.X[train_rows], y[train_rows], ds.X[test], ds.names, n_select, hyperparams, seed + f, measurement, source)
        )
        tests.append(test)

    pred = np.full(ds.n_sessions, np.nan)
    fold_scores = []
    for test, p in zip(tests, map_fn(_fit_fold, jobs)):
        if clip_predictions:
            lo, hi = SCORE_RANGES[measurement]
            p = np.clip(p, lo, hi)
        pred[test] = p
        if test.sum() >= 2:
            fold_scores.append(ccc(y[test], p))
    assert np.all(np.isfinite(pred)), "every session is predicted exactly once"

    pooled_ccc = ccc(y, pred)
    pooled_r = pearson(y, pred)
    if fold_averaged:
        pooled_ccc = float(np.mean(fold_scores))
    return EvalResult(
        measurement,
        source,
        pooled_ccc,
        pooled_r,
        permutation_p(y, pred, n_perm, seed),
        ds.n_sessions,
        list(zip(y.tolist(), pred.tolist())),
        fold_scores,
    )


# --------------------------------------------------------------------------
# reporting


def table3_rows(results: list[EvalResult], method: str = "Proposed") -> list[list[str]]:
    header = ["measurement", "method", "Q1", "Q2", "Q3", "Q4", "Q5", "Q6", "Q7", "Concatenated"]
    cells = {(r.measurement, r.source): r for r in results}
    rows = [header]
    for m in MEASUREMENTS:
        if not any(key[0] == m for key in cells):
            continue
        row = [m, method]
        for src in SOURCES:
            r = cells.get((m, src))
            row.append("" if r is None else f"{r.ccc:.3f}{r.stars}")
        rows.append(row)
    return rows


def table3_csv(results: list[EvalResult]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table3_rows(results))
    return buf.getvalue()


def write_results(results: list[EvalResult], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.json").write_text(json.dumps([r.to_dict() for r in results], indent=1) + "\n", encoding="utf-8")
    (out / "table3.csv").write_text(table3_csv(results), encoding="utf-8")
    with open(out / "predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["measurement", "source", "self_assessed", "predicted"])
        for r in results:
            for truth, p in r.pairs:
                w.writerow([r.measurement, r.source, repr(truth), repr(p)])


def read_predictions(path: str | Path) -> dict[tuple[str, str], list[tuple[float, float]]]:
    pairs: dict[tuple[str, str], list[tuple[float, float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pairs.setdefault((row["measurement"], row["source"]), []).append(
                (float(row["self_assessed"]), float(row["predicted"]))
            )
    return pairs
