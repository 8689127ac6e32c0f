"""Univariate correlation ranking of features against a target score."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, NTooLarge, TooFewRows

DEFAULT_N_SELECT = 88
MEASUREMENTS = ("STAI", "GAD7", "PSQI", "PANAS")


def pearson(x, y) -> float:
    """Pearson r; 0 when either input has zero variance."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"lengths {x.shape} and {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least two points")
    return float(correlations(x[:, None], y)[0])


def correlations(features: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Column-wise Pearson r of ``features`` (rows x cols) with ``target``."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if X.shape[0] != len(y):
        raise LengthMismatch(f"{X.shape[0]} rows vs {len(y)} targets")
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sxx = np.einsum("ij,ij->j", Xc, Xc)
    syy = yc @ yc
    sxy = yc @ Xc
    denom = np.sqrt(sxx * syy)
    # zero-variance guard relative to column magnitude
    scale = np.maximum(np.abs(X).max(axis=0, initial=0.0), 1e-300) ** 2 * len(y)
    flat = (sxx <= 1e-24 * scale) | (syy <= 1e-24 * max(np.max(np.abs(y)) ** 2 * len(y), 1e-300))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(flat | (denom == 0), 0.0, sxy / np.where(denom == 0, 1.0, denom))
    return np.clip(r, -1.0, 1.0)


@dataclass(frozen=True)
class SelectionMask:
    measurement: str
    source: str
    kept_names: tuple[str, ...]
    correlations: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.kept_names)

    def indices(self, names) -> np.ndarray:
        lookup = {name: i for i, name in enumerate(names)}
        return np.array([lookup[n] for n in self.kept_names], dtype=np.int64)

    def apply(self, names, values: np.ndarray) -> np.ndarray:
        return np.asarray(values)[..., self.indices(names)]

    def to_dict(self) -> dict:
        return {
            "measurement": self.measurement,
            "source": self.source,
            "n": self.n,
            "entries": [{"name": n, "r": r} for n, r in zip(self.kept_names, self.correlations)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionMask":
        entries = d["entries"]
        if len(entries) != d["n"]:
            raise ValueError("mask entry count disagrees with n")
        return cls(
            d["measurement"],
            d["source"],
            tuple(e["name"] for e in entries),
            tuple(float(e["r"]) for e in entries),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "SelectionMask":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def select_top_n(
    features: np.ndarray,
    targets,
    n: int = DEFAULT_N_SELECT,
    names=None,
    measurement: str = "",
    source: str = "",
) -> SelectionMask:
    """Keep the ``n`` features with the largest |r|; ties go to the lexicographically smaller name.

    Only pass training rows here.
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise TooFewRows("need at least two rows")
    if n < 1 or n > X.shape[1]:
        raise NTooLarge(f"n={n} with {X.shape[1]} features")
    if names is None:
        names = [f"f{i}" for i in range(X.shape[1])]
    names = list(names)
    r = correlations(X, y)
    order = sorted(range(len(names)), key=lambda i: (-abs(r[i]), names[i]))[:n]
    return SelectionMask(measurement, source, tuple(names[i] for i in order), tuple(float(r[i]) for i in order))
