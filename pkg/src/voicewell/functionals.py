"""Response-level statistics over frame-feature columns."""

from __future__ import annotations

import numpy as np

from .acoustic import FrameFeatureMatrix

FUNCTIONALS_VERSION = 1
FUNCTIONAL_NAMES = (
    "mean",
    "stddev",
    "median",
    "q1",
    "q3",
    "iqr",
    "pct5",
    "pct95",
    "min",
    "max",
    "range",
    "skewness",
    "kurtosis",
    "slope",
    "intercept",
    "mean_abs_dev",
    "rms",
    "mean_abs_delta",
    "frac_above_mean",
)
assert len(FUNCTIONAL_NAMES) == 19


def functional_names(columns) -> tuple[str, ...]:
    return tuple(f"{c}.{f}" for c in columns for f in FUNCTIONAL_NAMES)


def column_functionals(m: np.ndarray) -> np.ndarray:
    """All 19 functionals for every column of ``m`` -> shape (19, columns).

    Moments are population (1/n) moments; kurtosis is excess kurtosis.
    Zero-variance columns get skewness and kurtosis 0.
    """
    x = np.asarray(m, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 1:
        raise ValueError("need at least one frame")

    mean = x.mean(axis=0)
    centered = x - mean
    m2 = np.mean(centered**2, axis=0)
    m3 = np.mean(centered**3, axis=0)
    m4 = np.mean(centered**4, axis=0)
    # relative test avoids calling float-noise variance of a constant column "spread"
    scale = np.maximum(np.abs(mean), 1e-300)
    degenerate = (m2 <= (1e-14 * scale) ** 2) | (m2 == 0.0)
    std = np.where(degenerate, 0.0, np.sqrt(m2))
    safe_m2 = np.where(degenerate, 1.0, m2)
    skew = np.where(degenerate, 0.0, m3 / safe_m2**1.5)
    kurt = np.where(degenerate, 0.0, m4 / safe_m2**2 - 3.0)

    p5, q1, med, q3, p95 = np.percentile(x, [5, 25, 50, 75, 95], axis=0)
    lo = x.min(axis=0)
    hi = x.max(axis=0)

    if n > 1:
        t = np.arange(n, dtype=np.float64)
        tc = t - t.mean()
        slope = np.where(degenerate, 0.0, tc @ centered / (tc @ tc))
        intercept = mean - slope * t.mean()
        mad_delta = np.mean(np.abs(np.diff(x, axis=0)), axis=0)
    else:
        slope = np.zeros(x.shape[1])
        intercept = mean.copy()
        mad_delta = np.zeros(x.shape[1])

    mean_abs_dev = np.where(degenerate, 0.0, np.mean(np.abs(centered), axis=0))
    rms = np.sqrt(np.mean(x**2, axis=0))
    frac_above = np.where(degenerate, 0.0, np.mean(x > mean, axis=0))

    return np.vstack(
        [
            mean,
            std,
            med,
            q1,
            q3,
            q3 - q1,
            p5,
            p95,
            lo,
            hi,
            hi - lo,
            skew,
            kurt,
            slope,
            intercept,
            mean_abs_dev,
            rms,
            mad_delta,
            frac_above,
        ]
    )


def apply_functionals(m: FrameFeatureMatrix) -> tuple[tuple[str, ...], np.ndarray]:
    """Collapse a frame matrix into ``(names, values)`` named ``<column>.<functional>``."""
    stats = column_functionals(m.values)
    values = stats.T.reshape(-1)  # column-major over functionals: col0.f0..f18, col1...
    return functional_names(m.names), np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
