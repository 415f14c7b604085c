"""Fixed-length feature vectors from variable-length MFCC matrices.

All four methods emit coefficient-major layouts: every value derived from
coefficient ``i`` is contiguous. Interval boundaries shared by the windowed
and binning methods are ``floor((k-1) T / K) .. floor(k T / K) - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .features import MfccMatrix

METHODS = ("basic_stats", "temporal_dynamics", "windowed_stats", "adaptive_binning")
ALIASES = {
    "basic": "basic_stats",
    "temporal": "temporal_dynamics",
    "windowed": "windowed_stats",
    "adaptive": "adaptive_binning",
}
N_WINDOWS = 4
N_BINS = 8


def canonical_method(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in METHODS:
        raise ValueError(f"unknown aggregation method {name!r}; choose from {METHODS}")
    return name


def feature_dim(method: str, n_coeffs: int = 8) -> int:
    per_coeff = {"basic_stats": 4, "temporal_dynamics": 6,
                 "windowed_stats": 4 * N_WINDOWS, "adaptive_binning": N_BINS}
    return n_coeffs * per_coeff[canonical_method(method)]


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray = field(repr=False)
    method: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "method", canonical_method(self.method))
        if not np.all(np.isfinite(v)):
            raise ValueError("feature vector contains non-finite values")

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _coeffs(m) -> np.ndarray:
    c = m.coeffs if isinstance(m, MfccMatrix) else np.asarray(m, dtype=np.float64)
    if c.ndim != 2 or c.shape[1] == 0:
        raise ValueError("expected a non-empty (n_coeffs, T) matrix")
    return c


def interval_bounds(n_frames: int, n_intervals: int) -> list[tuple[int, int]]:
    """Half-open ``[start, stop)`` frame ranges; empty when ``n_frames < n_intervals``."""
    return [((k * n_frames) // n_intervals, ((k + 1) * n_frames) // n_intervals)
            for k in range(n_intervals)]


def basic_stats(m) -> FeatureVector:
    """Mean, sample std (N-1), min and max per coefficient."""
    c = _coeffs(m)
    if c.shape[1] < 2:
        raise ValueError("basic_stats needs at least 2 frames")
    stats = np.stack([c.mean(axis=1), c.std(axis=1, ddof=1), c.min(axis=1), c.max(axis=1)], axis=1)
    return FeatureVector(stats.ravel(), "basic_stats")


def temporal_dynamics(m) -> FeatureVector:
    """Mean/std of each coefficient, its first difference and its second difference.

    Every std uses ``len - 1`` of the series it describes, so with ``T``
    frames the denominators are ``T-1``, ``T-2`` and ``T-3``.
    """
    c = _coeffs(m)
    if c.shape[1] < 4:
        raise ValueError("temporal_dynamics needs at least 4 frames")
    d1 = np.diff(c, axis=1)
    d2 = np.diff(d1, axis=1)
    parts = []
    for series in (c, d1, d2):
        parts += [series.mean(axis=1), series.std(axis=1, ddof=1)]
    return FeatureVector(np.stack(parts, axis=1).ravel(), "temporal_dynamics")


def windowed_stats(m) -> FeatureVector:
    """Mean, population std, min, max inside each of 4 time windows."""
    c = _coeffs(m)
    if c.shape[1] < N_WINDOWS:
        raise ValueError(f"windowed_stats needs at least {N_WINDOWS} frames")
    out = np.empty((c.shape[0], N_WINDOWS, 4))
    for k, (lo, hi) in enumerate(interval_bounds(c.shape[1], N_WINDOWS)):
        w = c[:, lo:hi]
        out[:, k] = np.stack([w.mean(axis=1), w.std(axis=1), w.min(axis=1), w.max(axis=1)], axis=1)
    return FeatureVector(out.ravel(), "windowed_stats")


def adaptive_binning(m) -> FeatureVector:
    """Mean of each coefficient over 8 equal time intervals.

    With fewer than 8 frames some intervals are empty; they copy the nearest
    preceding non-empty bin, or the first frame when leading.
    """
    c = _coeffs(m)
    out = np.empty((c.shape[0], N_BINS))
    prev = c[:, 0]
    for b, (lo, hi) in enumerate(interval_bounds(c.shape[1], N_BINS)):
        if hi > lo:
            prev = c[:, lo:hi].mean(axis=1)
        out[:, b] = prev
    return FeatureVector(out.ravel(), "adaptive_binning")


AGGREGATORS = {
    "basic_stats": basic_stats,
    "temporal_dynamics": temporal_dynamics,
    "windowed_stats": windowed_stats,
    "adaptive_binning": adaptive_binning,
}


def aggregate(m, method: str) -> FeatureVector:
    return AGGREGATORS[canonical_method(method)](m)


class MfccAggregator(TransformerMixin, BaseEstimator):
    """Stack aggregated vectors of a list of MFCC matrices into ``(n, dim)``."""

    def __init__(self, method="adaptive_binning"):
        self.method = method

    def fit(self, X, y=None):
        self.method_ = canonical_method(self.method)
        return self

    def transform(self, X):
        method = canonical_method(self.method)
        return np.vstack([aggregate(m, method).values for m in X])
