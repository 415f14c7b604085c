"""Permutation feature importance, feature-reduction and architecture sweeps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import clone
from sklearn.model_selection import StratifiedGroupKFold

from ..lognet import LogNetClassifier


@dataclass
class PfiResult:
    drops: np.ndarray  # (n_features,) mean accuracy drop, averaged over folds
    drops_std: np.ndarray  # std over folds x permutations
    fold_drops: np.ndarray  # (n_folds, n_features)
    baseline: np.ndarray  # (n_folds,) unpermuted fold accuracy

    @property
    def ranking(self) -> np.ndarray:
        """Feature indices by decreasing importance (stable for ties)."""
        return np.argsort(-self.drops, kind="stable")

    def to_csv(self, names=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rank", "feature", "name", "mean_drop", "std_drop"])
        for rank, j in enumerate(self.ranking, start=1):
            name = names[j] if names is not None else f"f{j}"
            w.writerow([rank, int(j), name, f"{self.drops[j]:.6f}", f"{self.drops_std[j]:.6f}"])
        return buf.getvalue()


def adaptive_binning_names(n_coeffs=8, n_bins=8) -> list[str]:
    return [f"mfcc{i + 1}_bin{b + 1}" for i in range(n_coeffs) for b in range(n_bins)]


def _accuracy(clf, X, y) -> float:
    return float(np.mean(clf.predict(X) == y))


def _pfi_fold(estimator, X, y, train_idx, test_idx, n_repeats, seed):
    clf = clone(estimator).fit(X[train_idx], y[train_idx])
    X_eval, y_eval = X[test_idx].copy(), y[test_idx]
    base = _accuracy(clf, X_eval, y_eval)
    rng = np.random.default_rng(seed)
    drops = np.empty((n_repeats, X.shape[1]))
    for j in range(X.shape[1]):
        original = X_eval[:, j].copy()
        for r in range(n_repeats):
            X_eval[:, j] = original[rng.permutation(len(original))]
            drops[r, j] = base - _accuracy(clf, X_eval, y_eval)
        X_eval[:, j] = original
    return base, drops


def permutation_importance(X, y, groups, estimator=None, n_folds=3, n_repeats=10, seed=0,
                           n_jobs=1) -> PfiResult:
    """Mean accuracy drop per feature under speaker-grouped cross-validation.

    Folds never split a speaker (``groups``) and keep class proportions as
    close as the grouping allows. In each fold a fresh clone of ``estimator``
    is trained and every held-out column is shuffled ``n_repeats`` times.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    groups = np.asarray(groups)
    if len(np.unique(groups)) < n_folds:
        raise ValueError(f"need at least {n_folds} speakers for {n_folds}-fold cross-validation")
    estimator = estimator if estimator is not None else LogNetClassifier(random_state=seed)
    cv = StratifiedGroupKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    splits = list(cv.split(X, y, groups))
    out = Parallel(n_jobs=n_jobs)(
        delayed(_pfi_fold)(estimator, X, y, tr, te, n_repeats, seed + 1000 * k)
        for k, (tr, te) in enumerate(splits)
    )
    base = np.array([b for b, _ in out])
    all_drops = np.stack([d for _, d in out])  # (folds, repeats, features)
    return PfiResult(
        drops=all_drops.mean(axis=(0, 1)),
        drops_std=all_drops.reshape(-1, X.shape[1]).std(axis=0),
        fold_drops=all_drops.mean(axis=1),
        baseline=base,
    )


def _fit_score(estimator, X_tr, y_tr, X_te, y_te):
    clf = clone(estimator).fit(X_tr, y_tr)
    return _accuracy(clf, X_te, y_te)


def default_ks(n_features: int, step: int = 4) -> list[int]:
    return list(range(n_features, 0, -step))


def feature_reduction_sweep(X_train, y_train, X_test, y_test, ranking, estimator=None,
                            ks=None, seed=0, n_jobs=1) -> list[tuple[int, float]]:
    """Accuracy after keeping only the ``k`` most important features.

    Features are dropped from the bottom of ``ranking``; the kept columns
    retain their original order so ``k = n_features`` reproduces the baseline.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    X_test = np.asarray(X_test, dtype=np.float64)
    ranking = np.asarray(ranking)
    n = X_train.shape[1]
    if sorted(ranking.tolist()) != list(range(n)):
        raise ValueError("ranking must be a permutation of the feature indices")
    ks = default_ks(n) if ks is None else [int(k) for k in ks]
    if any(k < 1 or k > n for k in ks):
        raise ValueError(f"every k must lie in [1, {n}]")
    estimator = estimator if estimator is not None else LogNetClassifier(random_state=seed)
    kept = [np.sort(ranking[:k]) for k in ks]
    accs = Parallel(n_jobs=n_jobs)(
        delayed(_fit_score)(estimator, X_train[:, c], y_train, X_test[:, c], y_test) for c in kept
    )
    return list(zip(ks, accs))


@dataclass(frozen=True)
class SweepCell:
    p_reservoir: int
    m_hidden: int
    accuracy: float


def architecture_sweep(X_train, y_train, X_test, y_test, p_values, m_values, estimator=None,
                       seed=0, n_jobs=1) -> list[SweepCell]:
    """Test accuracy for every (P, M) pair, same seed for all cells."""
    p_values, m_values = list(p_values), list(m_values)
    if not p_values or not m_values:
        raise ValueError("P and M ranges must be non-empty")
    estimator = estimator if estimator is not None else LogNetClassifier(random_state=seed)
    grid = [(p, m) for p in p_values for m in m_values]
    accs = Parallel(n_jobs=n_jobs)(
        delayed(_fit_score)(clone(estimator).set_params(n_reservoir=p, n_hidden=m),
                            X_train, y_train, X_test, y_test)
        for p, m in grid
    )
    return [SweepCell(p, m, a) for (p, m), a in zip(grid, accs)]


def sweep_csv(cells) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["P", "M", "accuracy"])
    for c in cells:
        w.writerow([c.p_reservoir, c.m_hidden, f"{c.accuracy:.6f}"])
    return buf.getvalue()


def reduction_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "accuracy"])
    for k, a in curve:
        w.writerow([k, f"{a:.6f}"])
    return buf.getvalue()
