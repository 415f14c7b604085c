"""Feature extraction over a dataset index, caching, and end-to-end evaluation."""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .._io import atomic_write_bytes
from ..aggregate import canonical_method
from ..audio import RESAMPLER_CUTOFF, RESAMPLER_TAPS, load_wav
from ..features import MfccConfig
from ..lognet import LogNetArch, LogNetClassifier
from ..pipeline import clip_features
from ..vad import OfflineVadConfig
from .dataset import DatasetIndex
from .metrics import EvalReport, compute_metrics

log = logging.getLogger(__name__)

CACHE_VERSION = 1


class EmptySplitError(ValueError):
    pass


class ExtractionError(RuntimeError):
    pass


@dataclass
class FeatureSet:
    """Aggregated features of a list of clips, aligned with their metadata."""

    X: np.ndarray
    labels: np.ndarray
    speakers: np.ndarray
    paths: np.ndarray
    fallback: np.ndarray
    method: str

    def __len__(self):
        return self.X.shape[0]

    @property
    def fallback_count(self) -> int:
        return int(self.fallback.sum())

    def take(self, idx) -> "FeatureSet":
        idx = np.asarray(idx)
        return FeatureSet(self.X[idx], self.labels[idx], self.speakers[idx], self.paths[idx],
                          self.fallback[idx], self.method)

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        np.savez(buf, X=self.X, labels=self.labels.astype(str), speakers=self.speakers.astype(str),
                 paths=self.paths.astype(str), fallback=self.fallback,
                 method=np.array(self.method))
        return buf.getvalue()

    def save(self, path):
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "FeatureSet":
        with np.load(path, allow_pickle=False) as z:
            return cls(z["X"], z["labels"], z["speakers"], z["paths"], z["fallback"],
                       str(z["method"]))


def _file_stamp(path) -> list:
    try:
        st = os.stat(path)
    except OSError:
        return [path, -1, -1]
    return [path, st.st_size, st.st_mtime_ns]


def cache_key(method: str, entries, vad_cfg: OfflineVadConfig, mfcc_cfg: MfccConfig) -> str:
    payload = {
        "version": CACHE_VERSION,
        "method": canonical_method(method),
        "vad": asdict(vad_cfg),
        "mfcc": asdict(mfcc_cfg),
        "resampler": [RESAMPLER_TAPS, RESAMPLER_CUTOFF],
        "files": [_file_stamp(e.path) for e in entries],
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:20]


def _extract_one(path, methods, vad_cfg, mfcc_cfg):
    try:
        cf = clip_features(load_wav(path), methods, vad_cfg, mfcc_cfg)
    except Exception as exc:  # reported with the offending file
        raise ExtractionError(f"{path}: {exc}") from exc
    return cf.vectors, cf.fallback


def extract_features(entries, methods=("adaptive_binning",), vad_cfg=OfflineVadConfig(),
                     mfcc_cfg=MfccConfig(), cache_dir=None, n_jobs=1) -> dict:
    """Features for ``entries`` under every method, as ``{method: FeatureSet}``.

    DSP runs once per clip for all methods. With ``cache_dir`` set, results
    are stored as ``features-<method>-<key>.npz`` and reused on later calls.
    """
    entries = list(entries)
    methods = [canonical_method(m) for m in methods]
    result, todo = {}, []
    for m in methods:
        path = None
        if cache_dir is not None:
            path = os.path.join(cache_dir, f"features-{m}-{cache_key(m, entries, vad_cfg, mfcc_cfg)}.npz")
            if os.path.exists(path):
                result[m] = FeatureSet.load(path)
                continue
        todo.append((m, path))
    if not todo:
        return result

    wanted = [m for m, _ in todo]
    log.info("extracting %s features for %d clips", ",".join(wanted), len(entries))
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_extract_one)(e.path, wanted, vad_cfg, mfcc_cfg) for e in entries
    )
    labels = np.array([e.label for e in entries], dtype=str)
    speakers = np.array([e.speaker for e in entries], dtype=str)
    paths = np.array([e.path for e in entries], dtype=str)
    fallback = np.array([fb for _, fb in rows], dtype=bool)
    for m, path in todo:
        X = np.vstack([vec[m] for vec, _ in rows]) if rows else np.empty((0, 0))
        fs = FeatureSet(X, labels, speakers, paths, fallback, m)
        if path is not None:
            fs.save(path)
        result[m] = fs
    return result


@dataclass
class EvaluationResult:
    report: EvalReport
    classifier: LogNetClassifier
    train: FeatureSet
    test: FeatureSet
    extra: dict = field(default_factory=dict)


def make_classifier(arch: LogNetArch | None = None, seed=0, method="adaptive_binning",
                    **training) -> LogNetClassifier:
    p = arch.p_reservoir if arch is not None else 50
    m = arch.m_hidden if arch is not None else 40
    return LogNetClassifier(n_reservoir=p, n_hidden=m, method=method, random_state=seed,
                            **training)


def fit_and_score(train: FeatureSet, test: FeatureSet, classifier: LogNetClassifier):
    """Train on ``train``, predict ``test``; returns (report, fitted classifier)."""
    if len(train) == 0 or len(test) == 0:
        raise EmptySplitError("empty split")
    classifier.fit(train.X, train.labels)
    pred = classifier.predict(test.X)
    fallbacks = train.fallback_count + test.fallback_count
    report = compute_metrics(test.labels, pred, classifier.classes_.tolist(), fallbacks)
    return report, classifier


def split_features(index: DatasetIndex, features: FeatureSet) -> tuple[FeatureSet, FeatureSet]:
    """Partition an all-entries feature set (in index order) by the index's split."""
    split = np.array([e.split for e in index.entries])
    return features.take(np.flatnonzero(split == "train")), features.take(np.flatnonzero(split == "test"))


def evaluate_pipeline(index: DatasetIndex, method="adaptive_binning", arch: LogNetArch | None = None,
                      seed=0, cache_dir=None, n_jobs=1, vad_cfg=OfflineVadConfig(),
                      mfcc_cfg=MfccConfig(), **training) -> EvaluationResult:
    """Extract features for every entry, train on the train split, score the test split."""
    method = canonical_method(method)
    if not index.train or not index.test:
        raise EmptySplitError("empty split")
    feats = extract_features(index.entries, [method], vad_cfg, mfcc_cfg, cache_dir, n_jobs)[method]
    train, test = split_features(index, feats)
    if arch is not None and arch.n_input != train.X.shape[1]:
        raise ValueError(f"architecture {arch} expects N={arch.n_input}, "
                         f"but {method} yields {train.X.shape[1]} features")
    clf = make_classifier(arch, seed, method, **training)
    report, clf = fit_and_score(train, test, clf)
    report.extra.update({"method": method, "split": index.mode, "seed": seed,
                         "arch": str(LogNetArch(train.X.shape[1], clf.n_reservoir, clf.n_hidden)),
                         "n_train": len(train), "n_test": len(test)})
    return EvaluationResult(report, clf, train, test)
