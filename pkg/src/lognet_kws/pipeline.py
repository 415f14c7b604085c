"""Audio clip -> feature vector front end, usable as a scikit-learn transformer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .aggregate import aggregate, canonical_method
from .audio import AudioClip, load_wav, to_8k
from .features import MfccConfig, mfcc_from_segment
from .vad import OfflineVadConfig, Segment, detect_segment


@dataclass(frozen=True)
class ClipFeatures:
    vectors: dict  # method -> np.ndarray
    segment: Segment | None
    fallback: bool  # True when the VAD found nothing and the whole clip was used


def clip_features(clip: AudioClip, methods, vad_cfg=OfflineVadConfig(), mfcc_cfg=MfccConfig(),
                  fallback=True) -> ClipFeatures:
    """Resample, segment, extract MFCCs and aggregate one clip.

    When no segment qualifies and ``fallback`` is set, the whole clip is used.
    With ``fallback=False`` the vectors dict is empty in that case.
    """
    clip = to_8k(clip)
    seg = detect_segment(clip, vad_cfg) if len(clip) >= vad_cfg.window_len else None
    if seg is None and not fallback:
        return ClipFeatures({}, None, True)
    samples = seg.slice(clip).samples if seg is not None else clip.samples
    mfcc = mfcc_from_segment(samples, mfcc_cfg)
    vectors = {m: aggregate(mfcc, m).values for m in (canonical_method(x) for x in methods)}
    return ClipFeatures(vectors, seg, seg is None)


class SpeechFrontEnd(TransformerMixin, BaseEstimator):
    """Turn clips (``AudioClip`` objects or WAV paths) into a feature matrix.

    After ``transform``, ``fallback_mask_`` marks the clips where the VAD
    found no segment and the whole clip was used instead.
    """

    def __init__(self, method="adaptive_binning", vad_config=None, mfcc_config=None):
        self.method = method
        self.vad_config = vad_config
        self.mfcc_config = mfcc_config

    def fit(self, X, y=None):
        self.method_ = canonical_method(self.method)
        return self

    def transform(self, X):
        method = canonical_method(self.method)
        vad_cfg = self.vad_config or OfflineVadConfig()
        mfcc_cfg = self.mfcc_config or MfccConfig()
        rows, mask = [], []
        for item in X:
            clip = item if isinstance(item, AudioClip) else load_wav(item)
            cf = clip_features(clip, [method], vad_cfg, mfcc_cfg)
            rows.append(cf.vectors[method])
            mask.append(cf.fallback)
        self.fallback_mask_ = np.asarray(mask, dtype=bool)
        return np.vstack(rows)
