"""LogNet keyword spotting: VAD, 8 kHz MFCC front end, reservoir classifier,
speaker-independent evaluation and embedded export."""

from .aggregate import METHODS, aggregate, feature_dim
from .audio import AudioClip, load_wav, resample_16k_to_8k, to_8k
from .features import MfccConfig, MfccExtractor, mfcc_from_segment
from .lognet import (DEFAULT_LABELS, LcgParams, LogNetArch, LogNetClassifier, LogNetModel,
                     forward, predict_label)
from .pipeline import SpeechFrontEnd, clip_features
from .vad import OfflineVadConfig, Segment, StreamVad, StreamVadConfig, detect_segment

__version__ = "0.1.0"

__all__ = [
    "METHODS", "aggregate", "feature_dim", "AudioClip", "load_wav", "resample_16k_to_8k", "to_8k",
    "MfccConfig", "MfccExtractor", "mfcc_from_segment", "DEFAULT_LABELS", "LcgParams",
    "LogNetArch", "LogNetClassifier", "LogNetModel", "forward", "predict_label",
    "SpeechFrontEnd", "clip_features", "OfflineVadConfig", "Segment", "StreamVad",
    "StreamVadConfig", "detect_segment",
]
