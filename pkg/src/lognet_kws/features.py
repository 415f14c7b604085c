"""MFCC front end: Hamming-windowed 128-point FFT, 12 mel filters, DCT-II."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class MfccConfig:
    fft_len: int = 128
    hop: int = 64
    n_mels: int = 12
    fmin_hz: float = 300.0
    fmax_hz: float = 3800.0
    n_mfcc_computed: int = 9
    n_mfcc_kept: int = 8
    sample_rate_hz: int = 8000

    def __post_init__(self):
        if self.fft_len <= 0 or self.fft_len % 2:
            raise ValueError("fft_len must be a positive even number")
        if not 0 < self.hop <= self.fft_len:
            raise ValueError("hop must satisfy 0 < hop <= fft_len")
        if not 0 < self.fmin_hz < self.fmax_hz:
            raise ValueError("need 0 < fmin_hz < fmax_hz")
        if self.fmax_hz > self.sample_rate_hz / 2:
            raise ValueError(
                f"fmax_hz={self.fmax_hz} is above the Nyquist frequency {self.sample_rate_hz / 2}"
            )
        if not 0 < self.n_mfcc_kept <= self.n_mfcc_computed <= self.n_mels:
            raise ValueError("need 0 < n_mfcc_kept <= n_mfcc_computed <= n_mels")

    @property
    def n_bins(self) -> int:
        return self.fft_len // 2


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True)
class MelFilterbank:
    weights: np.ndarray = field(repr=False)  # (n_mels, n_bins)
    edges_hz: np.ndarray = field(repr=False)  # (n_mels + 2,)

    @property
    def centers_hz(self) -> np.ndarray:
        return self.edges_hz[1:-1]


def build_mel_filterbank(cfg: MfccConfig = MfccConfig()) -> MelFilterbank:
    """Triangular filters with edges equally spaced in mel between fmin and fmax.

    Weights are the continuous triangles sampled at the ``fft_len / 2``
    magnitude-spectrum bin frequencies ``k * fs / fft_len``.
    """
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(cfg.fmax_hz), cfg.n_mels + 2))
    freqs = np.arange(cfg.n_bins) * cfg.sample_rate_hz / cfg.fft_len
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (center - lo)
    falling = (hi - freqs) / (hi - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights.flags.writeable = False
    edges.flags.writeable = False
    return MelFilterbank(weights, edges)


def dct_matrix(n_out: int, n_in: int) -> np.ndarray:
    """Rows 0..n_out-1 of the orthonormal DCT-II on ``n_in`` points."""
    k = np.arange(n_out)[:, None]
    n = np.arange(n_in)[None, :]
    d = np.sqrt(2.0 / n_in) * np.cos(np.pi * k * (2 * n + 1) / (2 * n_in))
    d[0] /= np.sqrt(2.0)
    return d


@lru_cache(maxsize=8)
def _tables(cfg: MfccConfig):
    window = np.hamming(cfg.fft_len)
    fb = build_mel_filterbank(cfg).weights
    dct = dct_matrix(cfg.n_mfcc_computed, cfg.n_mels)[: cfg.n_mfcc_kept]
    return window, fb, dct


@dataclass(frozen=True)
class MfccMatrix:
    coeffs: np.ndarray = field(repr=False)  # (n_mfcc_kept, T)
    hop: int = 64
    sample_rate_hz: int = 8000

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.ndim != 2 or c.shape[1] < 1:
            raise ValueError(f"MFCC matrix needs shape (n_coeffs, T>=1), got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def n_frames(self) -> int:
        return self.coeffs.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        for row in self.coeffs:
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def frame_signal(samples: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    n_frames = (len(samples) - frame_len) // hop + 1
    return np.lib.stride_tricks.sliding_window_view(samples, frame_len)[::hop][:n_frames]


def magnitude_spectrum(frames: np.ndarray, window: np.ndarray) -> np.ndarray:
    """|FFT| of windowed frames, bins 0..fft_len/2 - 1."""
    n = frames.shape[-1]
    return np.abs(np.fft.rfft(frames * window, n=n, axis=-1))[..., : n // 2]


def mfcc_from_segment(samples, cfg: MfccConfig = MfccConfig()) -> MfccMatrix:
    """MFCC matrix of an 8 kHz segment, one column per frame.

    ``T = (len - fft_len) // hop + 1``; each column holds c0..c(n_mfcc_kept-1)
    of the log mel energies (natural log, floored at 1e-10).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    if len(x) < cfg.fft_len:
        raise ValueError(f"segment of {len(x)} samples is shorter than one frame ({cfg.fft_len})")
    window, fb, dct = _tables(cfg)
    spectrum = magnitude_spectrum(frame_signal(x, cfg.fft_len, cfg.hop), window)
    log_mel = np.log(np.maximum(spectrum @ fb.T, LOG_FLOOR))
    return MfccMatrix((log_mel @ dct.T).T, cfg.hop, cfg.sample_rate_hz)


class MfccExtractor(TransformerMixin, BaseEstimator):
    """Map a list of 8 kHz sample arrays to a list of :class:`MfccMatrix`."""

    def __init__(self, fft_len=128, hop=64, n_mels=12, fmin_hz=300.0, fmax_hz=3800.0,
                 n_mfcc_computed=9, n_mfcc_kept=8, sample_rate_hz=8000):
        self.fft_len = fft_len
        self.hop = hop
        self.n_mels = n_mels
        self.fmin_hz = fmin_hz
        self.fmax_hz = fmax_hz
        self.n_mfcc_computed = n_mfcc_computed
        self.n_mfcc_kept = n_mfcc_kept
        self.sample_rate_hz = sample_rate_hz

    def config(self) -> MfccConfig:
        return MfccConfig(**self.get_params())

    def fit(self, X, y=None):
        self.config_ = self.config()
        return self

    def transform(self, X):
        cfg = getattr(self, "config_", None) or self.config()
        return [mfcc_from_segment(x, cfg) for x in X]
