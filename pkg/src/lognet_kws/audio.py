"""WAV input/output and 16 kHz -> 8 kHz resampling."""

from __future__ import annotations

import io
import os
import wave
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from ._io import atomic_write_bytes

PCM_SCALE = 32768.0
SUPPORTED_RATES = (8000, 16000)

# 63-tap Hamming windowed sinc, cutoff at the output Nyquist (4 kHz at 16 kHz input)
RESAMPLER_TAPS = 63
RESAMPLER_CUTOFF = 0.5


class WavFormatError(ValueError):
    """Base class for WAV files the pipeline refuses to read."""


class NotPcmError(WavFormatError):
    pass


class MultiChannelError(WavFormatError):
    pass


class BitDepthError(WavFormatError):
    pass


class SampleRateError(ValueError):
    pass


@dataclass(frozen=True)
class AudioClip:
    """Mono clip of real-valued samples, nominally in [-1, 1]."""

    samples: np.ndarray = field(repr=False)
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected a 1-D sample array, got shape {samples.shape}")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def normalized(self) -> "AudioClip":
        """Return a copy scaled so that max |sample| <= 1 (no-op when already inside)."""
        peak = float(np.max(np.abs(self.samples))) if len(self) else 0.0
        if peak <= 1.0:
            return self
        return AudioClip(self.samples / peak, self.sample_rate_hz)


def load_wav(path) -> AudioClip:
    """Read a mono 16-bit PCM WAV file into an :class:`AudioClip`.

    Samples are divided by 32768, so the int16 range maps onto [-1, 1).
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(path, "rb") as wf:
            n_channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except wave.Error as exc:
        msg = str(exc)
        if "unknown format" in msg:
            raise NotPcmError(f"{path}: non-PCM encoding unsupported ({msg})") from exc
        raise WavFormatError(f"{path}: malformed WAV ({msg})") from exc
    except EOFError as exc:
        raise WavFormatError(f"{path}: truncated WAV header") from exc

    if n_channels != 1:
        raise MultiChannelError(f"{path}: multi-channel unsupported ({n_channels} channels)")
    if width != 2:
        raise BitDepthError(f"{path}: unsupported bit depth {8 * width}, expected 16")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return AudioClip(samples, rate)


def wav_bytes(clip: AudioClip) -> bytes:
    """Serialize a clip as mono 16-bit PCM WAV bytes (inverse of :func:`load_wav`)."""
    ints = np.clip(np.round(clip.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate_hz)
        wf.writeframes(ints.tobytes())
    return buf.getvalue()


def write_wav(path, clip: AudioClip) -> None:
    atomic_write_bytes(path, wav_bytes(clip))


def resampler_taps() -> np.ndarray:
    """Anti-alias low-pass used before decimating by two (unit DC gain)."""
    return signal.firwin(RESAMPLER_TAPS, RESAMPLER_CUTOFF, window="hamming")


_TAPS = resampler_taps()


def resample_16k_to_8k(clip: AudioClip) -> AudioClip:
    """Low-pass filter and keep every second sample.

    The FIR is linear-phase and zero-padded at both clip edges, so the output
    stays time-aligned with the input and has ``ceil(len / 2)`` samples.
    """
    if clip.sample_rate_hz != 16000:
        raise SampleRateError(f"expected a 16000 Hz clip, got {clip.sample_rate_hz} Hz")
    filtered = np.convolve(clip.samples, _TAPS, mode="full")
    delay = (RESAMPLER_TAPS - 1) // 2
    filtered = filtered[delay:delay + len(clip)]
    return AudioClip(filtered[::2], 8000)


def to_8k(clip: AudioClip) -> AudioClip:
    """Bring a pipeline-entry clip to 8 kHz."""
    if clip.sample_rate_hz == 8000:
        return clip
    if clip.sample_rate_hz == 16000:
        return resample_16k_to_8k(clip)
    raise SampleRateError(
        f"unsupported sample rate {clip.sample_rate_hz} Hz; expected one of {SUPPORTED_RATES}"
    )
