"""Energy-based voice activity detection.

Two detectors share the mean-squared frame energy:

* :func:`detect_segment` segments a whole clip offline (1000-sample windows,
  300-sample hop) and returns the candidate with the highest mean energy.
* :class:`StreamVad` is the four-state machine used on-device: it consumes
  samples in arbitrary chunks and emits segments as commands complete.

Both locate a boundary at the edge of the nearest quiet frame: an onset sits
where the last below-threshold frame before the run ends, an offset where the
first below-threshold frame after it begins. The frame that first crosses the
threshold only says the boundary lies somewhere inside it. The streaming
onset is moved back half a hop more, which centres its timing error because
the onset multiplier needs far more speech inside a frame than the offset one.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip


@dataclass(frozen=True)
class OfflineVadConfig:
    window_len: int = 1000
    hop: int = 300
    energy_threshold: float = 0.001
    min_duration_s: float = 0.1
    max_duration_s: float = 0.7
    pad_s: float = 0.05

    def __post_init__(self):
        if self.window_len <= 0:
            raise ValueError("window_len must be positive")
        if not 0 < self.hop <= self.window_len:
            raise ValueError("hop must satisfy 0 < hop <= window_len")
        if not 0 < self.min_duration_s < self.max_duration_s:
            raise ValueError("need 0 < min_duration_s < max_duration_s")
        if self.pad_s < 0:
            raise ValueError("pad_s must be non-negative")


@dataclass(frozen=True)
class Segment:
    start_sample: int
    end_sample: int
    mean_energy: float

    def __post_init__(self):
        if not 0 <= self.start_sample < self.end_sample:
            raise ValueError(f"invalid segment bounds [{self.start_sample}, {self.end_sample})")
        if self.mean_energy < 0:
            raise ValueError("mean_energy must be non-negative")

    @property
    def n_samples(self) -> int:
        return self.end_sample - self.start_sample

    def duration_s(self, sample_rate_hz: int) -> float:
        return self.n_samples / sample_rate_hz

    def slice(self, clip: AudioClip) -> AudioClip:
        return AudioClip(clip.samples[self.start_sample:self.end_sample], clip.sample_rate_hz)


def frame_energy(frame) -> float:
    """Mean squared amplitude of a frame."""
    x = np.asarray(frame, dtype=np.float64)
    if x.size == 0:
        raise ValueError("frame_energy of an empty frame")
    return float(np.dot(x, x) / x.size)


def frame_energies(samples: np.ndarray, window_len: int, hop: int) -> np.ndarray:
    """Energies of every full window starting at 0, hop, 2*hop, ..."""
    n_frames = (len(samples) - window_len) // hop + 1
    if n_frames <= 0:
        return np.empty(0)
    windows = np.lib.stride_tricks.sliding_window_view(samples, window_len)[::hop][:n_frames]
    return np.einsum("ij,ij->i", windows, windows) / window_len


def _runs(mask: np.ndarray):
    """Yield (first, last) index pairs of consecutive True runs."""
    padded = np.concatenate(([False], mask, [False])).astype(np.int8)
    edges = np.flatnonzero(np.diff(padded))
    for first, stop in zip(edges[::2], edges[1::2]):
        yield int(first), int(stop) - 1


def candidate_segments(clip: AudioClip, cfg: OfflineVadConfig = OfflineVadConfig()):
    """All above-threshold runs as unpadded segments, before duration checks."""
    samples = clip.samples
    if len(samples) < cfg.window_len:
        raise ValueError(
            f"clip of {len(samples)} samples is shorter than one VAD window ({cfg.window_len})"
        )
    energies = frame_energies(samples, cfg.window_len, cfg.hop)
    n_frames = len(energies)
    out = []
    for first, last in _runs(energies > cfg.energy_threshold):
        start = 0 if first == 0 else (first - 1) * cfg.hop + cfg.window_len
        end = (last + 1) * cfg.hop if last + 1 < n_frames else last * cfg.hop + cfg.window_len
        if start >= end:
            # run too short to bracket; fall back to the hop-wide core of its frames
            mid = (first * cfg.hop + last * cfg.hop + cfg.window_len) // 2
            start, end = mid - cfg.hop // 2, mid + (cfg.hop + 1) // 2
        start = max(start, 0)
        end = min(end, len(samples))
        out.append(Segment(start, end, float(energies[first:last + 1].mean())))
    return out


def detect_segment(clip: AudioClip, cfg: OfflineVadConfig = OfflineVadConfig()) -> Segment | None:
    """Locate the spoken command in an 8 kHz clip.

    Among above-threshold runs whose duration lies in
    ``[min_duration_s, max_duration_s]`` the one with the highest mean frame
    energy wins (earliest on ties). The winner is widened by ``pad_s`` on each
    side and clamped to the clip. Returns ``None`` when no run qualifies.
    """
    if clip.sample_rate_hz != 8000:
        raise ValueError(f"detect_segment expects 8000 Hz audio, got {clip.sample_rate_hz} Hz")
    rate = clip.sample_rate_hz
    best = None
    for seg in candidate_segments(clip, cfg):
        if not cfg.min_duration_s <= seg.duration_s(rate) <= cfg.max_duration_s:
            continue
        if best is None or seg.mean_energy > best.mean_energy:
            best = seg
    if best is None:
        return None
    pad = int(round(cfg.pad_s * rate))
    return Segment(
        max(best.start_sample - pad, 0),
        min(best.end_sample + pad, len(clip)),
        best.mean_energy,
    )


def has_activity(clip: AudioClip, cfg: OfflineVadConfig = OfflineVadConfig()) -> bool:
    """True when any analysis window exceeds the energy threshold."""
    if len(clip) < cfg.window_len:
        return frame_energy(clip.samples) > cfg.energy_threshold if len(clip) else False
    return bool(np.any(frame_energies(clip.samples, cfg.window_len, cfg.hop) > cfg.energy_threshold))


# Streaming detector -------------------------------------------------------


class VadState(enum.Enum):
    SILENCE = "SILENCE"
    MAYBE_SPEECH = "MAYBE_SPEECH"
    SPEECH = "SPEECH"
    MAYBE_SILENCE = "MAYBE_SILENCE"


@dataclass(frozen=True)
class StreamVadConfig:
    ring_capacity: int = 4000
    frame_len: int = 160
    frame_hop: int = 40
    onset_multiplier: float = 6.0
    offset_multiplier: float = 2.5
    min_command_ms: float = 300
    max_command_ms: float = 700
    hangover_ms: float = 50
    adc_norm: float = 2048.0
    energy_history_len: int = 50
    sample_rate_hz: int = 8000
    onset_confirm_frames: int = 3
    noise_smoothing: float = 0.95
    noise_floor: float = 1e-6

    def __post_init__(self):
        positive = (
            "ring_capacity", "frame_len", "frame_hop", "onset_multiplier", "offset_multiplier",
            "min_command_ms", "max_command_ms", "hangover_ms", "adc_norm",
            "energy_history_len", "sample_rate_hz", "onset_confirm_frames", "noise_floor",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.onset_multiplier <= self.offset_multiplier:
            raise ValueError("onset_multiplier must exceed offset_multiplier")
        if self.min_command_ms >= self.max_command_ms:
            raise ValueError("min_command_ms must be below max_command_ms")
        if self.frame_len > self.ring_capacity:
            raise ValueError("frame_len cannot exceed ring_capacity")
        if not 0 <= self.noise_smoothing < 1:
            raise ValueError("noise_smoothing must lie in [0, 1)")

    @property
    def hangover_frames(self) -> int:
        hop_ms = 1000.0 * self.frame_hop / self.sample_rate_hz
        return max(1, int(round(self.hangover_ms / hop_ms)))


def normalize_adc(raw, adc_norm: float = 2048.0, midpoint: float = 2048.0) -> np.ndarray:
    """Map 12-bit ADC codes (0..4095) onto roughly [-1, 1]."""
    return (np.asarray(raw, dtype=np.float64) - midpoint) / adc_norm


@dataclass
class TraceRow:
    frame_index: int
    energy: float
    noise_level: float
    state: VadState


@dataclass
class StreamVad:
    """Four-state streaming detector. One instance per audio stream.

    The first ``energy_history_len`` frames only calibrate the noise level
    (their mean); afterwards the estimate follows an exponential moving
    average while the detector sits in SILENCE.
    """

    cfg: StreamVadConfig = field(default_factory=StreamVadConfig)
    record_trace: bool = False

    def __post_init__(self):
        self.reset()

    def reset(self):
        cfg = self.cfg
        self.state = VadState.SILENCE
        self.noise_level = cfg.noise_floor
        self.ring = np.zeros(cfg.ring_capacity)
        self.n_seen = 0  # total samples consumed
        self.n_frames = 0
        self.energy_history = np.zeros(cfg.energy_history_len)
        self.calibrated = False
        self.segment_start = 0
        self.segment_end = 0
        self.high_count = 0
        self.low_count = 0
        self.segment_energy_sum = 0.0
        self.segment_energy_frames = 0
        self.discarded = 0
        self.trace: list[TraceRow] = []

    # ring helpers
    def _ring_write(self, chunk: np.ndarray):
        # callers never pass more than ring_capacity samples
        cap = self.cfg.ring_capacity
        pos = self.n_seen % cap
        first = min(cap - pos, len(chunk))
        self.ring[pos:pos + first] = chunk[:first]
        self.ring[:len(chunk) - first] = chunk[first:]

    def _ring_read(self, end_abs: int, length: int) -> np.ndarray:
        cap = self.cfg.ring_capacity
        idx = np.arange(end_abs - length, end_abs) % cap
        return self.ring[idx]

    def push(self, samples) -> list[Segment]:
        """Consume samples (already in [-1, 1]); return segments completed by them."""
        cfg = self.cfg
        samples = np.asarray(samples, dtype=np.float64).ravel()
        emitted = []
        pos = 0
        while pos < len(samples):
            # stop at the next frame boundary so the ring always still holds that frame
            next_end = cfg.frame_len + self.n_frames * cfg.frame_hop
            chunk = samples[pos:pos + min(len(samples) - pos, next_end - self.n_seen)]
            self._ring_write(chunk)
            self.n_seen += len(chunk)
            pos += len(chunk)
            while self.n_seen >= cfg.frame_len + self.n_frames * cfg.frame_hop:
                end_abs = cfg.frame_len + self.n_frames * cfg.frame_hop
                energy = frame_energy(self._ring_read(end_abs, cfg.frame_len))
                seg = self._step(energy)
                if seg is not None:
                    emitted.append(seg)
        return emitted

    def _frame_start(self, k: int) -> int:
        return k * self.cfg.frame_hop

    def _step(self, energy: float) -> Segment | None:
        cfg = self.cfg
        k = self.n_frames
        self.n_frames += 1
        out = None

        if not self.calibrated:
            self.energy_history[k] = energy
            if k + 1 == cfg.energy_history_len:
                self.noise_level = max(float(self.energy_history.mean()), cfg.noise_floor)
                self.calibrated = True
            self._trace(k, energy)
            return None

        self.energy_history = np.roll(self.energy_history, -1)
        self.energy_history[-1] = energy
        onset = energy > cfg.onset_multiplier * self.noise_level
        low = energy < cfg.offset_multiplier * self.noise_level

        if self.state is VadState.SILENCE:
            if onset:
                self.state = VadState.MAYBE_SPEECH
                self.high_count = 1
                self.segment_start = self._frame_start(k - 1) + cfg.frame_len - cfg.frame_hop // 2
                self.segment_energy_sum = energy
                self.segment_energy_frames = 1
            else:
                a = cfg.noise_smoothing
                self.noise_level = max(a * self.noise_level + (1 - a) * energy, cfg.noise_floor)
        elif self.state is VadState.MAYBE_SPEECH:
            if onset:
                self.high_count += 1
                self.segment_energy_sum += energy
                self.segment_energy_frames += 1
                if self.high_count >= cfg.onset_confirm_frames:
                    self.state = VadState.SPEECH
            else:
                self.state = VadState.SILENCE
                self.high_count = 0
        elif self.state is VadState.SPEECH:
            if low:
                self.state = VadState.MAYBE_SILENCE
                self.low_count = 1
                self.segment_end = self._frame_start(k)
            else:
                self.segment_energy_sum += energy
                self.segment_energy_frames += 1
        elif self.state is VadState.MAYBE_SILENCE:
            if low:
                self.low_count += 1
                if self.low_count >= cfg.hangover_frames:
                    out = self._finish()
                    self.state = VadState.SILENCE
            else:
                self.state = VadState.SPEECH
                self.low_count = 0
                self.segment_energy_sum += energy
                self.segment_energy_frames += 1

        self._trace(k, energy)
        return out

    def _finish(self) -> Segment | None:
        cfg = self.cfg
        start = max(self.segment_start, 0)
        end = self.segment_end
        duration_ms = 1000.0 * (end - start) / cfg.sample_rate_hz
        if end <= start or not cfg.min_command_ms <= duration_ms <= cfg.max_command_ms:
            self.discarded += 1
            return None
        mean = self.segment_energy_sum / max(self.segment_energy_frames, 1)
        return Segment(start, end, mean)

    def _trace(self, k: int, energy: float):
        if self.record_trace:
            self.trace.append(TraceRow(k, energy, self.noise_level, self.state))

    def trace_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["frame_index", "energy", "noise_level", "state"])
        for row in self.trace:
            writer.writerow([row.frame_index, repr(row.energy), repr(row.noise_level), row.state.value])
        return buf.getvalue()


def stream_push(state: StreamVad, samples) -> list[Segment]:
    """Functional alias of :meth:`StreamVad.push`."""
    return state.push(samples)
