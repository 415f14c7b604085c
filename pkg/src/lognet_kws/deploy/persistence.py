"""Binary model container.

Layout (all little-endian)::

    offset  size  field
    0       4     magic b"LGNT"
    4       2     format version (1)
    6       2     reserved, zero
    8       16    N, P, M, n_classes            (uint32 x 4)
    24      16    LCG multiplier, increment, modulus, seed   (uint32 x 4)
    40      1+k   aggregation method            (uint8 length + UTF-8)
    ...     1+..  labels: uint8 count, then per label uint8 length + UTF-8
    ...     4(N+1)        input maxima              float32
    ...     4*3P          reservoir (max, min, mean) per row, float32
    ...     4*M(P+1)      hidden weights, row-major, float32
    ...     4*C(M+1)      output weights, row-major, float32
    end-4   4     CRC32 of every preceding byte

The reservoir matrix itself is not stored; it is regenerated from the LCG
constants on load.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .._io import atomic_write_bytes
from ..lognet import (LcgParams, LogNetArch, LogNetModel, NormStats, ReadoutWeights,
                      generate_reservoir)

MAGIC = b"LGNT"
FORMAT_VERSION = 1
_HEAD = struct.Struct("<4sHH4I4I")


class ModelFormatError(ValueError):
    pass


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 255:
        raise ValueError(f"string too long for the model file: {s!r}")
    return bytes([len(raw)]) + raw


def model_to_bytes(model: LogNetModel) -> bytes:
    a, g, n, r = model.arch, model.reservoir.generator, model.norms, model.readout
    parts = [
        _HEAD.pack(MAGIC, FORMAT_VERSION, 0, a.n_input, a.p_reservoir, a.m_hidden, a.n_classes,
                   g.multiplier, g.increment, g.modulus, g.seed),
        _pack_str(model.method),
        bytes([len(model.labels)]),
        *(_pack_str(lab) for lab in model.labels),
        np.asarray(n.input_max, dtype="<f4").tobytes(),
        np.stack([n.res_max, n.res_min, n.res_mean], axis=1).astype("<f4").tobytes(),
        np.asarray(r.hidden, dtype="<f4").tobytes(),
        np.asarray(r.output, dtype="<f4").tobytes(),
    ]
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("model file is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def string(self) -> str:
        n = self.take(1)[0]
        return self.take(n).decode("utf-8")

    def floats(self, count: int) -> np.ndarray:
        arr = np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32)
        return arr


def model_from_bytes(data: bytes) -> LogNetModel:
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFormatError("bad magic: not a LogNet model file")
    if len(data) < _HEAD.size:
        raise ModelFormatError("model file is truncated")
    _, version, _, n_in, p, m, c, la, lc, lm, ls = _HEAD.unpack_from(data)
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    rd = _Reader(data)
    rd.pos = _HEAD.size
    method = rd.string()
    labels = tuple(rd.string() for _ in range(rd.take(1)[0]))
    input_max = rd.floats(n_in + 1)
    stats = rd.floats(3 * p).reshape(p, 3)
    hidden = rd.floats(m * (p + 1)).reshape(m, p + 1)
    output = rd.floats(c * (m + 1)).reshape(c, m + 1)
    body_end = rd.pos
    (crc,) = struct.unpack("<I", rd.take(4))
    if rd.pos != len(data):
        raise ModelFormatError("trailing bytes after the checksum")
    if zlib.crc32(data[:body_end]) != crc:
        raise ModelFormatError("checksum failure: model file is corrupted")

    arch = LogNetArch(n_in, p, m, c)
    reservoir = generate_reservoir(arch, LcgParams(la, lc, lm, ls))
    for arr in (input_max, stats, hidden, output):
        arr.flags.writeable = False
    norms = NormStats(input_max, stats[:, 0].copy(), stats[:, 1].copy(), stats[:, 2].copy())
    return LogNetModel(arch, reservoir, norms, ReadoutWeights(hidden, output), labels, method)


def save_model(model: LogNetModel, path) -> None:
    atomic_write_bytes(path, model_to_bytes(model))


def load_model(path) -> LogNetModel:
    with open(path, "rb") as fh:
        return model_from_bytes(fh.read())


def readout_payload_size(arch: LogNetArch) -> int:
    """Number of stored readout reals (bias columns included)."""
    return arch.m_hidden * (arch.p_reservoir + 1) + arch.n_classes * (arch.m_hidden + 1)
