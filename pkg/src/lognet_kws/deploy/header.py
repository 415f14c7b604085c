"""Export a trained model as a C header of flash-resident constant tables."""

from __future__ import annotations

import re

import numpy as np

from .._io import atomic_write_text
from ..lognet import LogNetModel

PREFIX = "LOGNET"
_PER_LINE = 6


def c_float(v: float) -> str:
    s = f"{float(v):.9g}"
    if not any(ch in s for ch in ".e"):
        s += ".0"
    return s + "f"


def _array(name: str, values, ctype="float", fmt=c_float) -> str:
    values = list(values)
    lines = []
    for i in range(0, len(values), _PER_LINE):
        lines.append("    " + ", ".join(fmt(v) for v in values[i:i + _PER_LINE]))
    body = ",\n".join(lines)
    return f"static const {ctype} {name}[{len(values)}] PROGMEM = {{\n{body}\n}};\n"


def header_text(model: LogNetModel, guard: str = "LOGNET_MODEL_H") -> str:
    a, g, n, r = model.arch, model.reservoir.generator, model.norms, model.readout
    width = max(len(lab) for lab in model.labels) + 1
    labels = ",\n".join(f'    "{lab}"' for lab in model.labels)
    stats = np.stack([n.res_max, n.res_min, n.res_mean], axis=1).ravel()
    out = [
        f"/* LogNet {a} model tables; aggregation: {model.method}. */",
        f"#ifndef {guard}",
        f"#define {guard}",
        "",
        "#include <stdint.h>",
        "",
        "#ifndef PROGMEM",
        "#define PROGMEM",
        "#endif",
        "",
        f"#define {PREFIX}_N_INPUT {a.n_input}",
        f"#define {PREFIX}_P_RESERVOIR {a.p_reservoir}",
        f"#define {PREFIX}_M_HIDDEN {a.m_hidden}",
        f"#define {PREFIX}_N_CLASSES {a.n_classes}",
        "",
        "/* multiplier, increment, modulus, seed; W[i][j] = x / modulus - 0.5, row-wise */",
        _array(f"{PREFIX}_LCG", [g.multiplier, g.increment, g.modulus, g.seed], "uint32_t",
               lambda v: f"{int(v)}u"),
        "/* per-component maxima of (1, F) */",
        _array(f"{PREFIX}_INPUT_MAX", n.input_max),
        "/* per reservoir row: max, min, mean */",
        _array(f"{PREFIX}_RES_STATS", stats),
        f"/* [{a.m_hidden}][{a.p_reservoir + 1}] row-major, column 0 is the bias */",
        _array(f"{PREFIX}_HIDDEN_W", r.hidden.ravel()),
        f"/* [{a.n_classes}][{a.m_hidden + 1}] row-major, column 0 is the bias */",
        _array(f"{PREFIX}_OUTPUT_W", r.output.ravel()),
        f"static const char {PREFIX}_LABELS[{a.n_classes}][{width}] PROGMEM = {{\n{labels}\n}};",
        "",
        f"#endif /* {guard} */",
        "",
    ]
    return "\n".join(out)


def export_c_header(model: LogNetModel, path) -> None:
    atomic_write_text(path, header_text(model))


_ARRAY_RE = re.compile(r"static const (\w+) (\w+)\[(\d+)\] PROGMEM = \{([^}]*)\};", re.S)


def parse_header_arrays(text: str) -> dict:
    """Numeric arrays of an exported header as ``{name: ndarray}``."""
    arrays = {}
    for ctype, name, length, body in _ARRAY_RE.findall(text):
        items = [tok.strip().rstrip("fu") for tok in body.split(",") if tok.strip()]
        dtype = np.float64 if ctype == "float" else np.int64
        values = np.array([float(t) if dtype is np.float64 else int(t) for t in items], dtype=dtype)
        if len(values) != int(length):
            raise ValueError(f"{name}: declared {length} values, found {len(values)}")
        arrays[name] = values
    return arrays
