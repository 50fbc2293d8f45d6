"""JSON wire formats for matrices and channels.

Matrix: ``{"rows": r, "cols": c, "re": [...], "im": [...]}`` (row-major).
Channel: ``{"d_in": .., "d_out": .., "choi": <matrix>}``.
"""
import json
import math

import numpy as np

from .errors import DimensionError


def matrix_to_json(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {m.shape}")
    flat = m.reshape(-1)
    return {
        "rows": int(m.shape[0]),
        "cols": int(m.shape[1]),
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def matrix_from_json(obj):
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", [0.0] * len(re)), dtype=float)
    if rows < 1 or cols < 1 or re.size != rows * cols or im.size != rows * cols:
        raise DimensionError(
            f"matrix record has {re.size}/{im.size} entries for shape ({rows}, {cols})"
        )
    return (re + 1j * im).reshape(rows, cols)


def channel_to_json(channel):
    return {"d_in": channel.d_in, "d_out": channel.d_out, "choi": matrix_to_json(channel.choi)}


def channel_from_json(obj):
    from .channels import Channel

    return Channel(int(obj["d_in"]), int(obj["d_out"]), matrix_from_json(obj["choi"]))


def load_channel(path):
    with open(path) as fh:
        return channel_from_json(json.load(fh))


def dump_json(obj, fh=None):
    """Deterministic JSON text (sorted keys, repr floats)."""
    text = json.dumps(obj, sort_keys=True, indent=2, default=_default)
    if fh is not None:
        fh.write(text + "\n")
    return text


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def round_sig(obj, digits=12):
    """Copy of a JSON-like tree with floats rounded to ``digits`` significant digits.

    Non-finite floats become ``None`` so the output stays strict JSON.
    """
    if isinstance(obj, dict):
        return {str(k): round_sig(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_sig(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return round_sig(obj.tolist(), digits)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{digits}g}")
    if isinstance(obj, complex):
        return {"re": round_sig(obj.real, digits), "im": round_sig(obj.imag, digits)}
    return obj


def format_cell(x, digits=12):
    """CSV cell text: ``digits`` significant digits, empty for missing values."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else f"{float(x):.{digits}g}"
    return str(x)
