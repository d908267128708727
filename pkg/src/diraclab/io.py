"""Serialization helpers shared by the data types and the CLI.

Complex matrices travel as nested lists of ``[re, im]`` pairs, either
row-major (a list of rows) or column-major (a list of columns).  Reports are
written with sorted keys and every float printed with 17 significant
digits, which makes the output byte-identical across runs.
"""

import json
import math

import numpy as np


def encode_matrix(M, order="row"):
    """Nested ``[re, im]`` lists, by rows (``order="row"``) or by columns."""
    M = np.asarray(M, dtype=complex)
    if order == "col":
        M = M.T
    elif order != "row":
        raise ValueError(f"unknown order {order!r}")
    return [[[float(z.real), float(z.imag)] for z in line] for line in M]


def decode_matrix(obj, order="row", shape=None):
    """Inverse of :func:`encode_matrix`.

    ``shape`` may fix the number of rows (``(n, None)``), which is needed to
    decode a column-major matrix with no columns.
    """
    lines = [[complex(p[0], p[1]) for p in line] for line in obj]
    if not lines:
        n = shape[0] if shape is not None else 0
        return np.zeros((n, 0), dtype=complex) if order == "col" else np.zeros((0, n), dtype=complex)
    lengths = {len(line) for line in lines}
    if len(lengths) != 1:
        raise ValueError("ragged matrix encoding")
    M = np.array(lines, dtype=complex)
    if order == "col":
        M = M.T
    if shape is not None and shape[0] is not None and M.shape[0] != shape[0]:
        raise ValueError(f"expected {shape[0]} rows, got {M.shape[0]}")
    return M


def encode_vector(v):
    return [[float(z.real), float(z.imag)] for z in np.asarray(v, dtype=complex).ravel()]


def decode_vector(obj):
    return np.array([complex(p[0], p[1]) for p in obj], dtype=complex)


def _normalize(obj):
    """Convert numpy scalars/arrays and tuples into JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if hasattr(obj, "to_dict"):
        return _normalize(obj.to_dict())
    return obj


def _format_float(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _dump(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_dump(obj[k], indent, level + 1)}"
                 for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_dump(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _dump(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, float):
        return _format_float(obj)
    return json.dumps(obj)


def dumps_report(obj, indent=2):
    """Deterministic JSON text: sorted keys, floats with 17 significant digits."""
    return _dump(_normalize(obj), indent, 0) + "\n"
