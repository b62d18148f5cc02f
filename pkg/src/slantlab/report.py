"""Deterministic JSON / CSV serialisation of CLI reports.

Keys are sorted and every float is written with 17 significant digits, which
round-trips exactly through a binary64 parse.
"""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

import numpy as np

SCHEMA_VERSION = "1.0.0"


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def _plain(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_plain(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    return obj


def _emit(obj, out: list[str], indent: int, level: int) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(fmt_float(obj) if math.isfinite(obj) else "null")
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, x in enumerate(obj):
            out.append(pad)
            _emit(x, out, indent, level + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, k in enumerate(keys):
            out.append(pad + json.dumps(k) + ": ")
            _emit(obj[k], out, indent, level + 1)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(end + "}")
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    out: list[str] = []
    _emit(_plain(obj), out, indent, 0)
    return "".join(out) + "\n"


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else fmt_float(v) if isinstance(v, (float, np.floating))
                    else str(v).lower() if isinstance(v, (bool, np.bool_)) else v for v in row])
    return buf.getvalue()


def load_schema() -> dict:
    text = resources.files("slantlab").joinpath("report.schema.json").read_text()
    return json.loads(text)
