"""JSON/CSV rendering with exact rationals and byte-stable output."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass
from fractions import Fraction
from typing import Any, Iterable

__all__ = ["frac_to_json", "frac_from_json", "jsonable", "dumps", "csv_text"]


def frac_to_json(q) -> dict:
    q = Fraction(q)
    return {"num": q.numerator, "den": q.denominator, "decimal": _decimal(q)}


def frac_from_json(obj) -> Fraction:
    if isinstance(obj, dict):
        return Fraction(int(obj["num"]), int(obj["den"]))
    if isinstance(obj, str):
        return Fraction(obj)
    return Fraction(obj)


def _decimal(q: Fraction) -> str:
    # display only; 17 significant digits
    return format(float(q), ".17g") if q.denominator != 1 else str(q.numerator)


def jsonable(obj: Any) -> Any:
    """Recursively convert results to JSON-ready values."""
    from .metricspace import PointSubset

    if isinstance(obj, Fraction):
        return frac_to_json(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
        return obj
    if isinstance(obj, PointSubset):
        return list(obj.indices())
    if hasattr(obj, "to_json"):
        return jsonable(obj.to_json())
    if is_dataclass(obj):
        return jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return jsonable(obj.item())
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2) + "\n"


def csv_text(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, Fraction):
        return f"{float(v):.17g}"
    if isinstance(v, float):
        return f"{v:.17g}"
    return v
