"""JSON reading and writing for spaces, Cantor sets, dendrograms and maps.

Space files come in two shapes:

* matrix: ``{"labels": [...], "dist": [[...]], "infinity": optional label}``;
  entries are decimal numbers or ``"p/q"`` strings (kept exact);
* Cantor: ``{"k", "lambda", "depth", "points", "base"}`` plus an optional
  ``"metric": "rho" | "sigma"`` (default rho), materialized on load.

An ``"infinity"`` label naming one of the points marks it as the (materialized)
point at infinity; a label not among the points adds an ideal infinity point.
A ``"quasi": true`` flag loads the matrix without metric validation.
"""

from __future__ import annotations

import json
import math
import os
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .cantor import CantorSpace, materialize
from .distort import PointMap
from .errors import InvalidMap, InvalidMatrix, InvalidParams
from .metric import ExtendedSpace, FiniteMetricSpace, QuasiMetricSpace, make_quasi_space, make_space


def _reject_constant(name: str):
    raise InvalidMatrix(f"non-finite JSON constant {name} is not allowed")


def loads(text: str) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InvalidParams(f"malformed JSON: {exc}") from None


def read_json(path) -> Any:
    return loads(Path(path).read_text(encoding="utf-8"))


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, Fraction):
        v = float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def write_output(obj, path=None) -> str:
    text = dumps(obj)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


# ------------------------------------------------------------------ spaces

def _entry(v) -> tuple[float, Fraction]:
    if isinstance(v, bool) or v is None:
        raise InvalidMatrix(f"bad matrix entry {v!r}")
    if isinstance(v, str):
        try:
            q = Fraction(v.strip())
        except (ValueError, ZeroDivisionError):
            raise InvalidMatrix(f"bad matrix entry {v!r}") from None
        return float(q), q
    if isinstance(v, (int, float)):
        if not math.isfinite(v):
            raise InvalidMatrix(f"non-finite matrix entry {v!r}")
        return float(v), Fraction(v)
    raise InvalidMatrix(f"bad matrix entry {v!r}")


def space_from_dict(data: dict, quasi: bool | None = None):
    """Parse a space JSON object into a FiniteMetricSpace, QuasiMetricSpace or ExtendedSpace."""
    if not isinstance(data, dict):
        raise InvalidMatrix("space JSON must be an object")
    if "k" in data and "points" in data:
        cantor = CantorSpace.from_dict(data)
        base = materialize(cantor, str(data.get("metric", "rho")))
    else:
        if "dist" not in data:
            raise InvalidMatrix("space JSON needs a 'dist' matrix")
        rows = data["dist"]
        if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
            raise InvalidMatrix("'dist' must be a list of rows")
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise InvalidMatrix("'dist' must be square")
        pairs = [[_entry(v) for v in r] for r in rows]
        dist = np.array([[p[0] for p in r] for r in pairs], dtype=np.float64).reshape(n, n)
        exact = None
        if any(isinstance(v, str) for r in rows for v in r):
            exact = np.empty((n, n), dtype=object)
            for i, r in enumerate(pairs):
                for j, p in enumerate(r):
                    exact[i, j] = p[1]
        is_quasi = bool(data.get("quasi", False)) if quasi is None else quasi
        labels = data.get("labels")
        base = make_quasi_space(dist, labels, exact) if is_quasi else make_space(dist, labels, exact=exact)
    inf = data.get("infinity")
    if inf is None:
        return base
    if isinstance(base, QuasiMetricSpace):
        raise InvalidParams("a quasi-metric space cannot carry an infinity point")
    inf = str(inf)
    if inf in base.labels:
        return ExtendedSpace(base, base.labels.index(inf), inf)
    return ExtendedSpace.with_ideal_infinity(base, inf)


def space_to_dict(space) -> dict:
    """Matrix JSON for any space flavour; exact distances are kept as ``"p/q"`` strings
    when they are not exactly representable as floats."""
    out: dict = {}
    if isinstance(space, ExtendedSpace):
        if space.infinity_index is not None:
            out["infinity"] = space.labels[space.infinity_index] if not space.ideal else space.infinity_label
        space = space.base
    out["labels"] = list(space.labels)
    d = np.asarray(space.dist)
    if space.exact is not None and any(Fraction(float(q)) != q for q in space.exact.flat):
        out["dist"] = [[_fraction_text(q) for q in row] for row in space.exact]
    else:
        out["dist"] = [[float(v) for v in row] for row in d]
    if isinstance(space, QuasiMetricSpace):
        out["quasi"] = True
    return out


def _fraction_text(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def load_space(path, base_dir=None):
    p = Path(path)
    if base_dir is not None and not p.is_absolute():
        p = Path(base_dir) / p
    return space_from_dict(read_json(p))


# -------------------------------------------------------------------- maps

def map_from_dict(data: dict, base_dir=None) -> PointMap:
    """``{"source": ref, "target": ref, "assignment": {src: dst}}``; a ref is a path
    (relative to ``base_dir``) or an inline space object."""
    if not isinstance(data, dict) or not {"source", "target", "assignment"} <= set(data):
        raise InvalidMap("map JSON needs 'source', 'target' and 'assignment'")

    def ref(v):
        if isinstance(v, dict):
            return space_from_dict(v)
        if isinstance(v, str):
            return load_space(v, base_dir)
        raise InvalidMap(f"bad space reference {v!r}")

    assignment = data["assignment"]
    if not isinstance(assignment, dict):
        raise InvalidMap("'assignment' must map source labels to target labels")
    return PointMap.from_labels(ref(data["source"]), ref(data["target"]),
                                {str(k): str(v) for k, v in assignment.items()})


def load_map(path) -> PointMap:
    return map_from_dict(read_json(path), base_dir=os.path.dirname(os.path.abspath(path)))
