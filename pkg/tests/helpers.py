"""Map builders shared by several test modules."""

from __future__ import annotations

from umt.cantor import CantorSpace, materialize
from umt.deform import chordal_extend
from umt.distort import PointMap
from umt.metric import ExtendedSpace


def chordal_identity(X, a: int) -> PointMap:
    """(X with an ideal infinity, d) -> (X with materialized infinity, d_a)."""
    ext = chordal_extend(X, a)
    inf = ext.labels[ext.infinity_index]
    source = ExtendedSpace.with_ideal_infinity(X, inf)
    return PointMap.from_labels(source, ext, {label: label for label in source.labels})


def rho_to_sigma(k: int, depth: int, lam="1/2") -> PointMap:
    """(F^depth, rho) -> (F^depth minus o, sigma) plus an ideal infinity, with o sent to infinity."""
    full = CantorSpace.full(k, depth, lam)
    source = materialize(full)
    flat = materialize(CantorSpace.full(k, depth, lam, include_base=False), "sigma")
    target = ExtendedSpace.with_ideal_infinity(flat, full.text(full.base))
    return PointMap.from_labels(source, target, {w: w for w in source.labels})
