"""Metric deformations: flattening (inversion), chordal extension, sphericalization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import InvalidParams, TooFewPoints
from .generators import random_ultrametric, rng_from_seed
from .metric import (
    ExtendedSpace,
    FiniteMetricSpace,
    QuasiMetricSpace,
    make_quasi_space,
    make_space,
    require_metric,
)
from .props import StrongTriangleWitness


def _check_index(space, i: int) -> int:
    if not 0 <= int(i) < space.n:
        raise IndexError(f"point index {i} out of range for n={space.n}")
    return int(i)


def invert(space: FiniteMetricSpace, o: int, tol: float = 1e-9) -> FiniteMetricSpace:
    """Flattening at ``o``: ``d(x, y) / (d(x, o) d(y, o))`` on the points other than o.

    The result is validated as a metric (ultrametric inputs always pass); an
    exact Fraction matrix is carried through when the input has one.
    """
    space = require_metric(space)
    o = _check_index(space, o)
    if space.n < 2:
        raise TooFewPoints("inversion needs a point besides the base point")
    keep = [i for i in range(space.n) if i != o]
    d = np.asarray(space.dist)
    do = d[keep, o]
    new = d[np.ix_(keep, keep)] / (do[:, None] * do[None, :])
    np.fill_diagonal(new, 0.0)
    exact = None
    if space.exact is not None:
        E = space.exact
        exact = np.empty((len(keep), len(keep)), dtype=object)
        for a, i in enumerate(keep):
            for b, j in enumerate(keep):
                exact[a, b] = E[i, j] / (E[i, o] * E[j, o])
        new = np.array([[float(v) for v in row] for row in exact])
    return make_space(new, [space.labels[i] for i in keep], tol, exact=exact)


def _inf_label(labels) -> str:
    label = "inf"
    while label in labels:
        label += "'"
    return label


def chordal_extend(space: FiniteMetricSpace, a: int, tol: float = 1e-9) -> ExtendedSpace:
    """One-point extension with the chordal metric based at ``a``.

    With ``m(x) = max(1, d(x, a))``: ``d_a(x, y) = d(x, y) / (m(x) m(y))`` and
    ``d_a(x, inf) = 1 / m(x)``.  The new point is appended last and marked.
    """
    space = require_metric(space)
    a = _check_index(space, a)
    n = space.n
    d = np.asarray(space.dist)
    m = np.maximum(1.0, d[:, a])
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = d / (m[:, None] * m[None, :])
    out[:n, n] = out[n, :n] = 1.0 / m
    exact = None
    if space.exact is not None:
        E = space.exact
        me = [max(Fraction(1), E[i, a]) for i in range(n)]
        exact = np.empty((n + 1, n + 1), dtype=object)
        for i in range(n):
            for j in range(n):
                exact[i, j] = E[i, j] / (me[i] * me[j])
            exact[i, n] = exact[n, i] = 1 / me[i]
        exact[n, n] = Fraction(0)
        out = np.array([[float(v) for v in row] for row in exact])
    labels = list(space.labels) + [_inf_label(space.labels)]
    return ExtendedSpace(make_space(out, labels, tol, exact=exact), n)


def sphericalize(space: FiniteMetricSpace, p: int) -> QuasiMetricSpace:
    """``s_p(x, y) = d(x, y) / ((1 + d(x, p)) (1 + d(y, p)))`` on the same points.

    Not validated: the result need not satisfy the triangle inequality, let
    alone the strong one, so it comes back as a :class:`QuasiMetricSpace`.
    """
    space = require_metric(space)
    p = _check_index(space, p)
    d = np.asarray(space.dist)
    w = 1.0 + d[:, p]
    out = d / (w[:, None] * w[None, :])
    exact = None
    if space.exact is not None:
        E = space.exact
        we = [1 + E[i, p] for i in range(space.n)]
        exact = np.empty(E.shape, dtype=object)
        for i in range(space.n):
            for j in range(space.n):
                exact[i, j] = E[i, j] / (we[i] * we[j])
    return make_quasi_space(out, space.labels, exact)


@dataclass(frozen=True)
class DeformationWitness(StrongTriangleWitness):
    """A strong-triangle violation of ``s_p`` on a concrete ultrametric space."""

    dist: tuple[tuple[float, ...], ...] = field(default=())
    p: int = 0
    source: str = ""

    def space(self) -> FiniteMetricSpace:
        return make_space(np.array(self.dist))

    def reverify(self, margin: float = 0.0) -> bool:
        """Recompute the sphericalization from ``dist`` and confirm the violation."""
        s = np.asarray(sphericalize(self.space(), self.p).dist)
        x, y, z = self.triple
        lhs, rhs = s[x, y], max(s[x, z], s[z, y])
        return bool(lhs > rhs * (1.0 + margin))

    def to_dict(self) -> dict:
        out = super().to_dict()
        out.update({"dist": [list(r) for r in self.dist], "p": self.p, "source": self.source})
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DeformationWitness":
        return cls(
            tuple(int(v) for v in data["triple"]),
            float(data["lhs"]),
            float(data["rhs"]),
            tuple(tuple(float(v) for v in r) for r in data["dist"]),
            int(data["p"]),
            str(data.get("source", "")),
        )


class _Budget:
    def __init__(self, total: int):
        self.left = total

    def take(self) -> bool:
        if self.left <= 0:
            return False
        self.left -= 1
        return True


def _scan_sphericalization(space: FiniteMetricSpace, p: int, budget: _Budget, margin: float,
                           source: str) -> Optional[DeformationWitness] | bool:
    """Scan triples of ``s_p``; returns a witness, None, or False when the budget ran out."""
    s = np.asarray(sphericalize(space, p).dist)
    n = space.n
    for x, y in itertools.combinations(range(n), 2):
        for z in range(n):
            if z in (x, y):
                continue
            if not budget.take():
                return False
            lhs, rhs = s[x, y], max(s[x, z], s[z, y])
            if lhs > rhs * (1.0 + margin):
                return DeformationWitness(
                    (x, y, z), float(lhs), float(rhs),
                    tuple(tuple(float(v) for v in row) for row in space.dist), p, source,
                )
    return None


def grid_ultrametric_triangles(lam=Fraction(1, 2), exponents=range(-3, 4)):
    """All 3-point ultrametrics with a short side ``lam**b`` and two long sides ``lam**a`` (b >= a)."""
    lam = Fraction(lam)
    for a in exponents:
        for b in exponents:
            if b < a:
                continue
            long, short = float(lam**a), float(lam**b)
            yield make_space([[0, short, long], [short, 0, long], [long, long, 0]]), (a, b)


def find_sphericalization_counterexample(max_n: int = 6, seed: int = 0, budget: int = 10**4,
                                         strategy: str = "random", margin: float = 1e-6,
                                         lam=Fraction(1, 2)) -> Optional[DeformationWitness]:
    """Search ultrametric spaces for a triple where ``s_p`` breaks the strong triangle inequality.

    Args:
        max_n: largest random space size (>= 3).
        seed: seed for the random strategy.
        budget: number of triple comparisons allowed.
        strategy: ``"random"`` samples dendrogram ultrametrics with heights
            ``lam**j`` (j may be negative so distances exceed 1); ``"grid"``
            enumerates 3-point ultrametric triangles deterministically.
        margin: required relative violation ``lhs > rhs * (1 + margin)``.

    Returns:
        The first witness found, or None when the budget runs out.
    """
    if max_n < 3:
        raise InvalidParams("max_n must be >= 3")
    left = _Budget(budget)
    if strategy == "grid":
        for space, (a, b) in grid_ultrametric_triangles(lam):
            for p in range(3):
                found = _scan_sphericalization(space, p, left, margin, f"grid a={a} b={b}")
                if found is False:
                    return None
                if found is not None:
                    return found
        return None
    if strategy != "random":
        raise InvalidParams(f"unknown strategy {strategy!r}")
    rng = rng_from_seed(seed)
    trial = 0
    while left.left > 0:
        n = int(rng.integers(3, max_n + 1))
        top = int(rng.integers(-4, 1))
        space = random_ultrametric(n, rng, lam, top=top)
        for p in range(n):
            found = _scan_sphericalization(space, p, left, margin, f"random seed={seed} trial={trial}")
            if found is False:
                return None
            if found is not None:
                return found
        trial += 1
    return None
