"""Finite metric spaces, one-point extensions and cross ratios.

Distances are float64 matrices.  A space may additionally carry an ``exact``
matrix of :class:`fractions.Fraction` values (set by the Cantor materializer
and by exact rescaling) which the exact distortion checks prefer over the
floats.

Balls are closed throughout the package: ``B(x, r) = {y : d(x, y) <= r}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import (
    AsymmetricMatrix,
    CoincidentPoints,
    DuplicatePoints,
    InvalidMatrix,
    NegativeDistance,
    NonzeroDiagonal,
    TriangleViolation,
    UnverifiedMetric,
    ZeroDenominator,
)

DEFAULT_TOL = 1e-9
# above this size construction skips the O(n^3) triangle scan unless asked
TRIANGLE_SCAN_LIMIT = 512


def _as_matrix(dist) -> np.ndarray:
    try:
        d = np.array(dist, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidMatrix(f"distance matrix is not numeric: {exc}") from exc
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InvalidMatrix(f"distance matrix must be square, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        i, j = np.argwhere(~np.isfinite(d))[0]
        raise InvalidMatrix("distance matrix has non-finite entries", witness=[int(i), int(j)])
    return d


def _labels(labels, n: int) -> tuple[str, ...]:
    if labels is None:
        return tuple(str(i) for i in range(n))
    labels = tuple(str(x) for x in labels)
    if len(labels) != n:
        raise InvalidMatrix(f"{len(labels)} labels for {n} points")
    if len(set(labels)) != n:
        raise DuplicatePoints("labels must be distinct")
    return labels


def triangle_excess(d: np.ndarray) -> tuple[float, tuple[int, int, int] | None]:
    """Largest value of ``d[i,k] - d[i,j] - d[j,k]`` over all triples.

    Returns ``(excess, (i, j, k))``; the witness is ``None`` for n < 3.
    """
    n = d.shape[0]
    if n < 3:
        return 0.0, None
    best, witness = -np.inf, None
    for j in range(n):
        excess = d - (d[:, j][:, None] + d[j, :][None, :])
        flat = int(np.argmax(excess))
        value = excess.flat[flat]
        if value > best:
            best = float(value)
            i, k = divmod(flat, n)
            witness = (i, j, k)
    return best, witness


class _DistanceData:
    verified = False

    def __init__(self, dist: np.ndarray, labels: tuple[str, ...], exact=None):
        dist = np.array(dist, dtype=np.float64)
        dist.setflags(write=False)
        self.dist = dist
        self.labels = labels
        if exact is not None:
            exact = np.array(exact, dtype=object)
            exact.setflags(write=False)
        self.exact = exact

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def __len__(self) -> int:
        return self.n

    def index(self, label: str) -> int:
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise KeyError(label) from None

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n else 0.0

    def exact_matrix(self) -> np.ndarray:
        """Distances as Fractions; float entries convert exactly."""
        if self.exact is not None:
            return self.exact
        out = np.empty(self.dist.shape, dtype=object)
        for idx, v in np.ndenumerate(self.dist):
            out[idx] = Fraction(float(v))
        return out

    def offdiag(self) -> np.ndarray:
        return self.dist[~np.eye(self.n, dtype=bool)]

    def __eq__(self, other) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.dist, other.dist)

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, labels={list(self.labels)[:6]}{'...' if self.n > 6 else ''})"


class FiniteMetricSpace(_DistanceData):
    """n labeled points with a validated symmetric distance matrix."""

    verified = True

    def subspace(self, indices: Sequence[int]) -> "FiniteMetricSpace":
        idx = list(indices)
        exact = None if self.exact is None else self.exact[np.ix_(idx, idx)]
        return _trusted(self.dist[np.ix_(idx, idx)], [self.labels[i] for i in idx], exact)

    def rescaled(self, c) -> "FiniteMetricSpace":
        """All distances multiplied by ``c > 0``; the exact matrix follows if present."""
        c_frac = Fraction(c)
        exact = None
        if self.exact is not None:
            exact = self.exact * c_frac
        return _trusted(self.dist * float(c), self.labels, exact)

    def relabeled(self, labels) -> "FiniteMetricSpace":
        return _trusted(self.dist, _labels(labels, self.n), self.exact)


class QuasiMetricSpace(_DistanceData):
    """Symmetric, positive off-diagonal matrix that has NOT been checked for the triangle inequality.

    Produced by deformations that are not guaranteed to be metrics.  Only
    operations that inspect raw distances (e.g. ultrametricity checks) accept it.
    """


def _trusted(dist, labels, exact=None) -> FiniteMetricSpace:
    space = FiniteMetricSpace.__new__(FiniteMetricSpace)
    _DistanceData.__init__(space, dist, tuple(labels), exact)
    return space


def make_space(dist, labels=None, tol: float = DEFAULT_TOL, *, exact=None,
               check_triangle: Optional[bool] = None) -> FiniteMetricSpace:
    """Validate ``dist`` and wrap it as a :class:`FiniteMetricSpace`.

    Args:
        dist: square matrix of finite nonnegative reals.
        labels: distinct point names; defaults to ``"0" .. "n-1"``.
        tol: absolute tolerance for symmetry, the zero diagonal and the
            triangle inequality.
        exact: optional matrix of Fractions mirroring ``dist``.
        check_triangle: force (True) or skip (False) the cubic triangle scan;
            by default it runs for n <= 512.

    Raises:
        InvalidMatrix, AsymmetricMatrix, NegativeDistance, NonzeroDiagonal,
        CoincidentPoints, TriangleViolation.  Each carries witness indices.
    """
    d = _as_matrix(dist)
    n = d.shape[0]
    labels = _labels(labels, n)
    if n == 0:
        raise InvalidMatrix("empty space")

    neg = np.argwhere(d < 0)
    if len(neg):
        i, j = (int(v) for v in neg[0])
        raise NegativeDistance(f"d[{i}][{j}] = {d[i, j]} < 0", witness=[i, j])
    asym = np.abs(d - d.T)
    if asym.max() > tol:
        i, j = (int(v) for v in np.unravel_index(np.argmax(asym), asym.shape))
        raise AsymmetricMatrix(f"d[{i}][{j}] = {d[i, j]} != d[{j}][{i}] = {d[j, i]}", witness=[i, j])
    diag = np.abs(np.diag(d))
    if diag.max() > tol:
        i = int(np.argmax(diag))
        raise NonzeroDiagonal(f"d[{i}][{i}] = {d[i, i]}", witness=[i, i])
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    off = d + np.eye(n)
    if off.min() <= 0:
        i, j = (int(v) for v in np.argwhere(off <= 0)[0])
        raise CoincidentPoints(f"distinct points {i}, {j} at distance 0", witness=[i, j])

    if check_triangle is None:
        check_triangle = n <= TRIANGLE_SCAN_LIMIT
    if check_triangle and n >= 3:
        excess, (i, j, k) = triangle_excess(d)
        if excess > tol:
            raise TriangleViolation(
                f"d[{i}][{k}] = {d[i, k]} > d[{i}][{j}] + d[{j}][{k}] = {d[i, j] + d[j, k]}",
                witness=[i, j, k],
            )
    return _trusted(d, labels, exact)


def make_quasi_space(dist, labels=None, exact=None) -> QuasiMetricSpace:
    d = _as_matrix(dist)
    labels = _labels(labels, d.shape[0])
    return QuasiMetricSpace(d, labels, exact)


def require_metric(space) -> FiniteMetricSpace:
    if isinstance(space, ExtendedSpace):
        space = space.base
    if not getattr(space, "verified", False):
        raise UnverifiedMetric(f"{type(space).__name__} is not a verified metric space")
    return space


@dataclass(frozen=True)
class ExtendedSpace:
    """A finite space with an optional distinguished point at infinity.

    ``infinity_index < base.n`` marks an ordinary point whose distances are
    materialized (e.g. the chordal extension).  ``infinity_index == base.n``
    adds an *ideal* point that has no finite distances; cross ratios that
    involve it use the deletion rule, which is equivalent to giving it the
    same constant distance to every other point.
    """

    base: FiniteMetricSpace
    infinity_index: Optional[int] = None
    infinity_label: str = "inf"

    def __post_init__(self):
        if self.infinity_index is not None and not 0 <= self.infinity_index <= self.base.n:
            raise InvalidMatrix(f"infinity index {self.infinity_index} out of range")
        if self.ideal and self.infinity_label in self.base.labels:
            raise DuplicatePoints(f"label {self.infinity_label!r} already used")

    @classmethod
    def plain(cls, space: FiniteMetricSpace) -> "ExtendedSpace":
        return cls(space, None)

    @classmethod
    def with_ideal_infinity(cls, space: FiniteMetricSpace, label: str = "inf") -> "ExtendedSpace":
        return cls(space, space.n, label)

    @property
    def ideal(self) -> bool:
        return self.infinity_index is not None and self.infinity_index == self.base.n

    @property
    def n(self) -> int:
        return self.base.n + (1 if self.ideal else 0)

    @property
    def labels(self) -> tuple[str, ...]:
        if self.ideal:
            return self.base.labels + (self.infinity_label,)
        return self.base.labels

    def index(self, label: str) -> int:
        return self.labels.index(str(label))

    def finite_indices(self) -> list[int]:
        """Indices of every point except the marked infinity point."""
        return [i for i in range(self.n) if i != self.infinity_index]

    def cross_ratio_matrix(self) -> np.ndarray:
        """Distance matrix where an ideal infinity sits at distance 1 from everything.

        Plugging this into the four-point formula reproduces the deletion rule.
        """
        if not self.ideal:
            return np.asarray(self.base.dist)
        n = self.n
        out = np.ones((n, n))
        out[:-1, :-1] = self.base.dist
        out[-1, -1] = 0.0
        return out

    def exact_cross_ratio_matrix(self) -> np.ndarray:
        base = self.base.exact_matrix()
        if not self.ideal:
            return base
        n = self.n
        out = np.empty((n, n), dtype=object)
        out[:, :] = Fraction(1)
        out[:-1, :-1] = base
        out[-1, -1] = Fraction(0)
        return out


def as_extended(space) -> ExtendedSpace:
    if isinstance(space, ExtendedSpace):
        return space
    return ExtendedSpace.plain(space)


@dataclass(frozen=True)
class CrossRatio:
    value: float

    def __float__(self) -> float:
        return self.value


def cross_ratio(space, x: int, y: int, z: int, w: int) -> CrossRatio:
    """``r(x,y,z,w) = d(x,z) d(y,w) / (d(x,y) d(z,w))``.

    Factors involving an ideal infinity point are dropped, so for example
    ``r(x, y, z, inf) = d(x, z) / d(x, y)``.
    """
    space = as_extended(space)
    pts = (x, y, z, w)
    if len(set(pts)) != 4:
        raise DuplicatePoints(f"cross ratio needs four distinct points, got {pts}", witness=list(pts))
    for p in pts:
        if not 0 <= p < space.n:
            raise IndexError(p)
    inf = space.infinity_index if space.ideal else None

    def dd(a, b):
        if inf is not None and inf in (a, b):
            return 1.0
        return float(space.base.dist[a, b])

    den = dd(x, y) * dd(z, w)
    if den == 0:
        raise ZeroDenominator(f"zero denominator for {pts}", witness=list(pts))
    return CrossRatio(dd(x, z) * dd(y, w) / den)
