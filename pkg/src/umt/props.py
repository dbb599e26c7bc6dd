"""Quantitative property analyzers for finite metric spaces.

All balls are closed.  Because a finite space only changes its ball
structure at finitely many radii, every analyzer here is exact over the full
radius range it covers, not a sampled estimate:

* doubling: cover counts change only at radii ``d_ij`` (ball membership) and
  ``2 * d_ij`` (half-radius membership), so scanning those breakpoints plus
  the geometric midpoints between consecutive ones sees every value;
* uniform perfectness: for a center x with distinct distances
  ``t_1 < ... < t_m`` the annulus condition at ``r in [t_i, t_{i+1})`` needs
  ``C > r / t_i``, so the best constant is ``max t_{i+1} / t_i``;
* uniform disconnectedness: the best chain for a pair is a bottleneck path.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ExactSearchTooLarge, InvalidParams
from .metric import FiniteMetricSpace, require_metric
from .ultrametrize import minimax_closure

EXACT_COVER_LIMIT = 12


@dataclass(frozen=True)
class StrongTriangleWitness:
    """``lhs = d(x, y)`` exceeds ``rhs = max(d(x, z), d(z, y))`` for ``triple = (x, y, z)``."""

    triple: tuple[int, int, int]
    lhs: float
    rhs: float

    @property
    def relative_margin(self) -> float:
        return self.lhs / self.rhs - 1.0 if self.rhs > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"triple": list(self.triple), "lhs": self.lhs, "rhs": self.rhs}


def check_ultrametric(space, tol: float = 1e-12) -> tuple[bool, Optional[StrongTriangleWitness]]:
    """Strong triangle inequality over all triples, ``tol`` relative.

    Accepts quasi-metrics too.  On failure the witness is the triple with the
    largest ratio ``d(x,y) / max(d(x,z), d(z,y))``.
    """
    d = np.asarray(getattr(space, "dist", space), dtype=np.float64)
    n = d.shape[0]
    if n < 3:
        return True, None
    best, witness = -np.inf, None
    for z in range(n):
        m = np.maximum(d[:, z][:, None], d[z, :][None, :])
        ratio = np.divide(d, m, out=np.zeros_like(d), where=m > 0)
        flat = int(np.argmax(ratio))
        if ratio.flat[flat] > best:
            best = float(ratio.flat[flat])
            x, y = divmod(flat, n)
            witness = StrongTriangleWitness((x, y, z), float(d[x, y]), float(m[x, y]))
    if witness is not None and witness.lhs > witness.rhs * (1.0 + tol):
        return False, witness
    return True, None


# ---------------------------------------------------------------- doubling

@dataclass(frozen=True)
class DoublingResult:
    n: int
    method: str
    center: Optional[int] = None
    radius: Optional[float] = None

    def to_dict(self) -> dict:
        return {"doubling_N": self.n, "method": self.method, "center": self.center, "radius": self.radius}


def doubling_radii(d: np.ndarray) -> np.ndarray:
    """Breakpoint radii in ``[d_min, diam]`` plus geometric midpoints between them."""
    n = d.shape[0]
    off = d[~np.eye(n, dtype=bool)]
    if not len(off):
        return np.array([])
    lo, hi = off.min(), off.max()
    pts = np.unique(np.concatenate([off, 2.0 * off]))
    pts = pts[(pts >= lo) & (pts <= hi)]
    mids = np.sqrt(pts[:-1] * pts[1:])
    return np.unique(np.concatenate([pts, mids]))


def _mask(row) -> int:
    out = 0
    for i in np.flatnonzero(row):
        out |= 1 << int(i)
    return out


def _cover_sets(ball: int, half_rows: list[int]) -> list[int]:
    sets = {h & ball for h in half_rows}
    sets.discard(0)
    # drop sets strictly contained in another
    sets = sorted(sets, key=lambda s: (-bin(s).count("1"), s))
    kept: list[int] = []
    for s in sets:
        if not any(s | t == t for t in kept):
            kept.append(s)
    return kept


def _min_cover_exact(ball: int, sets: list[int]) -> int:
    """Breadth-first search over covered subsets of the ball."""
    bits = [i for i in range(ball.bit_length()) if ball >> i & 1]
    pos = {b: i for i, b in enumerate(bits)}

    def compress(s):
        out = 0
        for b in bits:
            if s >> b & 1:
                out |= 1 << pos[b]
        return out

    full = (1 << len(bits)) - 1
    csets = [compress(s) for s in sets]
    frontier, seen, steps = {0}, {0}, 0
    while full not in frontier:
        steps += 1
        nxt = set()
        for state in frontier:
            # the lowest uncovered element must be covered by some set
            low = ~state & (state + 1)
            for s in csets:
                if s & low:
                    ns = state | s
                    if ns not in seen:
                        seen.add(ns)
                        nxt.add(ns)
        frontier = nxt
    return steps


def _min_cover_greedy(ball: int, sets: list[int]) -> int:
    covered, count = 0, 0
    while covered != ball:
        best = max(sets, key=lambda s: bin(s & ~covered).count("1"))
        covered |= best
        count += 1
    return count


def doubling_constant(space: FiniteMetricSpace, mode: str = "exact") -> DoublingResult:
    """Smallest N such that every closed ball ``B(x, r)``, ``r <= diam``, is covered by
    N closed balls of radius ``r/2`` centered at points of the space.

    ``mode="exact"`` solves each minimum cover exhaustively and refuses balls
    with more than 12 points; ``mode="greedy"`` returns the greedy upper bound.
    """
    space = require_metric(space)
    if mode not in ("exact", "greedy"):
        raise InvalidParams(f"unknown doubling mode {mode!r}")
    d = np.asarray(space.dist)
    n = space.n
    best = DoublingResult(1, mode, 0 if n else None, 0.0)
    cache: dict[tuple[int, tuple[int, ...]], int] = {}
    for r in doubling_radii(d):
        balls = d <= r
        halves = [_mask(row) for row in d <= r / 2.0]
        for x in range(n):
            ball = _mask(balls[x])
            size = bin(ball).count("1")
            if size <= best.n:
                continue
            if mode == "exact" and size > EXACT_COVER_LIMIT:
                raise ExactSearchTooLarge(
                    f"ball B({x}, {r}) has {size} > {EXACT_COVER_LIMIT} points; use mode='greedy'",
                    witness=[x, float(r)],
                )
            sets = _cover_sets(ball, halves)
            key = (ball, tuple(sets))
            if key not in cache:
                cache[key] = (_min_cover_exact if mode == "exact" else _min_cover_greedy)(ball, sets)
            if cache[key] > best.n:
                best = DoublingResult(cache[key], mode, x, float(r))
    return best


# ---------------------------------------------------------- uniform perfectness

@dataclass(frozen=True)
class PerfectnessResult:
    """``C`` is the infimum of admissible constants (any larger C works).

    The witness center ``x`` has consecutive distance levels ``inner < radius``
    with ``radius / inner = C``: annuli ``B(x, r) minus B(x, r/C')`` are empty
    for ``C' < C`` as ``r`` increases to ``radius``.
    """

    C: float
    center: Optional[int] = None
    radius: Optional[float] = None
    inner: Optional[float] = None

    @property
    def vacuous(self) -> bool:
        return self.center is None

    def to_dict(self) -> dict:
        return {"perfectness_C": self.C, "center": self.center, "radius": self.radius, "inner": self.inner}


def uniform_perfectness_constant(space: FiniteMetricSpace) -> PerfectnessResult:
    """Best uniform perfectness constant over radii between each point's nearest
    neighbour distance and its farthest distance (1 when vacuous)."""
    space = require_metric(space)
    d = np.asarray(space.dist)
    best = PerfectnessResult(1.0)
    for x in range(space.n):
        levels = np.unique(d[x][np.arange(space.n) != x])
        if len(levels) < 2:
            continue
        ratios = levels[1:] / levels[:-1]
        i = int(np.argmax(ratios))
        if ratios[i] > best.C:
            best = PerfectnessResult(float(ratios[i]), x, float(levels[i + 1]), float(levels[i]))
    return best


# ------------------------------------------------------ uniform disconnectedness

@dataclass(frozen=True)
class ModulusResult:
    """Smallest ``mu`` admitting a mu-chain, with a chain attaining it."""

    mu: float
    chain: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {"ud_modulus": self.mu, "chain": list(self.chain)}


def disconnectedness_modulus(space: FiniteMetricSpace) -> ModulusResult:
    """``min over s != t and simple chains s -> ... -> t with >= 1 intermediate point
    of (largest step) / d(s, t)``.

    A chain with at least one intermediate point starts with a step ``s -> k``
    (``k != t``) and continues along a path from k to t avoiding s, so the best
    value for the pair is ``min_k max(d(s, k), W_s(k, t))`` where ``W_s`` is the
    bottleneck distance in the space with s removed.
    """
    space = require_metric(space)
    n = space.n
    if n < 3:
        return ModulusResult(1.0, ())
    d = np.asarray(space.dist)
    best_mu, best = np.inf, None
    for s in range(n):
        others = [i for i in range(n) if i != s]
        W, tree = minimax_closure(d[np.ix_(others, others)], return_tree=True)
        # rows: first hop k, columns: target t (both indices into `others`)
        M = np.maximum(d[s, others][:, None], W)
        np.fill_diagonal(M, np.inf)
        k_best = np.argmin(M, axis=0)
        vals = M[k_best, np.arange(n - 1)]
        mus = vals / d[s, others]
        j = int(np.argmin(mus))
        if mus[j] < best_mu:
            best_mu = float(mus[j])
            best = (s, others, tree, int(k_best[j]), j)
    s, others, tree, k, t = best
    chain = (s,) + tuple(others[i] for i in tree.path(k, t))
    return ModulusResult(best_mu, chain)


def chain_ratio(space: FiniteMetricSpace, chain) -> float:
    d = np.asarray(space.dist)
    steps = [d[a, b] for a, b in zip(chain, chain[1:])]
    return max(steps) / d[chain[0], chain[-1]]


# ------------------------------------------------------------------- report

@dataclass
class PropertyReport:
    is_ultrametric: bool
    ultrametric_witness: Optional[StrongTriangleWitness] = None
    doubling: Optional[DoublingResult] = None
    perfectness: Optional[PerfectnessResult] = None
    modulus: Optional[ModulusResult] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"is_ultrametric": self.is_ultrametric}
        if self.ultrametric_witness is not None:
            out["ultrametric_witness"] = self.ultrametric_witness.to_dict()
        if self.doubling is not None:
            out.update(self.doubling.to_dict())
            out["doubling_method"] = out.pop("method")
            out["doubling_witness"] = {"center": out.pop("center"), "radius": out.pop("radius")}
        if self.perfectness is not None:
            p = self.perfectness.to_dict()
            out["perfectness_C"] = p.pop("perfectness_C")
            out["perfectness_witness"] = p
        if self.modulus is not None:
            out.update(self.modulus.to_dict())
        out.update(self.extra)
        return out


def analyze(space: FiniteMetricSpace, tol: float = 1e-12, doubling_mode: str = "greedy") -> PropertyReport:
    """Run every analyzer; exact doubling falls back to greedy when a ball is too large."""
    ok, witness = check_ultrametric(space, tol)
    try:
        doubling = doubling_constant(space, doubling_mode)
    except ExactSearchTooLarge:
        doubling = doubling_constant(space, "greedy")
    return PropertyReport(
        ok,
        witness,
        doubling,
        uniform_perfectness_constant(space) if space.n >= 2 else PerfectnessResult(1.0),
        disconnectedness_modulus(space),
    )
