"""Distortion of point maps between finite (extended) spaces.

Cross ratios treat an *ideal* infinity point by the deletion rule, which is
the same as giving it distance 1 to every other point (each point occurs once
in the numerator and once in the denominator, so the constant cancels).
Materialized infinity points, like the one added by the chordal extension,
are ordinary points for cross ratios.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidMap, ScanTooLarge, TooFewPoints
from .metric import ExtendedSpace, as_extended

QUAD_SCAN_LIMIT = 60
EXACT_QUAD_LIMIT = 24
SAMPLED_QUADS = 10**6


@dataclass(frozen=True)
class PointMap:
    """Injective assignment from ``source`` indices to ``target`` indices.

    Indices count an ideal infinity point (it is the last index of its space).
    """

    source: ExtendedSpace
    target: ExtendedSpace
    assignment: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "source", as_extended(self.source))
        object.__setattr__(self, "target", as_extended(self.target))
        a = tuple(int(v) for v in self.assignment)
        object.__setattr__(self, "assignment", a)
        if len(a) != self.source.n:
            raise InvalidMap(f"assignment has {len(a)} entries for {self.source.n} source points")
        if len(set(a)) != len(a):
            raise InvalidMap("assignment is not injective")
        if a and not (0 <= min(a) and max(a) < self.target.n):
            raise InvalidMap("assignment index out of range")

    @classmethod
    def identity(cls, source, target) -> "PointMap":
        return cls(source, target, tuple(range(as_extended(source).n)))

    @classmethod
    def from_labels(cls, source, target, mapping: dict) -> "PointMap":
        source, target = as_extended(source), as_extended(target)
        try:
            a = tuple(target.index(mapping[label]) for label in source.labels)
        except (KeyError, ValueError) as exc:
            raise InvalidMap(f"unmapped or unknown label: {exc}") from None
        return cls(source, target, a)

    @property
    def n(self) -> int:
        return self.source.n

    @property
    def bijective(self) -> bool:
        return self.source.n == self.target.n

    @property
    def preserves_infinity(self) -> bool:
        s, t = self.source.infinity_index, self.target.infinity_index
        return s is not None and t is not None and self.assignment[s] == t

    def finite_indices(self) -> list[int]:
        """Source indices that are neither infinity nor sent to infinity."""
        s_inf, t_inf = self.source.infinity_index, self.target.infinity_index
        return [i for i in range(self.n) if i != s_inf and self.assignment[i] != t_inf]

    def pair_matrices(self, indices: Sequence[int], exact: bool = False, cross: bool = False):
        """Source and pulled-back target matrices over ``indices``.

        With ``cross=True`` the matrices follow the cross-ratio convention for
        ideal infinity points; otherwise only finite points may be requested.
        """
        idx = list(indices)
        tidx = [self.assignment[i] for i in idx]
        if exact:
            S = self.source.exact_cross_ratio_matrix() if cross else self.source.base.exact_matrix()
            T = self.target.exact_cross_ratio_matrix() if cross else self.target.base.exact_matrix()
        else:
            S = self.source.cross_ratio_matrix() if cross else np.asarray(self.source.base.dist)
            T = self.target.cross_ratio_matrix() if cross else np.asarray(self.target.base.dist)
        return S[np.ix_(idx, idx)], T[np.ix_(tidx, tidx)]

    def labels_dict(self) -> dict[str, str]:
        return {self.source.labels[i]: self.target.labels[j] for i, j in enumerate(self.assignment)}


def compose(f: PointMap, g: PointMap) -> PointMap:
    """``g after f``; requires f's target and g's source to have the same labels."""
    if f.target.labels != g.source.labels:
        raise InvalidMap("cannot compose: intermediate spaces differ")
    return PointMap(f.source, g.target, tuple(g.assignment[j] for j in f.assignment))


@dataclass(frozen=True)
class Measurement:
    value: float
    witness: tuple = ()
    raw: Optional[float] = None
    exact: Optional[Fraction] = None
    lower_bound: bool = False

    def to_dict(self) -> dict:
        out = {"value": self.value, "witness": list(self.witness)}
        if self.raw is not None:
            out["raw"] = self.raw
        if self.exact is not None:
            out["exact"] = f"{self.exact.numerator}/{self.exact.denominator}"
        if self.lower_bound:
            out["lower_bound"] = True
        return out


@dataclass(frozen=True)
class StepData:
    """Upper envelope of (input ratio, output ratio) pairs.

    A candidate control function eta majorizes the map on the scanned tuples
    iff ``eta(t) >= out`` for every listed ``(t, out)``.
    """

    in_ratio: np.ndarray
    out_ratio: np.ndarray

    def majorized_by(self, eta) -> bool:
        return bool(np.all(np.asarray(eta(self.in_ratio)) >= self.out_ratio))

    def on_diagonal(self, rtol: float = 1e-9) -> bool:
        return bool(np.allclose(self.in_ratio, self.out_ratio, rtol=rtol, atol=0.0))

    def to_dict(self) -> dict:
        return {"in": self.in_ratio.tolist(), "out": self.out_ratio.tolist()}


def _envelope(ins: np.ndarray, outs: np.ndarray) -> StepData:
    if not len(ins):
        return StepData(np.array([]), np.array([]))
    order = np.lexsort((outs, ins))
    ins, outs = ins[order], outs[order]
    uniq, start = np.unique(ins, return_index=True)
    return StepData(uniq, np.maximum.reduceat(outs, start))


def bilipschitz_of_map(f: PointMap, exact: bool = False) -> Measurement:
    """Smallest L with ``d1/L <= d2 o f <= L d1`` over pairs of finite points.

    With ``exact=True`` the comparison runs on Fractions (the spaces' exact
    matrices when present, else the floats converted exactly); ``value`` is
    then the float of ``exact``.
    """
    idx = f.finite_indices()
    if len(idx) < 2:
        raise TooFewPoints("bilipschitz constant needs two finite points")
    S, T = f.pair_matrices(idx, exact=exact)
    if exact:
        best, witness = Fraction(1), ()
        for a, b in itertools.combinations(range(len(idx)), 2):
            r = T[a, b] / S[a, b]
            r = max(r, 1 / r)
            if r > best:
                best, witness = r, (idx[a], idx[b])
        return Measurement(float(best), witness, exact=best)
    off = ~np.eye(len(idx), dtype=bool)
    ratio = np.where(off, T / np.where(off, S, 1.0), 1.0)
    ratio = np.maximum(ratio, 1.0 / ratio)
    flat = int(np.argmax(ratio))
    a, b = divmod(flat, len(idx))
    value = float(ratio.flat[flat])
    return Measurement(max(1.0, value), (idx[a], idx[b]) if value > 1.0 else ())


def weak_qs_constant(f: PointMap, step_data: bool = True):
    """Weak quasisymmetry constant over ordered triples of finite points.

    ``H = max(1, max d2(fx, fz) / d2(fx, fy))`` over distinct x, y, z with
    ``d1(x, z) <= d1(x, y)``.  Returns ``(Measurement, StepData | None)``.
    """
    idx = f.finite_indices()
    n = len(idx)
    if n < 3:
        raise TooFewPoints("weak quasisymmetry needs three finite points")
    S, T = f.pair_matrices(idx)
    best, witness = -np.inf, ()
    ins, outs = [], []
    for x in range(n):
        # [y, z] entries: d(x, z) / d(x, y)
        sx, tx = S[x].copy(), T[x].copy()
        sx[x] = tx[x] = np.nan
        rin = sx[None, :] / sx[:, None]
        rout = tx[None, :] / tx[:, None]
        valid = (rin <= 1.0) & ~np.eye(n, dtype=bool)
        valid[x, :] = valid[:, x] = False
        cand = np.where(valid, rout, -np.inf)
        flat = int(np.argmax(cand))
        if cand.flat[flat] > best:
            best = float(cand.flat[flat])
            y, z = divmod(flat, n)
            witness = (idx[x], idx[y], idx[z])
        if step_data:
            ins.append(rin[valid])
            outs.append(rout[valid])
    steps = _envelope(np.concatenate(ins), np.concatenate(outs)) if step_data else None
    return Measurement(max(1.0, best), witness, raw=best), steps


def _quiet():
    # diagonal entries of the quadruple cubes divide by zero and are masked out
    return np.errstate(divide="ignore", invalid="ignore")


def _quad_arrays(Sx, Tx, S, T, x, n):
    """Cross ratios r(x, y, z, w) on both sides for all (y, z, w), plus the distinctness mask."""
    rs = (Sx[None, :, None] * S[:, None, :]) / (Sx[:, None, None] * S[None, :, :])
    rt = (Tx[None, :, None] * T[:, None, :]) / (Tx[:, None, None] * T[None, :, :])
    ar = np.arange(n)
    y, z, w = np.meshgrid(ar, ar, ar, indexing="ij")
    mask = (y != z) & (y != w) & (z != w) & (y != x) & (z != x) & (w != x)
    return rs, rt, mask


def _quad_indices(f: PointMap, max_points: int, force: bool):
    idx = list(range(f.n))
    if len(idx) < 4:
        raise TooFewPoints("cross ratios need four points")
    sampled = len(idx) > max_points
    if sampled and not force:
        raise ScanTooLarge(
            f"{len(idx)} points exceed the quadruple scan limit {max_points}; pass force=True to subsample"
        )
    return idx, sampled


def _sample_quads(n: int, seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    out = []
    while sum(len(o) for o in out) < count:
        q = rng.integers(0, n, size=(count, 4))
        ok = (
            (q[:, 0] != q[:, 1]) & (q[:, 0] != q[:, 2]) & (q[:, 0] != q[:, 3])
            & (q[:, 1] != q[:, 2]) & (q[:, 1] != q[:, 3]) & (q[:, 2] != q[:, 3])
        )
        out.append(q[ok])
    return np.concatenate(out)[:count]


def _cross(M, q):
    return M[q[:, 0], q[:, 2]] * M[q[:, 1], q[:, 3]] / (M[q[:, 0], q[:, 1]] * M[q[:, 2], q[:, 3]])


def weak_qm_constant(f: PointMap, step_data: bool = True, exact: bool = False,
                     max_points: int = QUAD_SCAN_LIMIT, force: bool = False, seed: int = 0):
    """Weak quasimobius constant over ordered quadruples of distinct points.

    ``K = max(1, max r(fx, fy, fz, fw))`` over quadruples with
    ``r(x, y, z, w) <= 1``.  Infinity points take part (ideal ones through the
    deletion rule).  Above ``max_points`` points the scan refuses unless
    ``force``; then 10**6 seeded random quadruples give a lower bound.
    Returns ``(Measurement, StepData | None)``.
    """
    idx, sampled = _quad_indices(f, max_points, force)
    n = len(idx)
    if exact:
        if n > EXACT_QUAD_LIMIT:
            raise ScanTooLarge(f"exact quadruple scans are limited to {EXACT_QUAD_LIMIT} points")
        S, T = f.pair_matrices(idx, exact=True, cross=True)
        best, witness, ins, outs = None, (), [], []
        for x, y, z, w in itertools.permutations(range(n), 4):
            rs = S[x, z] * S[y, w] / (S[x, y] * S[z, w])
            if rs > 1:
                continue
            rt = T[x, z] * T[y, w] / (T[x, y] * T[z, w])
            if best is None or rt > best:
                best, witness = rt, (x, y, z, w)
            ins.append(float(rs))
            outs.append(float(rt))
        steps = _envelope(np.array(ins), np.array(outs)) if step_data else None
        value = max(Fraction(1), best)
        return Measurement(float(value), witness, raw=float(best), exact=value), steps

    S, T = f.pair_matrices(idx, cross=True)
    if sampled:
        q = _sample_quads(n, seed, SAMPLED_QUADS)
        rs, rt = _cross(S, q), _cross(T, q)
        ok = rs <= 1.0
        cand = np.where(ok, rt, -np.inf)
        i = int(np.argmax(cand))
        steps = _envelope(rs[ok], rt[ok]) if step_data else None
        return Measurement(max(1.0, float(cand[i])), tuple(int(v) for v in q[i]), raw=float(cand[i]),
                           lower_bound=True), steps
    best, witness, ins, outs = -np.inf, (), [], []
    for x in range(n):
        with _quiet():
            rs, rt, mask = _quad_arrays(S[x], T[x], S, T, x, n)
            ok = mask & (rs <= 1.0)
        cand = np.where(ok, rt, -np.inf)
        flat = int(np.argmax(cand))
        if cand.flat[flat] > best:
            best = float(cand.flat[flat])
            y, z, w = np.unravel_index(flat, cand.shape)
            witness = (x, int(y), int(z), int(w))
        if step_data:
            ins.append(rs[ok])
            outs.append(rt[ok])
    steps = _envelope(np.concatenate(ins), np.concatenate(outs)) if step_data else None
    return Measurement(max(1.0, best), witness, raw=best), steps


@dataclass(frozen=True)
class MobiusResult:
    is_mobius: bool
    max_deviation: float
    witness: tuple = ()
    lower_bound: bool = False

    def __bool__(self) -> bool:
        return self.is_mobius

    def to_dict(self) -> dict:
        out = {"mobius": self.is_mobius, "max_deviation": self.max_deviation, "witness": list(self.witness)}
        if self.lower_bound:
            out["lower_bound"] = True
        return out


def _exact_mobius(f: PointMap) -> MobiusResult:
    """Exact test in O(n^2) Fraction operations.

    Write ``Q(x, y) = d2(fx, fy) / d1(x, y)``.  All cross ratios are preserved
    iff, on every 4-point set, the three products ``Q(x,y)Q(z,w)``,
    ``Q(x,z)Q(y,w)``, ``Q(x,w)Q(y,z)`` agree.  It suffices to check the 4-sets
    containing two fixed points a, b: those force ``Q(x, y) = g(x) g(y)`` for
    a single function g, which preserves every cross ratio.
    """
    S, T = f.pair_matrices(range(f.n), exact=True, cross=True)
    n = f.n
    Q = np.empty((n, n), dtype=object)
    for i in range(n):
        for j in range(n):
            Q[i, j] = T[i, j] / S[i, j] if i != j else None
    a, b = 0, 1
    worst, witness = 0.0, ()
    for x, y in itertools.combinations(range(2, n), 2):
        p1, p2, p3 = Q[x, y] * Q[a, b], Q[x, a] * Q[y, b], Q[x, b] * Q[y, a]
        if p1 == p2 == p3:
            continue
        # translate the mismatch into the cross ratio it breaks
        for quad in ((x, a, y, b), (x, a, b, y), (x, y, a, b)):
            p, q, r, s = quad
            rs = S[p, r] * S[q, s] / (S[p, q] * S[r, s])
            rt = T[p, r] * T[q, s] / (T[p, q] * T[r, s])
            dev = float(abs(rt - rs) / rs)
            if dev > worst:
                worst, witness = dev, quad
    return MobiusResult(worst == 0.0, worst, witness)


def is_mobius(f: PointMap, tol: float = 1e-9, max_points: int = QUAD_SCAN_LIMIT,
              force: bool = False, seed: int = 0) -> MobiusResult:
    """Does ``f`` preserve every cross ratio up to relative deviation ``tol``?

    ``tol == 0`` runs the exact Fraction certificate (no size limit); it is
    only meaningful when both sides carry exact distance matrices, since
    float-built spaces are compared at their rounded values.  Positive
    tolerances scan all ordered quadruples in floating point.
    """
    if f.n < 4:
        raise TooFewPoints("cross ratios need four points")
    if tol == 0:
        return _exact_mobius(f)
    idx, sampled = _quad_indices(f, max_points, force)
    n = len(idx)
    S, T = f.pair_matrices(idx, cross=True)
    if sampled:
        q = _sample_quads(n, seed, SAMPLED_QUADS)
        rs, rt = _cross(S, q), _cross(T, q)
        dev = np.abs(rt - rs) / rs
        i = int(np.argmax(dev))
        return MobiusResult(bool(dev[i] <= tol), float(dev[i]), tuple(int(v) for v in q[i]), lower_bound=True)
    worst, witness = 0.0, ()
    for x in range(n):
        with _quiet():
            rs, rt, mask = _quad_arrays(S[x], T[x], S, T, x, n)
            dev = np.where(mask, np.abs(rt - rs) / rs, 0.0)
        flat = int(np.argmax(dev))
        if dev.flat[flat] > worst:
            worst = float(dev.flat[flat])
            y, z, w = np.unravel_index(flat, dev.shape)
            witness = (x, int(y), int(z), int(w))
    return MobiusResult(worst <= tol, worst, witness)


@dataclass
class DistortionReport:
    L_bilip: Optional[Measurement] = None
    H_qs: Optional[Measurement] = None
    K_qm: Optional[Measurement] = None
    mobius: Optional[MobiusResult] = None
    qs_steps: Optional[StepData] = field(default=None, repr=False)
    qm_steps: Optional[StepData] = field(default=None, repr=False)

    def to_dict(self, steps: bool = False) -> dict:
        out = {}
        for name in ("L_bilip", "H_qs", "K_qm", "mobius"):
            v = getattr(self, name)
            out[name] = None if v is None else v.to_dict()
        if steps:
            out["qs_steps"] = None if self.qs_steps is None else self.qs_steps.to_dict()
            out["qm_steps"] = None if self.qm_steps is None else self.qm_steps.to_dict()
        return out


def distortion_report(f: PointMap, tol: float = 1e-9, max_points: int = QUAD_SCAN_LIMIT,
                      quadruples: bool = True) -> DistortionReport:
    """Every measurement that fits the scan limits; the others stay None."""
    report = DistortionReport()
    finite = len(f.finite_indices())
    if finite >= 2:
        report.L_bilip = bilipschitz_of_map(f)
    if finite >= 3:
        report.H_qs, report.qs_steps = weak_qs_constant(f)
    if quadruples and 4 <= f.n <= max_points:
        report.K_qm, report.qm_steps = weak_qm_constant(f, max_points=max_points)
        report.mobius = is_mobius(f, tol, max_points=max_points)
    return report
