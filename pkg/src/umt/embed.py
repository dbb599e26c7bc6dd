"""Embeddings of finite ultrametric spaces into symbolic Cantor sets.

``embed_compact`` codes the dendrogram: each node of height h is quantized to
the level ``j`` with ``lam**j <= h < lam**(j-1)`` and its children receive
distinct symbol blocks starting at that position, so two points separated at
that node share exactly ``j`` leading symbols.  Nodes quantized to the same
level as their parent are merged into it first.

``embed_unbounded`` and ``uniformize`` chain the chordal extension, the
compact embedding and the flattened metric sigma, and measure the distortion
of the composed map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .cantor import CantorSpace, Word, _as_lambda, exponent_matrix, materialize, rotate_to_base
from .deform import chordal_extend
from .distort import (
    DistortionReport,
    PointMap,
    bilipschitz_of_map,
    distortion_report,
    weak_qm_constant,
)
from .errors import AlphabetTooSmall, DegenerateInput, InvalidParams, NotUltrametric
from .metric import ExtendedSpace, FiniteMetricSpace, _trusted, require_metric
from .props import PropertyReport, analyze, check_ultrametric
from .ultrametrize import DendrogramNode, build_dendrogram, subdominant_ultrametric, ultrametrization_distortion

MODES = ("exact-level", "expand-depth")


def quantize_level(h: Fraction, lam: Fraction) -> int:
    """Smallest ``j >= 0`` with ``lam**j <= h``, by exact repeated multiplication (0 < h <= 1)."""
    if not 0 < h <= 1:
        raise ValueError(f"height {h} outside (0, 1]")
    j, p = 0, Fraction(1)
    while p > h:
        p *= lam
        j += 1
    return j


def block_width(m: int, k: int) -> int:
    """``ceil(log_k m)`` in integers; at least 1."""
    b, cap = 1, k
    while cap < m:
        cap *= k
        b += 1
    return b


def block_code(i: int, b: int, k: int) -> tuple[int, ...]:
    """The i-th word of length b over ``range(k)`` in lexicographic order."""
    out = []
    for _ in range(b):
        i, r = divmod(i, k)
        out.append(r)
    return tuple(reversed(out))


@dataclass
class CodeNode:
    """A merged dendrogram node with its level and symbol block."""

    level: int
    height: Fraction
    leaves: tuple[int, ...]
    children: list["CodeNode"] = field(default_factory=list)
    start: int = 0
    width: int = 1

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


def _code_tree(node: DendrogramNode, exact_height, lam: Fraction) -> CodeNode:
    if node.is_leaf:
        return CodeNode(-1, Fraction(0), node.leaves)
    h = exact_height(node)
    out = CodeNode(quantize_level(h, lam), h, node.leaves)
    for child in node.children:
        c = _code_tree(child, exact_height, lam)
        if not c.is_leaf and c.level == out.level:
            out.children.extend(c.children)
        else:
            out.children.append(c)
    out.children.sort(key=lambda c: min(c.leaves))
    return out


@dataclass
class EmbeddingResult:
    """Realized embedding: ``words[i]`` is the image of source point i."""

    source: FiniteMetricSpace
    target: CantorSpace
    words: list[Word]
    report: DistortionReport
    stage_constants: dict = field(default_factory=dict)
    map: Optional[PointMap] = None
    properties: Optional[PropertyReport] = None

    @property
    def assignment(self) -> dict[str, str]:
        return {label: self.target.text(w) for label, w in zip(self.source.labels, self.words)}

    def to_dict(self) -> dict:
        out = {
            "target": self.target.to_dict(),
            "assignment": self.assignment,
            "report": self.report.to_dict(),
            "stage_constants": {k: _jsonable(v) for k, v in self.stage_constants.items()},
        }
        if self.properties is not None:
            out["properties"] = self.properties.to_dict()
        return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    return v


def _exact_rescaled(space: FiniteMetricSpace, scale: Fraction) -> FiniteMetricSpace:
    exact = space.exact_matrix() / scale
    return _trusted(np.asarray(space.dist) / float(scale), space.labels,
                    np.array(exact, dtype=object))


def _require_ultrametric(space: FiniteMetricSpace):
    ok, w = check_ultrametric(space, 1e-12)
    if not ok:
        raise NotUltrametric(f"not an ultrametric: triple {w.triple}", witness=list(w.triple))


def code_words(space: FiniteMetricSpace, k: int, lam: Fraction, mode: str):
    """Dendrogram coding of an ultrametric space of diameter <= 1.

    Returns ``(words, depth, tree)``; ``tree`` is the merged code tree with
    block positions filled in.
    """
    if mode not in MODES:
        raise InvalidParams(f"unknown mode {mode!r}; expected one of {MODES}")
    if k < 2:
        raise InvalidParams("k must be >= 2")
    tree = build_dendrogram(space)
    n = space.n
    if n == 1:
        return [Word((0,))], 1, None
    exact = space.exact_matrix()

    def exact_height(node: DendrogramNode) -> Fraction:
        a, b = min(node.children[0].leaves), min(node.children[1].leaves)
        return Fraction(exact[a, b])

    root = _code_tree(tree.root, exact_height, lam)
    internal = [v for v in root.walk() if not v.is_leaf]
    widest = max(len(v.children) for v in internal)
    if mode == "exact-level" and widest > k:
        node = next(v for v in internal if len(v.children) == widest)
        raise AlphabetTooSmall(
            f"a node at level {node.level} has {widest} children but k={k}; "
            f"exact-level coding needs k >= {widest}",
            minimal_k=widest,
            witness=sorted(space.labels[i] for i in node.leaves),
        )

    root.start = root.level
    stack = [root]
    while stack:
        v = stack.pop()
        v.width = 1 if mode == "exact-level" else block_width(len(v.children), k)
        for c in v.children:
            if not c.is_leaf:
                c.start = max(c.level, v.start + v.width)
                stack.append(c)
    depth = max(v.start + v.width for v in internal)
    symbols = np.zeros((n, depth), dtype=np.int64)
    for v in internal:
        for i, c in enumerate(v.children):
            code = block_code(i, v.width, k)
            symbols[np.ix_(list(c.leaves), range(v.start, v.start + v.width))] = code
    return [Word(tuple(row)) for row in symbols], depth, root


def distortion_bound(root: Optional[CodeNode], lam: Fraction) -> Fraction:
    """Proven bilipschitz bound of a realized coding: ``max (1/lam)**(start + width - level)``."""
    if root is None:
        return Fraction(1)
    return max((1 / lam) ** (v.start + v.width - v.level) for v in root.walk() if not v.is_leaf)


def embed_compact(space: FiniteMetricSpace, k: int = 2, lam="1/2", mode: str = "exact-level",
                  full_report: bool = True) -> EmbeddingResult:
    """Bilipschitz embedding of a finite ultrametric into ``(F^depth, rho_lam)``.

    Spaces of diameter above 1 are first divided by their diameter; the factor
    is recorded as ``stage_constants["scale"]`` and distortion is measured
    against the rescaled source.

    In ``exact-level`` mode every pair satisfies ``lam * d < rho(fx, fy) <= d``
    so the bilipschitz constant is below ``1/lam``; a node with more than k
    children (after merging equal levels) raises :class:`AlphabetTooSmall`
    naming the smallest workable k.  ``expand-depth`` spreads m children over
    ``ceil(log_k m)`` symbols and works for any k >= 2 with the weaker bound
    ``stage_constants["bound"]``.
    """
    space = require_metric(space)
    lam = _as_lambda(lam)
    _require_ultrametric(space)
    diam = Fraction(space.exact_matrix().max()) if space.exact is not None else Fraction(space.diameter)
    scale = diam if diam > 1 else Fraction(1)
    scaled = _exact_rescaled(space, scale)
    words, depth, root = code_words(scaled, k, lam, mode)
    target = CantorSpace(k, lam, depth, tuple(words), Word.zeros(depth))
    image = materialize(target, "rho")
    realized = PointMap.identity(scaled, image)
    if space.n >= 2:
        report = distortion_report(realized) if full_report else DistortionReport(bilipschitz_of_map(realized))
    else:
        report = DistortionReport()
    bound = distortion_bound(root, lam)
    constants = {
        "scale": scale,
        "L_embed": report.L_bilip.value if report.L_bilip else 1.0,
        "bound": bound,
        "max_children": max((len(v.children) for v in root.walk() if not v.is_leaf), default=0) if root else 0,
        "mode": mode,
    }
    return EmbeddingResult(space, target, words, report, constants, realized)


def _sigma_side(words: list[Word], inf_word: Word, k: int, lam: Fraction, depth: int):
    """Rotate so the image of infinity is 00...0 and return the rotated words of the finite points."""
    rotated = rotate_to_base(words, inf_word)
    return rotated, Word.zeros(depth)


def embed_unbounded(space: FiniteMetricSpace, a: int = 0, k: int = 2, lam="1/2",
                    mode: str = "exact-level", full_report: bool = True) -> EmbeddingResult:
    """Embedding of a finite ultrametric into ``(F^depth minus {o}, sigma_lam)``.

    Stages: chordal extension at ``a`` (re-verified ultrametric), compact
    embedding of the extension (constant ``L_stage``), symbol rotation sending
    the image of infinity to ``o = 00...0``, and the induced map into sigma.
    Because ``d(x, y) = d_a(x, y) / (d_a(x, inf) d_a(y, inf))`` and sigma has
    the same shape in rho, the result is ``L_stage**3``-bilipschitz.
    """
    space = require_metric(space)
    lam = _as_lambda(lam)
    _require_ultrametric(space)
    ext = chordal_extend(space, a)
    _require_ultrametric(ext.base)
    compact = embed_compact(ext.base, k, lam, mode, full_report=False)
    inf = ext.infinity_index
    depth = compact.target.depth
    rotated = rotate_to_base(compact.words, compact.words[inf])
    before = exponent_matrix(compact.target, "rho")
    rotated_space = CantorSpace(k, lam, depth, tuple(rotated), Word.zeros(depth))
    if not np.array_equal(before, exponent_matrix(rotated_space, "rho")):
        raise AssertionError("symbol rotation changed rho")
    finite_words = [w for i, w in enumerate(rotated) if i != inf]
    target = CantorSpace(k, lam, depth, tuple(finite_words), Word.zeros(depth))
    image = materialize(target, "sigma") if space.n >= 1 else None
    realized = PointMap.identity(space, image)
    if space.n >= 2:
        report = distortion_report(realized) if full_report else DistortionReport(bilipschitz_of_map(realized))
    else:
        report = DistortionReport()
    L_stage = compact.report.L_bilip.value
    constants = {
        "L_stage": L_stage,
        "L_total": report.L_bilip.value if report.L_bilip else 1.0,
        "L_stage_cubed": L_stage**3,
        "infinity_word": compact.target.text(compact.words[inf]),
        "depth": depth,
        "mode": mode,
    }
    return EmbeddingResult(space, target, finite_words, report, constants, realized)


def uniformize(space: FiniteMetricSpace, mode: str = "bounded", a: Optional[int] = None,
               lam="1/2", full_report: bool = True) -> EmbeddingResult:
    """Quasisymmetric uniformization pipeline into the 2-Cantor set.

    1. subdominant ultrametric, ``L1 = ultrametrization_distortion`` (at most 1/mu*);
    2. ``mode="unbounded"``: chordal extension at ``a`` (default: point 0);
    3. expand-depth coding with k = 2;
    4. ``mode="unbounded"``: rotation of infinity to o and the sigma metric.

    The report measures the composed map from the input (divided by
    ``stage_constants["scale"]`` in bounded mode).  In unbounded mode
    ``stage_constants["K_qm_rho"]`` is the weak quasimobius constant of the
    same points mapped into rho instead of sigma.
    """
    space = require_metric(space)
    lam = _as_lambda(lam)
    if space.n < 2:
        raise DegenerateInput("uniformization needs at least two points")
    if mode not in ("bounded", "unbounded"):
        raise InvalidParams(f"unknown mode {mode!r}")
    props = analyze(space)
    sub = subdominant_ultrametric(space)
    L1 = ultrametrization_distortion(space)
    constants: dict = {"L1": L1, "mu_star": props.modulus.mu}

    if mode == "bounded":
        compact = embed_compact(sub, 2, lam, "expand-depth", full_report=False)
        scale = compact.stage_constants["scale"]
        source = _exact_rescaled(space, scale)
        image = materialize(compact.target, "rho")
        realized = PointMap.identity(source, image)
        constants.update(scale=scale, L_embed=compact.stage_constants["L_embed"],
                         bound=compact.stage_constants["bound"], depth=compact.target.depth)
        report = distortion_report(realized, quadruples=full_report)
        return EmbeddingResult(space, compact.target, compact.words, report, constants, realized, props)

    a = 0 if a is None else int(a)
    ext = chordal_extend(sub, a)
    compact = embed_compact(ext.base, 2, lam, "expand-depth", full_report=False)
    inf = ext.infinity_index
    depth = compact.target.depth
    rotated = rotate_to_base(compact.words, compact.words[inf])
    finite_words = [w for i, w in enumerate(rotated) if i != inf]
    target = CantorSpace(2, lam, depth, tuple(finite_words), Word.zeros(depth))
    realized = PointMap.identity(space, materialize(target, "sigma"))
    report = distortion_report(realized, quadruples=full_report)
    constants.update(L_embed=compact.stage_constants["L_embed"], bound=compact.stage_constants["bound"],
                     depth=depth, infinity_word=compact.target.text(compact.words[inf]))
    if full_report and space.n >= 4:
        rho_map = PointMap.identity(space, materialize(target, "rho"))
        constants["K_qm_rho"] = weak_qm_constant(rho_map, step_data=False)[0].value
    return EmbeddingResult(space, target, finite_words, report, constants, realized, props)
