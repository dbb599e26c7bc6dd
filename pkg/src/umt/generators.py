"""Seeded random instances.

Every generator takes a ``numpy.random.Generator``; nothing touches global
random state.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams, SizeLimitExceeded
from .metric import FiniteMetricSpace, _trusted, make_space

MAX_MATRIX_POINTS = 512


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.uint64(seed % 2**64))


def random_level_tree(n: int, rng: np.random.Generator, max_branch: int = 4,
                      max_step: int = 2) -> list[tuple[int, list[int]]]:
    """Random recursive partition of ``range(n)``.

    Returns ``(level, block)`` for every internal node; levels are integers that
    strictly increase from parent to child (the root is level 0).
    """
    if max_branch < 2:
        raise InvalidParams("max_branch must be >= 2")
    nodes = []

    def split(block: list[int], level: int):
        if len(block) < 2:
            return
        nodes.append((level, block))
        m = int(rng.integers(2, min(max_branch, len(block)) + 1))
        perm = rng.permutation(block)
        # m nonempty groups: m distinct cut points
        cuts = np.sort(rng.choice(np.arange(1, len(block)), size=m - 1, replace=False))
        for part in np.split(perm, cuts):
            split(sorted(int(v) for v in part), level + int(rng.integers(1, max_step + 1)))

    split(list(range(n)), 0)
    return nodes


def ultrametric_from_levels(n: int, nodes, height: Callable[[int], float], labels=None,
                            exact_height: Optional[Callable[[int], Fraction]] = None) -> FiniteMetricSpace:
    """Fill the LCA-height matrix of a level tree (children overwrite parents)."""
    d = np.zeros((n, n))
    exact = None
    if exact_height is not None:
        exact = np.empty((n, n), dtype=object)
        exact[:, :] = Fraction(0)
    for level, block in nodes:
        idx = np.ix_(block, block)
        d[idx] = height(level)
        if exact is not None:
            exact[idx] = exact_height(level)
    np.fill_diagonal(d, 0.0)
    if exact is not None:
        for i in range(n):
            exact[i, i] = Fraction(0)
    return _trusted(d, labels if labels is not None else [str(i) for i in range(n)], exact)


def random_ultrametric(n: int, rng: np.random.Generator, lam=Fraction(1, 2), top: int = 0,
                       max_branch: int = 4, max_step: int = 2) -> FiniteMetricSpace:
    """Random dendrogram metric with heights ``lam ** (top + level)``.

    The result carries exact Fraction distances.
    """
    if not 1 <= n <= MAX_MATRIX_POINTS:
        raise SizeLimitExceeded(f"n={n} outside [1, {MAX_MATRIX_POINTS}]")
    lam = Fraction(lam)
    nodes = random_level_tree(n, rng, max_branch, max_step)
    return ultrametric_from_levels(
        n, nodes,
        lambda j: float(lam ** (top + j)),
        exact_height=lambda j: lam ** (top + j),
    )


def random_loguniform_ultrametric(n: int, rng: np.random.Generator, lo: float = 1e-3,
                                  hi: float = 1e3, max_branch: int = 4) -> FiniteMetricSpace:
    """Random dendrogram metric whose heights are log-uniform in ``[lo, hi]``.

    The root sits at ``hi``; every other node draws its height log-uniformly
    between ``lo`` and its parent's height.
    """
    nodes = random_level_tree(n, rng, max_branch, max_step=1)
    if not nodes:
        return ultrametric_from_levels(n, nodes, lambda j: 0.0)
    order = sorted(range(len(nodes)), key=lambda i: nodes[i][0])
    d = np.zeros((n, n))
    parent_height = np.full(n, hi)
    for i in order:
        level, block = nodes[i]
        ph = parent_height[block[0]]
        h = hi if level == 0 else float(np.exp(rng.uniform(np.log(lo), np.log(ph))))
        if h >= ph and level > 0:
            h = ph * 0.5
        d[np.ix_(block, block)] = h
        parent_height[block] = h
    np.fill_diagonal(d, 0.0)
    return _trusted(d, [str(i) for i in range(n)])


def random_euclidean(n: int, rng: np.random.Generator, dim: int = 2) -> FiniteMetricSpace:
    """Uniform points in the unit square (or cube) with Euclidean distances."""
    if not 1 <= n <= MAX_MATRIX_POINTS:
        raise SizeLimitExceeded(f"n={n} outside [1, {MAX_MATRIX_POINTS}]")
    pts = rng.random((n, dim))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    return make_space(d)


def line_space(xs, labels=None) -> FiniteMetricSpace:
    xs = np.asarray(xs, dtype=np.float64)
    return make_space(np.abs(xs[:, None] - xs[None, :]), labels)


def clustered_line(rng: np.random.Generator, levels: int = 3, branch=(2, 3), ratio: float = 5.0) -> FiniteMetricSpace:
    """Hierarchical clusters on the real line, uniformly disconnected by construction.

    A level-l cluster is ``branch`` copies of the level-(l-1) cluster separated
    by gaps of ``ratio`` to ``1.5 * ratio`` times the sub-cluster width, so any
    chain leaving a cluster must take one long step.
    """
    xs = np.array([0.0])
    width = 0.0
    unit = 1.0
    for _ in range(levels):
        m = int(rng.integers(branch[0], branch[1] + 1))
        gap = max(width, unit) * ratio * float(rng.uniform(1.0, 1.5))
        offsets = np.cumsum([0.0] + [width + gap] * (m - 1))
        xs = np.concatenate([xs + off for off in offsets])
        width = float(xs.max() - xs.min())
    return line_space(np.sort(xs), [f"p{i}" for i in range(len(xs))])


def _geometric_scales(rng: np.random.Generator, span: float, jitter: float) -> np.ndarray:
    q = float(rng.uniform(1.5, 3.0))
    m = int(np.floor(np.log(span) / np.log(q) + 1e-12))
    js = np.arange(-m, m + 1).astype(float)
    return q**js * (1.0 + jitter * rng.uniform(-1.0, 1.0, len(js)))


def geometric_window_ultrametric(rng: np.random.Generator, span: float = 1e3,
                                 jitter: float = 0.2) -> FiniteMetricSpace:
    """Point 0 plus points at distances ``~q**j`` from it, ``|j| <= log_q(span)``,
    with ``d(x_i, x_j) = max`` of their distances to point 0.

    A finite window of a self-similar unbounded ultrametric whose scales run
    from ``1/span`` to ``span`` around point 0 (jitter below ``(q-1)/(q+1)``
    keeps the scales strictly increasing).
    """
    h = _geometric_scales(rng, span, min(jitter, 0.2))
    full = np.concatenate([[0.0], h])
    d = np.maximum(full[:, None], full[None, :])
    np.fill_diagonal(d, 0.0)
    return make_space(d)


def geometric_window_line(rng: np.random.Generator, span: float = 1e3) -> FiniteMetricSpace:
    """``{0} and {q**j : |j| <= log_q(span)}`` on the real line."""
    return line_space(np.concatenate([[0.0], _geometric_scales(rng, span, 0.0)]))
