"""Subdominant ultrametric, dendrograms and the distortion of ultrametrization.

The subdominant ultrametric ``d'(x, y)`` is the bottleneck (minimax) chain
distance: the smallest possible largest step over all chains from x to y.  It
is the largest ultrametric below ``d`` and equals the largest edge on the
minimum-spanning-tree path between x and y.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import NotUltrametric, TooFewPoints
from .metric import FiniteMetricSpace, _trusted, make_space, require_metric

HEIGHT_RTOL = 1e-12


class SpanningTree:
    """Adjacency lists of a spanning tree on ``range(n)``."""

    def __init__(self, n: int, edges: list[tuple[int, int]]):
        self.n = n
        self.edges = edges
        self.adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            self.adj[a].append(b)
            self.adj[b].append(a)

    def path(self, x: int, y: int) -> list[int]:
        prev = {x: None}
        stack = [x]
        while stack:
            u = stack.pop()
            if u == y:
                break
            for v in self.adj[u]:
                if v not in prev:
                    prev[v] = u
                    stack.append(v)
        out = [y]
        while out[-1] != x:
            out.append(prev[out[-1]])
        return out[::-1]


def minimum_spanning_tree(D: np.ndarray) -> SpanningTree:
    """Dense Prim; ties go to the lowest index so the tree is reproducible."""
    n = D.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = D[0].astype(np.float64 if D.dtype.kind == "f" else np.int64).copy()
    parent = np.zeros(n, dtype=np.int64)
    edges = []
    big = np.inf if best.dtype.kind == "f" else np.iinfo(np.int64).max
    for _ in range(n - 1):
        cand = np.where(in_tree, big, best)
        v = int(np.argmin(cand))
        in_tree[v] = True
        edges.append((int(parent[v]), v))
        closer = (D[v] < best) & ~in_tree
        best = np.where(closer, D[v], best)
        parent = np.where(closer, v, parent)
    return SpanningTree(n, edges)


def minimax_closure(D: np.ndarray, return_tree: bool = False):
    """Bottleneck distances: ``out[x, y] = min over chains of the largest step``.

    Works for any dtype with a total order (floats, or negated integer
    exponents).  Edges of the spanning tree are merged in increasing order; a
    merge of clusters A and B by an edge of weight w fixes every A-B entry to w.
    """
    D = np.asarray(D)
    n = D.shape[0]
    out = D.copy()
    if n < 2:
        return (out, SpanningTree(n, [])) if return_tree else out
    tree = minimum_spanning_tree(D)
    order = sorted(tree.edges, key=lambda e: (D[e[0], e[1]], min(e), max(e)))
    members = {i: [i] for i in range(n)}
    root = list(range(n))

    def find(i):
        while root[i] != i:
            root[i] = root[root[i]]
            i = root[i]
        return i

    for a, b in order:
        ra, rb = find(a), find(b)
        A, B = members[ra], members[rb]
        w = D[a, b]
        out[np.ix_(A, B)] = w
        out[np.ix_(B, A)] = w
        if len(A) < len(B):
            ra, rb, A, B = rb, ra, B, A
        root[rb] = ra
        A.extend(B)
        del members[rb]
    return (out, tree) if return_tree else out


def subdominant_ultrametric(space: FiniteMetricSpace) -> FiniteMetricSpace:
    """Largest ultrametric that is pointwise at most ``space``'s metric."""
    space = require_metric(space)
    closure = minimax_closure(np.asarray(space.dist))
    return make_space(closure, space.labels)


def ultrametrization_distortion(space: FiniteMetricSpace, return_witness: bool = False):
    """Bilipschitz constant of the identity between ``d`` and its subdominant ``d'``.

    Because ``d' <= d`` this is ``max d / d'`` over pairs.
    """
    space = require_metric(space)
    if space.n < 2:
        raise TooFewPoints("need at least two points")
    sub = minimax_closure(np.asarray(space.dist))
    mask = ~np.eye(space.n, dtype=bool)
    ratio = np.where(mask, space.dist / np.where(mask, sub, 1.0), 0.0)
    flat = int(np.argmax(ratio))
    L = max(1.0, float(ratio.flat[flat]))
    if return_witness:
        return L, divmod(flat, space.n)
    return L


@dataclass
class DendrogramNode:
    height: float
    leaves: tuple[int, ...]
    children: list["DendrogramNode"] = field(default_factory=list)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["DendrogramNode"]:
        yield self
        for c in self.children:
            yield from c.walk()


def _components(mask: np.ndarray) -> list[list[int]]:
    """Connected components of a symmetric boolean adjacency matrix, ordered by least index."""
    n = mask.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp, frontier = [s], [s]
        seen[s] = True
        while frontier:
            nbrs = np.flatnonzero(mask[frontier].any(axis=0) & ~seen)
            seen[nbrs] = True
            frontier = nbrs.tolist()
            comp.extend(frontier)
        comps.append(sorted(comp))
    return comps


class Dendrogram:
    """Rooted merge tree of a finite ultrametric; LCA heights are the distances."""

    def __init__(self, root: DendrogramNode, labels: tuple[str, ...]):
        self.root = root
        self.labels = tuple(labels)

    @property
    def n(self) -> int:
        return len(self.root.leaves)

    def nodes(self) -> Iterator[DendrogramNode]:
        return self.root.walk()

    def internal_nodes(self) -> list[DendrogramNode]:
        return [v for v in self.nodes() if not v.is_leaf]

    @property
    def max_children(self) -> int:
        return max((len(v.children) for v in self.internal_nodes()), default=0)

    def metric(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n, n))
        for v in self.internal_nodes():
            for a in range(len(v.children)):
                for b in range(a + 1, len(v.children)):
                    A, B = list(v.children[a].leaves), list(v.children[b].leaves)
                    out[np.ix_(A, B)] = v.height
                    out[np.ix_(B, A)] = v.height
        return out

    def canonical(self):
        """Label-aware nested form; equal for isomorphic trees with the same leaf labels."""
        def form(v):
            if v.is_leaf:
                return self.labels[v.leaves[0]]
            return (v.height, tuple(sorted((form(c) for c in v.children), key=repr)))
        return form(self.root)

    def to_dict(self) -> dict:
        def node(v):
            if v.is_leaf:
                return {"height": 0.0, "children": [], "leaf": self.labels[v.leaves[0]]}
            return {"height": v.height, "children": [node(c) for c in v.children]}
        return node(self.root)

    @classmethod
    def from_dict(cls, data: dict) -> "Dendrogram":
        labels: list[str] = []

        def node(d):
            if d.get("leaf") is not None:
                labels.append(str(d["leaf"]))
                return DendrogramNode(0.0, (len(labels) - 1,))
            children = [node(c) for c in d["children"]]
            leaves = tuple(i for c in children for i in c.leaves)
            return DendrogramNode(float(d["height"]), leaves, children)

        root = node(data)
        return cls(root, tuple(labels))


def build_dendrogram(space: FiniteMetricSpace, tol: float = HEIGHT_RTOL) -> Dendrogram:
    """Canonical merge tree of an ultrametric space.

    A node with leaf set S has height ``diam(S)``; its children are the classes
    of the relation ``d(x, y) < diam(S)`` (heights within ``tol`` relative
    count as equal).  Children are ordered by their least point index.

    Raises:
        NotUltrametric: with the maximal-violation triple from
            :func:`umt.props.check_ultrametric`.
    """
    from .props import check_ultrametric

    space = require_metric(space)
    ok, witness = check_ultrametric(space, tol)
    if not ok:
        raise NotUltrametric(
            f"not an ultrametric: d{witness.triple[:2]} = {witness.lhs} > {witness.rhs}",
            witness=list(witness.triple),
        )
    d = np.asarray(space.dist)

    def build(idx: list[int]) -> DendrogramNode:
        if len(idx) == 1:
            return DendrogramNode(0.0, (idx[0],))
        sub = d[np.ix_(idx, idx)]
        h = float(sub.max())
        below = sub < h * (1.0 - tol)
        np.fill_diagonal(below, True)
        children = [build([idx[i] for i in comp]) for comp in _components(below)]
        return DendrogramNode(h, tuple(sorted(idx)), children)

    return Dendrogram(build(list(range(space.n))), space.labels)


def dendrogram_space(tree: Dendrogram) -> FiniteMetricSpace:
    """The LCA-height ultrametric of a dendrogram."""
    return _trusted(tree.metric(), tree.labels)
