"""Symbolic k-Cantor sets truncated at a finite depth.

A depth-n word stands for the cylinder of all its infinite extensions, so two
distinct words share at most n-1 leading symbols and ``L(x, x)`` is infinite.
Distances are kept as integer exponents of ``lam`` (see :class:`ExactDistance`)
and only become floats when a space is materialized.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    BaseIncluded,
    BasePointArgument,
    DepthMismatch,
    InvalidParams,
    InvalidWord,
    SizeLimitExceeded,
)
from .metric import FiniteMetricSpace, make_space

INF = math.inf
MAX_DEPTH = 16
MAX_WORDS = 10**6

Exponent = Union[int, float]  # float only for +inf


@dataclass(frozen=True, order=True)
class Word:
    symbols: tuple[int, ...]

    def __post_init__(self):
        syms = tuple(int(s) for s in self.symbols)
        if not syms:
            raise InvalidWord("words have depth >= 1")
        if min(syms) < 0:
            raise InvalidWord(f"negative symbol in {syms}")
        object.__setattr__(self, "symbols", syms)

    @property
    def depth(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, i):
        return self.symbols[i]

    def text(self, k: int = 10) -> str:
        if k <= 10:
            return "".join(str(s) for s in self.symbols)
        return ".".join(str(s) for s in self.symbols)

    def __str__(self) -> str:
        return self.text(10 if max(self.symbols) < 10 else 11)

    @classmethod
    def parse(cls, text: str, k: int = 10) -> "Word":
        text = str(text).strip()
        try:
            if k <= 10 and "." not in text:
                syms = tuple(int(c) for c in text)
            else:
                syms = tuple(int(c) for c in text.split("."))
        except ValueError:
            raise InvalidWord(f"cannot parse word {text!r}") from None
        word = cls(syms)
        if max(word.symbols) >= k:
            raise InvalidWord(f"symbol >= k={k} in {text!r}")
        return word

    @classmethod
    def zeros(cls, depth: int) -> "Word":
        return cls((0,) * depth)


def _word(x) -> Word:
    if isinstance(x, Word):
        return x
    if isinstance(x, str):
        return Word.parse(x, 10 if "." not in x else 11)
    return Word(tuple(x))


@functools.total_ordering
@dataclass(frozen=True)
class ExactDistance:
    """The distance ``lam ** exponent``; an exponent of +inf is distance 0.

    Since ``0 < lam < 1`` a larger exponent is a *smaller* distance, and
    products/quotients of distances add/subtract exponents.
    """

    exponent: Exponent

    def __post_init__(self):
        e = self.exponent
        if isinstance(e, float):
            if e != INF:
                if not e.is_integer():
                    raise ValueError(f"exponent must be an integer or +inf, got {e}")
                object.__setattr__(self, "exponent", int(e))
        else:
            object.__setattr__(self, "exponent", int(e))

    @property
    def is_zero(self) -> bool:
        return self.exponent == INF

    def __lt__(self, other: "ExactDistance") -> bool:
        if not isinstance(other, ExactDistance):
            return NotImplemented
        return self.exponent > other.exponent

    def __mul__(self, other: "ExactDistance") -> "ExactDistance":
        return ExactDistance(self.exponent + other.exponent)

    def __truediv__(self, other: "ExactDistance") -> "ExactDistance":
        if other.is_zero:
            raise ZeroDivisionError("division by the zero distance")
        return ExactDistance(self.exponent - other.exponent)

    def value(self, lam) -> Fraction:
        if self.is_zero:
            return Fraction(0)
        return Fraction(lam) ** self.exponent

    def to_float(self, lam) -> float:
        return float(self.value(lam))


def common_prefix_length(x, y) -> Exponent:
    """Number of leading positions where ``x`` and ``y`` agree; +inf iff ``x == y``."""
    x, y = _word(x), _word(y)
    if x.depth != y.depth:
        raise DepthMismatch(f"depths {x.depth} and {y.depth} differ", witness=[str(x), str(y)])
    for i, (a, b) in enumerate(zip(x.symbols, y.symbols)):
        if a != b:
            return i
    return INF


def rho(x, y) -> ExactDistance:
    return ExactDistance(common_prefix_length(x, y))


def sigma(x, y, o) -> ExactDistance:
    """Flattened metric ``lam ** (L(x,y) - L(x,o) - L(y,o))`` on words other than ``o``."""
    x, y, o = _word(x), _word(y), _word(o)
    if x == o or y == o:
        raise BasePointArgument("sigma is undefined at the base point", witness=[str(x), str(y), str(o)])
    lxy = common_prefix_length(x, y)
    if lxy == INF:
        return ExactDistance(INF)
    return ExactDistance(lxy - common_prefix_length(x, o) - common_prefix_length(y, o))


def enumerate_words(k: int, depth: int) -> list[Word]:
    """All ``k ** depth`` words of the given depth in lexicographic order."""
    if k < 2:
        raise InvalidParams(f"alphabet size k={k} < 2")
    if not 1 <= depth <= MAX_DEPTH:
        raise SizeLimitExceeded(f"depth {depth} outside [1, {MAX_DEPTH}]")
    if k**depth > MAX_WORDS:
        raise SizeLimitExceeded(f"k**depth = {k ** depth} exceeds {MAX_WORDS}")
    return [Word(w) for w in itertools.product(range(k), repeat=depth)]


def _as_lambda(lam) -> Fraction:
    lam = Fraction(lam) if not isinstance(lam, str) else Fraction(lam.strip())
    if not 0 < lam < 1:
        raise InvalidParams(f"lambda must lie in (0, 1), got {lam}")
    return lam


@dataclass(frozen=True)
class CantorSpace:
    k: int
    lam: Fraction
    depth: int
    points: tuple[Word, ...]
    base: Word

    def __post_init__(self):
        object.__setattr__(self, "lam", _as_lambda(self.lam))
        object.__setattr__(self, "points", tuple(_word(p) for p in self.points))
        object.__setattr__(self, "base", _word(self.base))
        if self.k < 2:
            raise InvalidParams(f"alphabet size k={self.k} < 2")
        for w in self.points + (self.base,):
            if w.depth != self.depth:
                raise DepthMismatch(f"word {w} has depth {w.depth}, expected {self.depth}")
            if max(w.symbols) >= self.k:
                raise InvalidWord(f"word {w} uses a symbol >= k={self.k}")
        if len(set(self.points)) != len(self.points):
            raise InvalidParams("points must be distinct")

    @classmethod
    def full(cls, k: int, depth: int, lam, base=None, include_base: bool = True) -> "CantorSpace":
        base = Word.zeros(depth) if base is None else _word(base)
        words = enumerate_words(k, depth)
        if not include_base:
            words = [w for w in words if w != base]
        return cls(k, lam, depth, tuple(words), base)

    def text(self, w: Word) -> str:
        return w.text(self.k)

    @property
    def labels(self) -> list[str]:
        return [self.text(w) for w in self.points]

    def digits(self) -> np.ndarray:
        return np.array([w.symbols for w in self.points], dtype=np.int64).reshape(len(self.points), self.depth)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "lambda": f"{self.lam.numerator}/{self.lam.denominator}",
            "depth": self.depth,
            "points": self.labels,
            "base": self.text(self.base),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CantorSpace":
        k = int(data["k"])
        return cls(
            k,
            _as_lambda(str(data["lambda"])),
            int(data["depth"]),
            tuple(Word.parse(p, k) for p in data["points"]),
            Word.parse(data.get("base", "0" * int(data["depth"])), k),
        )


def prefix_length_matrix(digits: np.ndarray) -> np.ndarray:
    """Pairwise common-prefix lengths of the rows of an (n, depth) symbol array.

    The diagonal holds ``depth`` (the value no distinct pair can reach); callers
    treat it as +inf.
    """
    n, depth = digits.shape
    L = np.zeros((n, n), dtype=np.int32)
    alive = np.ones((n, n), dtype=bool)
    for i in range(depth):
        alive &= digits[:, i][:, None] == digits[:, i][None, :]
        L += alive
    return L


def prefix_lengths_to(digits: np.ndarray, word: Word) -> np.ndarray:
    target = np.array(word.symbols)
    eq = digits == target[None, :]
    return np.cumprod(eq, axis=1).sum(axis=1).astype(np.int32)


def exponent_matrix(space: CantorSpace, metric: str = "rho") -> np.ndarray:
    """Integer exponents of rho or sigma for all point pairs (diagonal is meaningless)."""
    digits = space.digits()
    L = prefix_length_matrix(digits)
    if metric == "rho":
        return L
    if metric == "sigma":
        if space.base in space.points:
            raise BaseIncluded("sigma is undefined at the base point", witness=space.text(space.base))
        lo = prefix_lengths_to(digits, space.base)
        return L - lo[:, None] - lo[None, :]
    raise InvalidParams(f"unknown metric {metric!r}")


def materialize(space: CantorSpace, metric: str = "rho", validate=None) -> FiniteMetricSpace:
    """Real distance matrix ``lam ** exponent`` with word labels.

    The returned space carries the exact Fraction distances alongside the floats.
    """
    E = exponent_matrix(space, metric)
    n = E.shape[0]
    off = ~np.eye(n, dtype=bool)
    E = np.where(off, E, 0)
    uniq, inverse = np.unique(E, return_inverse=True)
    exact_vals = np.empty(len(uniq), dtype=object)
    exact_vals[:] = [space.lam ** int(e) for e in uniq]
    float_vals = np.array([float(v) for v in exact_vals])
    inverse = inverse.reshape(E.shape)
    exact = exact_vals[inverse]
    exact[~off] = Fraction(0)
    dist = np.where(off, float_vals[inverse], 0.0)
    return make_space(dist, space.labels, exact=exact, check_triangle=validate)


def strong_triangle_violation(E: np.ndarray):
    """Exact ultrametric check on an exponent matrix (larger exponent = closer).

    Returns ``None`` when ``E[x,y] >= min(E[x,z], E[z,y])`` holds for every
    triple, else a witness ``(x, y, z)``.  Works in O(n^2): the matrix is
    ultrametric iff it coincides with its maximin (bottleneck) closure, and a
    disagreement yields a violating triple along the bottleneck path.
    """
    from .ultrametrize import minimax_closure

    n = E.shape[0]
    if n < 3:
        return None
    D = -np.asarray(E, dtype=np.int64)
    np.fill_diagonal(D, 0)
    closure, tree = minimax_closure(D, return_tree=True)
    bad = np.argwhere(closure != D)
    if not len(bad):
        return None
    x, y = (int(v) for v in bad[0])
    # walk the spanning-tree path x -> y; every step is at least as close as
    # the bottleneck, which is strictly closer than d(x, y)
    path = tree.path(x, y)
    c = closure[x, y]
    for j in range(1, len(path)):
        if D[x, path[j]] > c:
            return (x, path[j], path[j - 1])
    raise AssertionError("closure disagreement without a violating triple")


def symbol_transpositions(target: Word) -> list[dict[int, int]]:
    """Per-position permutations sending ``target`` to the all-zeros word.

    Each position swaps ``target[i]`` with 0 and fixes the rest.
    """
    perms = []
    for s in target.symbols:
        perms.append({s: 0, 0: s} if s else {})
    return perms


def apply_position_permutations(word: Word, perms: Sequence[dict[int, int]]) -> Word:
    return Word(tuple(p.get(s, s) for s, p in zip(word.symbols, perms)))


def rotate_to_base(words: Iterable[Word], target: Word) -> list[Word]:
    """Relabel symbols position by position so that ``target`` becomes 00...0.

    The map preserves common-prefix lengths, hence every rho distance.
    """
    perms = symbol_transpositions(target)
    return [apply_position_permutations(w, perms) for w in words]
