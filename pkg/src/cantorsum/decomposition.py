"""rho-decompositions of single attractors and of products K1 x K2."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .ifs import RegularIfs, Word, cylinder_arrays

MAX_DEPTH = 200


@dataclass(frozen=True)
class RhoWords:
    """Maximal words whose cylinders still exceed rho, in lexicographic order.

    Words are packed base-m into ``codes`` alongside their ``depths``; the packed
    form caps words at floor(62 / log2 m) symbols.
    """

    rho: float
    m: int
    codes: np.ndarray
    depths: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    length: np.ndarray
    degenerate: bool = False

    def __len__(self):
        return len(self.codes)

    @cached_property
    def words(self) -> list[Word]:
        return [unpack(int(c), int(k), self.m) for c, k in zip(self.codes, self.depths)]


def max_packed_depth(m: int) -> int:
    return int(62 // math.log2(m)) if m > 1 else MAX_DEPTH


def unpack(code: int, depth: int, m: int) -> Word:
    out = []
    for _ in range(depth):
        code, r = divmod(code, m)
        out.append(r + 1)
    return Word(reversed(out))


def pack(word: Sequence[int], m: int) -> int:
    code = 0
    for s in word:
        code = code * m + (s - 1)
    return code


def rho_words(ifs: RegularIfs, rho: float,
              chart: Callable | None = None) -> RhoWords:
    """rho-decomposition of K: words u with |I(u)| > rho whose children all have |I(uj)| <= rho.

    When only some children of a long cylinder are long, the short ones are kept
    as words too (their length is still comparable to rho), so the cylinders
    always cover K.  Uniform systems never hit this case.

    ``chart`` is an optional increasing map of the hull applied to every cylinder
    before measuring it; this yields decompositions of limit geometries L(K).
    A length equal to rho counts as "not larger than rho".
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    m = ifs.m
    cap = max_packed_depth(m)

    def measure(words: np.ndarray):
        lo, hi, length = cylinder_arrays(ifs, words)
        if chart is not None:
            if hasattr(chart, "divdiff"):
                length = length * np.abs(chart.divdiff(hi, lo))
            clo, chi = chart(lo), chart(hi)
            lo, hi = np.minimum(clo, chi), np.maximum(clo, chi)
            if not hasattr(chart, "divdiff"):
                length = hi - lo
        return lo, hi, length

    root = np.zeros((1, 0), dtype=np.int64)
    rlo, rhi, rlen = measure(root)
    if not rlen[0] > rho:
        return RhoWords(rho, m, np.zeros(1, np.int64), np.zeros(1, np.int64),
                        rlo, rhi, rlen, degenerate=True)

    leaves = []  # (words array, lo, hi, length) per depth
    frontier = root
    depth = 0
    while len(frontier):
        if depth + 1 > min(cap, MAX_DEPTH):
            raise ValueError(f"rho={rho} needs words longer than {min(cap, MAX_DEPTH)} symbols")
        n = len(frontier)
        children = np.concatenate(
            [np.repeat(frontier, m, axis=0), np.tile(np.arange(m), n)[:, None]], axis=1)
        clo, chi, clen = measure(children)
        keep = clen > rho
        has_child = keep.reshape(n, m).any(axis=1)
        if not has_child.all():
            leaf = frontier[~has_child]
            llo, lhi, llen = measure(leaf)
            leaves.append((leaf, llo, lhi, llen))
        # short siblings of a long child would otherwise leave K uncovered
        stray = ~keep & np.repeat(has_child, m)
        if stray.any():
            leaves.append((children[stray], clo[stray], chi[stray], clen[stray]))
        frontier = children[keep]
        depth += 1

    codes, depths, los, his, lens = [], [], [], [], []
    for words, lo, hi, length in leaves:
        k = words.shape[1]
        c = np.zeros(len(words), dtype=np.int64)
        for pos in range(k):
            c = c * m + words[:, pos]
        codes.append(c)
        depths.append(np.full(len(words), k, dtype=np.int64))
        los.append(lo)
        his.append(hi)
        lens.append(length)
    codes = np.concatenate(codes)
    depths = np.concatenate(depths)
    kmax = int(depths.max())
    # incomparable words sort lexicographically by their codes padded to kmax symbols
    padded = codes * (m ** (kmax - depths))
    order = np.argsort(padded, kind="stable")
    return RhoWords(rho, m, codes[order], depths[order], np.concatenate(los)[order],
                    np.concatenate(his)[order], np.concatenate(lens)[order])


@dataclass(frozen=True)
class ProductSystem:
    """Pair of normalized regular i.f.s. and the derived dimensions d1, d2, d."""

    first: RegularIfs
    second: RegularIfs
    dim_depth: int | None = field(default=None, compare=False)

    def _dim(self, ifs: RegularIfs) -> float:
        from .dimension import default_depth, moran_dimension

        depth = self.dim_depth or default_depth(ifs)
        return moran_dimension(ifs, depth).value

    @cached_property
    def d1(self) -> float:
        return self._dim(self.first)

    @cached_property
    def d2(self) -> float:
        return self._dim(self.second)

    @property
    def d(self) -> float:
        return self.d1 + self.d2

    @property
    def name(self) -> str:
        return f"{self.first.name} x {self.second.name}"


@dataclass(frozen=True)
class ProductDecomposition:
    """Cartesian product of the factor decompositions; pair index i = i1 * n2 + i2."""

    system: ProductSystem
    rho: float
    first: RhoWords
    second: RhoWords

    def __len__(self):
        return len(self.first) * len(self.second)

    @cached_property
    def x_lo(self):
        return np.repeat(self.first.lo, len(self.second))

    @cached_property
    def x_hi(self):
        return np.repeat(self.first.hi, len(self.second))

    @cached_property
    def y_lo(self):
        return np.tile(self.second.lo, len(self.first))

    @cached_property
    def y_hi(self):
        return np.tile(self.second.hi, len(self.first))

    def pair(self, i: int) -> tuple[Word, Word]:
        i1, i2 = divmod(int(i), len(self.second))
        return self.first.words[i1], self.second.words[i2]

    @property
    def pairs(self) -> list[tuple[Word, Word]]:
        return [(a, b) for a in self.first.words for b in self.second.words]


def product_decomposition(sys: ProductSystem, rho: float,
                          charts: tuple | None = None) -> ProductDecomposition:
    c1, c2 = charts if charts is not None else (None, None)
    return ProductDecomposition(sys, rho, rho_words(sys.first, rho, c1),
                                rho_words(sys.second, rho, c2))


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    residual: float
    rhos: np.ndarray
    counts: np.ndarray
    constant: float  # max #Lambda(rho) * rho^d over the scales


def loglog_fit(rhos, counts) -> tuple[float, float, np.ndarray]:
    """Least-squares slope of log count against log(1/rho); returns residual vector too."""
    x = np.log(1.0 / np.asarray(rhos, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept), y - (slope * x + intercept)


def cardinality_scaling(sys: ProductSystem, rho_list: Sequence[float]) -> ScalingFit:
    """Growth exponent of #Lambda(rho); bounded above by d."""
    if len(rho_list) < 4:
        raise ValueError("need at least 4 scales")
    rhos = np.asarray(sorted(rho_list, reverse=True), dtype=float)
    counts = np.array([len(rho_words(sys.first, r)) * len(rho_words(sys.second, r))
                       for r in rhos])
    slope, intercept, res = loglog_fit(rhos, counts)
    constant = float(np.max(counts * rhos ** sys.d))
    return ScalingFit(slope, intercept, float(np.sqrt(np.mean(res ** 2))), rhos, counts, constant)


def rectangle_distances(decomp: ProductDecomposition, i: int) -> np.ndarray:
    """Euclidean distance from rectangle i to every rectangle of the decomposition."""
    dx = np.maximum(0.0, np.maximum(decomp.x_lo - decomp.x_hi[i], decomp.x_lo[i] - decomp.x_hi))
    dy = np.maximum(0.0, np.maximum(decomp.y_lo - decomp.y_hi[i], decomp.y_lo[i] - decomp.y_hi))
    return np.hypot(dx, dy)
