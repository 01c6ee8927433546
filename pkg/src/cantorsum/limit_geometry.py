"""Limit geometries L_omega, conjugated limit systems and renormalization of slopes."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .decomposition import ProductSystem
from .ifs import (
    RegularIfs,
    Word,
    cylinder,
    cylinder_length,
    normalize,
    normalized_composite,
)
from .maps import ConjugatedMap, NormalizedComposite, bisect_increasing

GRID_NODES = 257


def chebyshev_nodes(n: int = GRID_NODES) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [0, 1], endpoints included."""
    j = np.arange(n)
    x = 0.5 * (1.0 - np.cos(np.pi * j / (n - 1)))
    x[0], x[-1] = 0.0, 1.0
    return x


@dataclass(frozen=True)
class Tail:
    """Eventually periodic infinite word: preperiod followed by period repeated forever."""

    preperiod: Word = Word()
    period: Word = Word((1,))

    def __post_init__(self):
        object.__setattr__(self, "preperiod", Word(self.preperiod))
        object.__setattr__(self, "period", Word(self.period))
        if len(self.period) == 0:
            raise ValueError("period must be nonempty")

    def prefix(self, k: int) -> Word:
        """omega | k."""
        out = list(self.preperiod[:k])
        while len(out) < k:
            out.extend(self.period[: k - len(out)])
        return Word(out)

    def prepend(self, u: Sequence[int]) -> "Tail":
        return Tail(Word(u) + self.preperiod, self.period)

    def __str__(self):
        pre = ".".join(map(str, self.preperiod))
        per = ".".join(map(str, self.period))
        return f"{pre}({per})" if pre else f"({per})"

    @classmethod
    def parse(cls, text: str) -> "Tail":
        """Parse ``"1.3(1)"`` style notation; a bare word is taken as its own period."""
        text = text.strip()
        if "(" in text:
            pre, _, rest = text.partition("(")
            return cls(Word.parse(pre.rstrip(".")) if pre.strip(".") else Word(),
                       Word.parse(rest.rstrip(")")))
        return cls(Word(), Word.parse(text))


class LimitDiffeo:
    """Approximation of L_omega = lim T_{(omega|k)*} f_{(omega|k)*}.

    Point evaluation goes through the exact zoom chain of the depth-k composite;
    values and derivatives on the Chebyshev grid back the C1 distances, the
    interpolant and the export.
    """

    def __init__(self, tail: Tail, composite: NormalizedComposite | None,
                 distances: list[float], converged: bool, nodes: np.ndarray):
        self.tail = tail
        self.composite = composite
        self.distances = distances
        self.converged = converged
        self.nodes = nodes
        if composite is None:
            self.values = nodes.copy()
            self.derivs = np.ones_like(nodes)
        else:
            self.values = composite(nodes)
            self.derivs = composite.deriv(nodes)

    @property
    def k(self) -> int:
        return len(self.distances)

    @property
    def is_identity(self) -> bool:
        return self.composite is None

    def __call__(self, t):
        return np.asarray(t, dtype=float) if self.composite is None else self.composite(t)

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        return np.ones_like(t) if self.composite is None else self.composite.deriv(t)

    def deriv2(self, t):
        t = np.asarray(t, dtype=float)
        return np.zeros_like(t) if self.composite is None else self.composite.deriv2(t)

    def divdiff(self, s, t):
        s, t = np.asarray(s, dtype=float), np.asarray(t, dtype=float)
        if self.composite is None:
            return np.ones(np.broadcast(s, t).shape)
        return self.composite.divdiff(s, t)

    def inverse(self, y, tol: float = 1e-13):
        if self.composite is None:
            return np.asarray(y, dtype=float)
        return bisect_increasing(self.composite, y, tol=tol)

    def interpolant(self) -> CubicHermiteSpline:
        """Monotone-data piecewise cubic through the stored values and derivatives."""
        return CubicHermiteSpline(self.nodes, self.values, self.derivs)

    def c1_distance(self, other: "LimitDiffeo") -> float:
        return float(max(np.max(np.abs(self.values - other.values)),
                         np.max(np.abs(self.derivs - other.derivs))))

    def derivative_band(self) -> tuple[float, float]:
        return float(self.derivs.min()), float(self.derivs.max())


def _grid_distance(a: NormalizedComposite | None, b: NormalizedComposite, nodes: np.ndarray) -> float:
    av = nodes if a is None else a(nodes)
    ad = np.ones_like(nodes) if a is None else a.deriv(nodes)
    return float(max(np.max(np.abs(b(nodes) - av)), np.max(np.abs(b.deriv(nodes) - ad))))


def sullivan_limit(ifs: RegularIfs, omega: Tail, k_max: int = 60, tol: float = 1e-10,
                   nodes: int = GRID_NODES) -> LimitDiffeo:
    """Iterate the normalized reversed compositions along omega until the C1 steps drop below tol.

    Stops at the first depth k past the preperiod where the steps of the last
    full period sum to less than ``tol``.  ``distances[k-1]`` is the grid C1 distance between the approximants of depth
    k - 1 and k (depth 0 is the identity).  Affine systems return the exact
    identity at k = 1.
    """
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    ifs = normalize(ifs)
    ifs.check_word(omega.preperiod + omega.period)
    grid = chebyshev_nodes(nodes)
    if ifs.is_affine:
        return LimitDiffeo(omega, None, [0.0], True, grid)
    word = omega.prefix(k_max)
    p = len(omega.period)
    # an affine symbol gives a zero step, so convergence is judged over a whole period
    k_min = len(omega.preperiod) + p
    prev = None
    comp = NormalizedComposite([], ifs.hull)
    distances = []
    for k in range(1, k_max + 1):
        comp.push(ifs.maps[word[k - 1] - 1])
        distances.append(_grid_distance(prev, comp, grid))
        if k >= k_min and sum(distances[-p:]) < tol:
            return LimitDiffeo(omega, comp, distances, True, grid)
        prev = comp.copy()
    warnings.warn(f"limit along {omega} did not reach tol={tol:g} within k_max={k_max}")
    return LimitDiffeo(omega, comp, distances, False, grid)


def decay_ratios(distances: Sequence[float], floor: float = 1e-14) -> np.ndarray:
    """d_{k+1} / d_k over the steps still above the rounding floor."""
    d = np.asarray(distances, dtype=float)
    ok = (d[:-1] > floor) & (d[1:] > floor)
    return d[1:][ok] / d[:-1][ok]


def limit_ifs(ifs: RegularIfs, omega: Tail | LimitDiffeo, **kwargs) -> RegularIfs:
    """The system {L f_i L^-1} whose attractor is the limit geometry L(K)."""
    ifs = normalize(ifs)
    L = omega if isinstance(omega, LimitDiffeo) else sullivan_limit(ifs, omega, **kwargs)
    if L.is_identity:
        return ifs
    if not L.converged:
        raise ValueError(f"limit along {L.tail} has not converged")
    maps = tuple(ConjugatedMap(L, f) for f in ifs.maps)
    # validation runs on the conjugated maps; a failure means the approximation broke an invariant
    return RegularIfs(maps, (0.0, 1.0), name=f"L[{L.tail}]{ifs.name}")


@dataclass(frozen=True)
class RenormalizedState:
    omega1: Tail
    omega2: Tail
    s: float


def renormalize(state: RenormalizedState, u1: Sequence[int], u2: Sequence[int],
                sys: ProductSystem) -> RenormalizedState:
    """R_{u1,u2}(omega1, omega2, s) = (u1 omega1, u2 omega2, |I2(u2)| / |I1(u1)| s)."""
    sys.first.check_word(u1)
    sys.second.check_word(u2)
    ratio = cylinder_length(sys.second, u2) / sys.second.hull_length
    ratio /= cylinder_length(sys.first, u1) / sys.first.hull_length
    return RenormalizedState(state.omega1.prepend(u1), state.omega2.prepend(u2), state.s * ratio)


@dataclass
class LinearCheck:
    part_i: float  # sup over the grid of |L_{u 1^inf} - T_{u*} f_{u*}|
    part_iii: float  # | |h_{v*}(I)| - |I((vu)*)| / |I(u*)| |
    lhs: float
    rhs: float
    limit: LimitDiffeo = field(repr=False)


def _apply(maps, word: Sequence[int], lo: float, hi: float) -> tuple[float, float]:
    """Image of [lo, hi] under the composition h_{word} (last symbol applied first)."""
    for s in reversed(word):
        f = maps[s - 1]
        a, b = float(f(lo)), float(f(hi))
        lo, hi = min(a, b), max(a, b)
    return lo, hi


def lemma_linear_check(ifs: RegularIfs, u: Sequence[int], v: Sequence[int],
                       k_max: int = 60, tol: float = 1e-13) -> LinearCheck:
    """Both sides of the cylinder-length identity for the system conjugated by L_{u 1^inf}."""
    ifs = normalize(ifs)
    if not ifs.maps[0].kind == "affine":
        raise ValueError("f_1 must be affine")
    u, v = Word(u), Word(v)
    L = sullivan_limit(ifs, Tail(u, Word((1,))), k_max=max(k_max, len(u) + 2), tol=tol)

    grid = L.nodes
    direct = grid if len(u) == 0 else normalized_composite(ifs, u.star())(grid)
    part_i = float(np.max(np.abs(L(grid) - direct)))

    if L.is_identity:
        h = ifs.maps
    else:
        h = tuple(ConjugatedMap(L, f) for f in ifs.maps)
    lo, hi = _apply(h, v.star(), 0.0, 1.0)
    lhs = hi - lo
    rhs = cylinder(ifs, (v + u).star()).length / (cylinder(ifs, u.star()).length if u else 1.0)
    return LinearCheck(part_i, abs(lhs - rhs), lhs, rhs, L)


@dataclass(frozen=True)
class EigenCheck:
    symbol: int
    fixed_point: float
    eigenvalue: float
    conjugated_slope: float
    max_second_derivative: float


def eigenvalue_check(ifs: RegularIfs, j: int, tol: float = 1e-12, samples: int = 65) -> EigenCheck:
    """g_j = L_{j^inf} f_j L_{j^inf}^-1 should be affine with slope f_j'(fixed point)."""
    from .hypotheses import fixed_point

    ifs = normalize(ifs)
    f = ifs.maps[j - 1]
    p = fixed_point(f, lo=0.0, hi=1.0)
    L = sullivan_limit(ifs, Tail(Word(), Word((j,))), tol=tol)
    g = f if L.is_identity else ConjugatedMap(L, f)
    # sample inside the image of g so both L^-1 and f stay on [0, 1]
    ys = np.linspace(0.0, 1.0, samples)
    slopes = np.asarray(g.deriv(ys), dtype=float)
    second = np.asarray(g.deriv2(ys), dtype=float)
    return EigenCheck(j, p, float(f.deriv(p)), float(np.median(slopes)),
                      float(np.max(np.abs(second))))
