"""Checks for the two hypotheses: essential nonlinearity and incommensurable eigenvalues."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

import numpy as np

from .ifs import RegularIfs, all_words, cylinder_arrays
from .maps import SmoothMap


def fixed_point(f: SmoothMap, tol: float = 1e-14, lo: float = 0.0, hi: float = 1.0,
                max_iter: int = 10_000) -> float:
    """Fixed point of a contraction by iteration from the midpoint, polished by one Newton step."""
    y = 0.5 * (lo + hi)
    for _ in range(max_iter):
        ny = float(f(y))
        if abs(ny - y) < tol:
            y = ny
            break
        y = ny
    slope = float(f.deriv(y))
    if slope != 1.0:
        y -= (float(f(y)) - y) / (slope - 1.0)
    return y


def eigenvalue(ifs: RegularIfs, j: int) -> float:
    """f_j'(y_j) at the fixed point y_j of f_j."""
    f = ifs.maps[j - 1]
    return float(f.deriv(fixed_point(f, lo=ifs.hull[0], hi=ifs.hull[1])))


# --- hypothesis (1) ---------------------------------------------------------

def nonlinearity_at(fi: SmoothMap, fj: SmoothMap, y):
    """(f_i o f_j^-1)''(y) = (f_i'' f_j' - f_i' f_j'') / f_j'^3 evaluated at x = f_j^-1(y)."""
    x = fj.inverse(y)
    d1j, d2j = fj.deriv(x), fj.deriv2(x)
    return (fi.deriv2(x) * d1j - fi.deriv(x) * d2j) / d1j ** 3


@dataclass(frozen=True)
class NonlinearityWitness:
    i: int
    j: int
    point: float
    value: float  # signed (f_i o f_j^-1)'' at point
    distance_to_K: float  # bounded by the length of the cylinder whose midpoint is used
    threshold: float

    @property
    def positive(self) -> bool:
        return abs(self.value) > self.threshold


def essential_nonlinearity(ifs: RegularIfs, depth: int = 6,
                           threshold: float = 1e-9) -> NonlinearityWitness | None:
    """Largest |(f_i o f_j^-1)''| over branch pairs i < j at midpoints of depth-level cylinders in I(j).

    Returns the witness when it exceeds ``threshold``, otherwise None.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    best = None
    tails = all_words(ifs.m, depth - 1)
    for i, j in itertools.combinations(range(1, ifs.m + 1), 2):
        words = np.concatenate([np.full((len(tails), 1), j - 1), tails], axis=1)
        lo, hi, length = cylinder_arrays(ifs, words)
        mid = 0.5 * (lo + hi)
        vals = np.asarray(nonlinearity_at(ifs.maps[i - 1], ifs.maps[j - 1], mid), dtype=float)
        k = int(np.argmax(np.abs(vals)))
        cand = NonlinearityWitness(i, j, float(mid[k]), float(vals[k]), float(length[k] / 2),
                                   threshold)
        if best is None or abs(cand.value) > abs(best.value):
            best = cand
    return best if best is not None and best.positive else None


# --- hypothesis (2) ---------------------------------------------------------

def continued_fraction(x: float | Fraction, max_terms: int = 64) -> list[int]:
    """Partial quotients of x, expanded exactly from its binary value."""
    q = Fraction(x)
    out = []
    for _ in range(max_terms):
        a = math.floor(q)
        out.append(a)
        frac = q - a
        if frac == 0:
            break
        q = 1 / frac
    return out


def convergents(x: float | Fraction, max_terms: int = 64) -> Iterator[Fraction]:
    """Convergents p/q of x in increasing order of q."""
    p0, q0, p1, q1 = 0, 1, 1, 0
    for a in continued_fraction(x, max_terms):
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        yield Fraction(p1, q1)


@dataclass(frozen=True)
class CommensurabilityReport:
    r1: float
    r2: float
    ratio: float
    p: int
    q: int
    error: float
    verdict: str  # rational-within-tol | no-rational-found
    q_max: int
    tol: float
    convergents: tuple = field(default=(), repr=False)

    @property
    def incommensurable(self) -> bool:
        return self.verdict == "no-rational-found"


def incommensurability(r1: float, r2: float, q_max: int = 10 ** 6,
                       tol: float = 1e-12) -> CommensurabilityReport:
    """Search for p/q with q <= q_max and |log r1 / log r2 - p/q| < tol.

    Floats cannot decide irrationality; the verdict only states whether such a
    bounded-denominator approximation exists.
    """
    if not (0 < r1 < 1 and 0 < r2 < 1):
        raise ValueError("eigenvalue magnitudes must lie in (0, 1)")
    ratio = math.log(r1) / math.log(r2)
    if not math.isfinite(ratio):
        raise ValueError("ratio is not finite")
    seen = []
    for c in convergents(ratio):
        if c.denominator > q_max:
            break
        seen.append(c)
        err = abs(ratio - c.numerator / c.denominator)
        if err < tol:
            return CommensurabilityReport(r1, r2, ratio, c.numerator, c.denominator, err,
                                          "rational-within-tol", q_max, tol, tuple(seen))
    best = Fraction(ratio).limit_denominator(q_max)
    return CommensurabilityReport(r1, r2, ratio, best.numerator, best.denominator,
                                  abs(ratio - best.numerator / best.denominator),
                                  "no-rational-found", q_max, tol, tuple(seen))


def check_incommensurability(first: RegularIfs, second: RegularIfs, q_max: int = 10 ** 6,
                             tol: float = 1e-12) -> tuple[bool, list[CommensurabilityReport]]:
    """Scan every branch pair (l1, l2); the hypothesis holds if any pair finds no rational."""
    reports = []
    for l1 in range(1, first.m + 1):
        for l2 in range(1, second.m + 1):
            r1, r2 = abs(eigenvalue(first, l1)), abs(eigenvalue(second, l2))
            reports.append(incommensurability(r1, r2, q_max, tol))
    return any(r.incommensurable for r in reports), reports


@dataclass(frozen=True)
class ScalingResult:
    found: bool
    k: int | None
    l: int | None
    achieved: float | None
    target: float
    tol: float


def scaling_density_search(r1: float, r2: float, target: float, tol: float,
                           k_max: int = 60, sign: int = 1) -> ScalingResult:
    """Smallest (k, l) != (0, 0), by k + l then k, with |sign r2^l / r1^k - target| < tol."""
    if not (0 < r1 < 1 and 0 < r2 < 1):
        raise ValueError("ratios must lie in (0, 1)")
    for n in range(1, 2 * k_max + 1):
        for k in range(max(0, n - k_max), min(n, k_max) + 1):
            l = n - k
            val = sign * r2 ** l / r1 ** k
            if abs(val - target) < tol:
                return ScalingResult(True, k, l, val, target, tol)
    return ScalingResult(False, None, None, None, target, tol)
