"""Contractions of the line with closed-form first and second derivatives.

Every map here is vectorized over numpy arrays and exposes a stable divided
difference ``divdiff(x, y) = (f(x) - f(y)) / (x - y)``.  Cylinder widths and
normalized compositions are built from divided differences rather than from
differences of nearby values, so deep words keep full relative precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


def _arr(x):
    return np.asarray(x, dtype=float)


class SmoothMap:
    """Base class for the supported map kinds."""

    kind: str = "abstract"

    def __call__(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def deriv2(self, x):
        raise NotImplementedError

    def divdiff(self, x, y):
        x, y = _arr(x), _arr(y)
        same = x == y
        with np.errstate(invalid="ignore", divide="ignore"):
            q = (self(x) - self(y)) / np.where(same, 1.0, x - y)
        return np.where(same, self.deriv(x), q)

    def inverse(self, y):
        raise NotImplementedError

    def derivative_range(self, lo: float, hi: float) -> tuple[float, float]:
        """(min f', max f') over [lo, hi]; sampled unless a kind knows better."""
        xs = np.linspace(lo, hi, 257)
        d = self.deriv(xs)
        return float(d.min()), float(d.max())

    def conjugate(self, alpha: float, gamma: float) -> "SmoothMap":
        """Return S f S^-1 for S(x) = alpha x + gamma, alpha > 0."""
        raise NotImplementedError(f"{self.kind} maps cannot be conjugated")

    @property
    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class AffineMap(SmoothMap):
    a: float
    b: float = 0.0
    kind = "affine"

    def __call__(self, x):
        return self.a * _arr(x) + self.b

    def deriv(self, x):
        return np.full_like(_arr(x), self.a)

    def deriv2(self, x):
        return np.zeros_like(_arr(x))

    def divdiff(self, x, y):
        return np.full(np.broadcast(_arr(x), _arr(y)).shape, self.a)

    def inverse(self, y):
        return (_arr(y) - self.b) / self.a

    def derivative_range(self, lo, hi):
        return self.a, self.a

    def conjugate(self, alpha, gamma):
        return AffineMap(self.a, alpha * self.b + gamma - self.a * gamma)

    @property
    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class MoebiusMap(SmoothMap):
    """x -> (p x + q) / (r x + s)."""

    p: float
    q: float
    r: float
    s: float
    kind = "moebius"

    @property
    def det(self) -> float:
        return self.p * self.s - self.q * self.r

    def _den(self, x):
        return self.r * _arr(x) + self.s

    def __call__(self, x):
        return (self.p * _arr(x) + self.q) / self._den(x)

    def deriv(self, x):
        return self.det / self._den(x) ** 2

    def deriv2(self, x):
        return -2.0 * self.r * self.det / self._den(x) ** 3

    def divdiff(self, x, y):
        return self.det / (self._den(x) * self._den(y))

    def inverse(self, y):
        y = _arr(y)
        return (self.s * y - self.q) / (self.p - self.r * y)

    def pole(self) -> float | None:
        return None if self.r == 0 else -self.s / self.r

    def derivative_range(self, lo, hi):
        pole = self.pole()
        if pole is not None and lo <= pole <= hi:
            raise ValueError("pole inside domain")
        d = self.deriv(np.array([lo, hi]))
        return float(d.min()), float(d.max())

    def conjugate(self, alpha, gamma):
        # S M S^-1 as 2x2 matrices; S^-1 ~ [[1, -gamma], [0, alpha]] up to scale
        m = np.array([[self.p, self.q], [self.r, self.s]])
        s_mat = np.array([[alpha, gamma], [0.0, 1.0]])
        s_inv = np.array([[1.0, -gamma], [0.0, alpha]])
        c = s_mat @ m @ s_inv
        scale = np.max(np.abs(c))
        c = c / scale
        return MoebiusMap(float(c[0, 0]), float(c[0, 1]), float(c[1, 0]), float(c[1, 1]))

    @property
    def params(self):
        return {"p": self.p, "q": self.q, "r": self.r, "s": self.s}


def bump(t):
    """Fixed cubic bump t^2 (1 - t); vanishes at both ends of [0, 1]."""
    t = _arr(t)
    return t * t * (1.0 - t)


def bump_d1(t):
    t = _arr(t)
    return 2.0 * t - 3.0 * t * t


def bump_d2(t):
    return 2.0 - 6.0 * _arr(t)


@dataclass(frozen=True)
class PerturbedAffineMap(SmoothMap):
    """x -> a x + b + eps * w * bump((x - lo) / w) with reference interval [lo, lo + w].

    Writing the bump relative to a reference interval keeps the family closed
    under affine conjugation, which normalization needs.
    """

    a: float
    b: float
    eps: float
    ref_lo: float = 0.0
    ref_width: float = 1.0
    kind = "perturbed-affine"

    def _t(self, x):
        return (_arr(x) - self.ref_lo) / self.ref_width

    def __call__(self, x):
        return self.a * _arr(x) + self.b + self.eps * self.ref_width * bump(self._t(x))

    def deriv(self, x):
        return self.a + self.eps * bump_d1(self._t(x))

    def deriv2(self, x):
        return self.eps * bump_d2(self._t(x)) / self.ref_width

    def divdiff(self, x, y):
        s, t = self._t(x), self._t(y)
        return self.a + self.eps * ((s + t) - (s * s + s * t + t * t))

    def inverse(self, y):
        y = _arr(y)
        x = (y - self.b) / self.a
        for _ in range(50):
            step = (self(x) - y) / self.deriv(x)
            x = x - step
            if np.all(np.abs(step) <= 1e-16 * (1.0 + np.abs(x))):
                break
        return x

    def derivative_range(self, lo, hi):
        pts = [lo, hi]
        t_crit = self.ref_lo + self.ref_width / 3.0  # bump' has its vertex at t = 1/3
        if lo < t_crit < hi:
            pts.append(t_crit)
        d = self.deriv(np.array(pts))
        return float(d.min()), float(d.max())

    def conjugate(self, alpha, gamma):
        return PerturbedAffineMap(
            self.a,
            alpha * self.b + gamma - self.a * gamma,
            self.eps,
            alpha * self.ref_lo + gamma,
            alpha * self.ref_width,
        )

    @property
    def params(self):
        return {"a": self.a, "b": self.b, "eps": self.eps,
                "ref": [self.ref_lo, self.ref_lo + self.ref_width]}


class CompositeMap(SmoothMap):
    """f_1 o f_2 o ... o f_n, stored outermost first."""

    kind = "composite"

    def __init__(self, parts: Sequence[SmoothMap]):
        self.parts = tuple(parts)

    def __call__(self, x):
        x = _arr(x)
        for f in reversed(self.parts):
            x = f(x)
        return x

    def deriv(self, x):
        x = _arr(x)
        d = np.ones_like(x)
        for f in reversed(self.parts):
            d = d * f.deriv(x)
            x = f(x)
        return d

    def deriv2(self, x):
        x = _arr(x)
        d1 = np.ones_like(x)
        d2 = np.zeros_like(x)
        for f in reversed(self.parts):
            fd1, fd2 = f.deriv(x), f.deriv2(x)
            d2 = fd2 * d1 * d1 + fd1 * d2
            d1 = fd1 * d1
            x = f(x)
        return d2

    def divdiff(self, x, y):
        x, y = _arr(x), _arr(y)
        q = np.ones(np.broadcast(x, y).shape)
        for f in reversed(self.parts):
            q = q * f.divdiff(x, y)
            x, y = f(x), f(y)
        return q

    def inverse(self, y):
        y = _arr(y)
        for f in self.parts:
            y = f.inverse(y)
        return y

    def conjugate(self, alpha, gamma):
        return CompositeMap([f.conjugate(alpha, gamma) for f in self.parts])

    @property
    def params(self):
        return {"parts": [{"kind": f.kind, **f.params} for f in self.parts]}


class NormalizedComposite:
    """T_u o f_u as a chain of zooms, each an increasing diffeomorphism of [0, 1].

    A zoom of a map f on the (signed) interval [a, a + w] is
    ``t -> (f(a + t w) - f(a)) / (f(a + w) - f(a))``.  Composing zooms from the
    innermost symbol outward gives the normalized composition without ever
    subtracting nearly equal numbers.
    """

    def __init__(self, maps: Sequence[SmoothMap], hull: tuple[float, float] = (0.0, 1.0)):
        self.maps = []
        self.anchors = []
        self.widths = []
        self.scales = []
        self._a = float(hull[0])
        self._w = float(hull[1] - hull[0])
        for f in maps:
            self.push(f)

    def push(self, f: SmoothMap) -> None:
        """Compose one more map on the outside."""
        a, w = self._a, self._w
        dd = float(f.divdiff(a + w, a))
        self.maps.append(f)
        self.anchors.append(a)
        self.widths.append(w)
        self.scales.append(dd)
        self._a = float(f(a))
        self._w = dd * w

    def copy(self) -> "NormalizedComposite":
        other = NormalizedComposite([])
        other.maps = list(self.maps)
        other.anchors = list(self.anchors)
        other.widths = list(self.widths)
        other.scales = list(self.scales)
        other._a, other._w = self._a, self._w
        return other

    @property
    def image(self) -> tuple[float, float]:
        """Image of the hull under the raw composition, ordered."""
        lo, hi = self._a, self._a + self._w
        return (min(lo, hi), max(lo, hi))

    @property
    def signed_width(self) -> float:
        return self._w

    def __len__(self):
        return len(self.maps)

    def __call__(self, t):
        t = _arr(t)
        for f, a, w, dd in zip(self.maps, self.anchors, self.widths, self.scales):
            t = t * f.divdiff(a + t * w, a) / dd
        return t

    def deriv(self, t):
        t = _arr(t)
        d = np.ones_like(t)
        for f, a, w, dd in zip(self.maps, self.anchors, self.widths, self.scales):
            x = a + t * w
            d = d * f.deriv(x) / dd
            t = t * f.divdiff(x, a) / dd
        return d

    def deriv2(self, t):
        t = _arr(t)
        d1 = np.ones_like(t)
        d2 = np.zeros_like(t)
        for f, a, w, dd in zip(self.maps, self.anchors, self.widths, self.scales):
            x = a + t * w
            z1 = f.deriv(x) / dd
            z2 = w * f.deriv2(x) / dd
            d2 = z2 * d1 * d1 + z1 * d2
            d1 = z1 * d1
            t = t * f.divdiff(x, a) / dd
        return d2

    def divdiff(self, s, t):
        s, t = _arr(s), _arr(t)
        q = np.ones(np.broadcast(s, t).shape)
        for f, a, w, dd in zip(self.maps, self.anchors, self.widths, self.scales):
            xs, xt = a + s * w, a + t * w
            q = q * f.divdiff(xs, xt) / dd
            s = s * f.divdiff(xs, a) / dd
            t = t * f.divdiff(xt, a) / dd
        return q

    def inverse(self, y, tol: float = 1e-13):
        return bisect_increasing(self, y, tol=tol)


def bisect_increasing(fn, y, lo: float = 0.0, hi: float = 1.0, tol: float = 1e-13):
    """Vectorized bisection for an increasing map of [lo, hi]."""
    y = _arr(y)
    a = np.full_like(y, lo)
    b = np.full_like(y, hi)
    n_iter = int(np.ceil(np.log2(max(hi - lo, tol) / tol))) + 2
    for _ in range(n_iter):
        mid = 0.5 * (a + b)
        below = fn(mid) < y
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


class ConjugatedMap(SmoothMap):
    """g = L o f o L^-1 for an increasing diffeomorphism L of [0, 1]."""

    kind = "conjugated"

    def __init__(self, chart, f: SmoothMap):
        self.chart = chart
        self.f = f

    def __call__(self, y):
        return self.chart(self.f(self.chart.inverse(y)))

    def deriv(self, y):
        x = self.chart.inverse(y)
        return self.chart.deriv(self.f(x)) * self.f.deriv(x) / self.chart.deriv(x)

    def deriv2(self, y):
        x = self.chart.inverse(y)
        z = self.f(x)
        l1x, l2x = self.chart.deriv(x), self.chart.deriv2(x)
        l1z, l2z = self.chart.deriv(z), self.chart.deriv2(z)
        f1, f2 = self.f.deriv(x), self.f.deriv2(x)
        inner = l2z * f1 * f1 / l1x + l1z * f2 / l1x - l1z * f1 * l2x / (l1x * l1x)
        return inner / l1x

    def divdiff(self, y1, y2):
        x1, x2 = self.chart.inverse(y1), self.chart.inverse(y2)
        return (self.chart.divdiff(self.f(x1), self.f(x2)) * self.f.divdiff(x1, x2)
                / self.chart.divdiff(x1, x2))

    def inverse(self, z):
        return self.chart(self.f.inverse(self.chart.inverse(z)))
