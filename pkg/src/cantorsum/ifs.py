"""Regular iterated function systems on the line: words, cylinders, normalization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .maps import (
    AffineMap,
    CompositeMap,
    MoebiusMap,
    NormalizedComposite,
    PerturbedAffineMap,
    SmoothMap,
)

HULL_TOL = 1e-14
HULL_MAX_ITER = 200


class IfsError(ValueError):
    """An i.f.s. violates one of the regularity invariants."""


class Word(tuple):
    """Finite word over {1..m}; symbols are 1-based."""

    def __new__(cls, symbols: Iterable[int] = ()):
        return super().__new__(cls, (int(s) for s in symbols))

    def __add__(self, other):
        return Word(tuple(self) + tuple(other))

    def __radd__(self, other):
        return Word(tuple(other) + tuple(self))

    def __getitem__(self, item):
        out = super().__getitem__(item)
        return Word(out) if isinstance(item, slice) else out

    def star(self) -> "Word":
        """Reversed word u*."""
        return Word(reversed(self))

    def is_prefix_of(self, other: Sequence[int]) -> bool:
        return len(self) <= len(other) and tuple(other[: len(self)]) == tuple(self)

    def __repr__(self):
        return f"Word({','.join(map(str, self))})"

    def __str__(self):
        return ".".join(map(str, self))

    @classmethod
    def parse(cls, text: str) -> "Word":
        text = text.strip()
        if not text:
            return cls()
        sep = "." if "." in text else ","
        if sep in text:
            return cls(int(s) for s in text.split(sep))
        return cls(int(ch) for ch in text)


@dataclass(frozen=True)
class CylinderInterval:
    word: Word
    lo: float
    hi: float
    length: float


def _images(maps: Sequence[SmoothMap], lo: float, hi: float) -> np.ndarray:
    """Ordered images [min, max] of [lo, hi] under each monotone map."""
    out = np.empty((len(maps), 2))
    for i, f in enumerate(maps):
        e = np.array([f(lo), f(hi)], dtype=float).ravel()
        out[i] = (e.min(), e.max())
    return out


def attractor_hull(maps: Sequence[SmoothMap], start: tuple[float, float] = (0.0, 1.0),
                   tol: float = HULL_TOL, max_iter: int = HULL_MAX_ITER) -> tuple[float, float]:
    """Convex hull of the attractor by iterating the hull map to its fixed point."""
    lo, hi = map(float, start)
    for _ in range(max_iter):
        im = _images(maps, lo, hi)
        new_lo, new_hi = float(im[:, 0].min()), float(im[:, 1].max())
        done = abs(new_lo - lo) <= tol and abs(new_hi - hi) <= tol
        lo, hi = new_lo, new_hi
        if done:
            break
    return lo, hi


@dataclass(frozen=True)
class RegularIfs:
    """Validated C^2 i.f.s. with pairwise disjoint first-level images of the hull."""

    maps: tuple
    hull: tuple[float, float]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "hull", (float(self.hull[0]), float(self.hull[1])))
        self.validate()

    @classmethod
    def build(cls, maps: Sequence[SmoothMap], start: tuple[float, float] = (0.0, 1.0),
              name: str = "") -> "RegularIfs":
        """Compute the attractor hull from ``start`` and validate."""
        if len(maps) < 2:
            raise IfsError("need at least two maps")
        return cls(tuple(maps), attractor_hull(maps, start), name=name)

    def validate(self) -> None:
        lo, hi = self.hull
        if not hi > lo:
            raise IfsError(f"degenerate hull [{lo}, {hi}]")
        if len(self.maps) < 2:
            raise IfsError("need at least two maps")
        _check_contraction(self.maps, lo, hi)
        im = _images(self.maps, lo, hi)
        order = np.argsort(im[:, 0], kind="stable")
        for i, j in zip(order[:-1], order[1:]):
            if im[j, 0] <= im[i, 1]:
                raise IfsError(
                    f"disjointness violated: images of maps {i + 1} and {j + 1} overlap "
                    f"([{im[i, 0]:.6g}, {im[i, 1]:.6g}] vs [{im[j, 0]:.6g}, {im[j, 1]:.6g}])"
                )
        if im[:, 0].min() < lo - 1e-9 or im[:, 1].max() > hi + 1e-9:
            raise IfsError("hull is not invariant: some image leaves the hull")

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def hull_length(self) -> float:
        return self.hull[1] - self.hull[0]

    @property
    def is_normalized(self) -> bool:
        return self.hull == (0.0, 1.0)

    @property
    def is_affine(self) -> bool:
        return all(isinstance(f, AffineMap) for f in self.maps)

    def orientation(self, u: Sequence[int]) -> int:
        """+1 if f_u preserves orientation, else -1."""
        sign = 1
        for s in u:
            if self.maps[s - 1].deriv(self.hull[0]) < 0:
                sign = -sign
        return sign

    def check_word(self, u: Sequence[int]) -> None:
        for s in u:
            if not 1 <= s <= self.m:
                raise IfsError(f"symbol {s} out of range 1..{self.m}")


def _check_contraction(maps: Sequence[SmoothMap], lo: float, hi: float) -> None:
    for i, f in enumerate(maps):
        try:
            dmin, dmax = f.derivative_range(lo, hi)
        except ValueError as exc:
            raise IfsError(f"map {i + 1}: {exc}") from None
        if dmin * dmax <= 0:
            raise IfsError(f"injectivity violated by map {i + 1}: derivative changes sign")
        sup = max(abs(dmin), abs(dmax))
        if not sup < 1:
            raise IfsError(f"contraction violated by map {i + 1}: sup|f'| = {sup:.6g}")


def compose(ifs: RegularIfs, u: Sequence[int]) -> SmoothMap:
    """f_u = f_{u_1} o ... o f_{u_j}; the empty word gives the identity."""
    ifs.check_word(u)
    if len(u) == 0:
        return AffineMap(1.0, 0.0)
    return CompositeMap([ifs.maps[s - 1] for s in u])


def normalized_composite(ifs: RegularIfs, u: Sequence[int]) -> NormalizedComposite:
    """T_u o f_u viewed as a map of the hull onto [0, 1] (increasing)."""
    ifs.check_word(u)
    return NormalizedComposite([ifs.maps[s - 1] for s in reversed(u)], ifs.hull)


def cylinder_arrays(ifs: RegularIfs, words: np.ndarray):
    """Cylinder (lo, hi, length) for an (n, k) array of 0-based symbols.

    The length is carried as a product of divided differences, so it keeps full
    relative precision even when hi - lo would cancel.
    """
    words = np.asarray(words, dtype=np.int64)
    if words.ndim != 2:
        raise ValueError("words must be a 2-D array")
    n, k = words.shape
    a = np.full(n, ifs.hull[0])
    w = np.full(n, ifs.hull_length)
    for pos in range(k - 1, -1, -1):
        col = words[:, pos]
        new_a = np.empty(n)
        new_w = np.empty(n)
        for j, f in enumerate(ifs.maps):
            mask = col == j
            if not mask.any():
                continue
            aj, wj = a[mask], w[mask]
            new_a[mask] = f(aj)
            new_w[mask] = f.divdiff(aj + wj, aj) * wj
        a, w = new_a, new_w
    lo = np.minimum(a, a + w)
    hi = np.maximum(a, a + w)
    return lo, hi, np.abs(w)


def cylinder(ifs: RegularIfs, u: Sequence[int]) -> CylinderInterval:
    """I(u), the convex hull of f_u(K)."""
    ifs.check_word(u)
    arr = np.array([[s - 1 for s in u]], dtype=np.int64).reshape(1, len(u))
    lo, hi, length = cylinder_arrays(ifs, arr)
    return CylinderInterval(Word(u), float(lo[0]), float(hi[0]), float(length[0]))


def cylinder_length(ifs: RegularIfs, u: Sequence[int]) -> float:
    return cylinder(ifs, u).length


def normalizer(ifs: RegularIfs, u: Sequence[int]) -> AffineMap:
    """Affine T_u with T_u(I(u)) = [0, 1] and T_u o f_u increasing."""
    if len(u) == 0:
        raise ValueError("normalizer needs a nonempty word")
    f = compose(ifs, u)
    left, right = float(f(ifs.hull[0])), float(f(ifs.hull[1]))
    if left == right:
        raise IfsError("degenerate cylinder")
    slope = 1.0 / (right - left)
    return AffineMap(slope, -left * slope)


def all_words(m: int, length: int) -> np.ndarray:
    """All words of the given length as an (m^length, length) array of 0-based symbols."""
    if length == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(itertools.product(range(m), repeat=length)), dtype=np.int64)


def distortion_constant(ifs: RegularIfs, depth: int, grid: int = 33) -> float:
    """sup |f_u'(x)| / |f_u'(y)| over words of length 1..depth and a grid on the hull."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    xs = np.linspace(ifs.hull[0], ifs.hull[1], grid)
    best = 1.0
    for k in range(1, depth + 1):
        words = all_words(ifs.m, k)
        x = np.broadcast_to(xs, (len(words), grid)).copy()
        d = np.ones_like(x)
        for pos in range(k - 1, -1, -1):
            col = words[:, pos]
            for j, f in enumerate(ifs.maps):
                mask = col == j
                if mask.any():
                    d[mask] *= np.abs(f.deriv(x[mask]))
                    x[mask] = f(x[mask])
        ratio = float((d.max(axis=1) / d.min(axis=1)).max())
        best = max(best, ratio)
    return best


def normalize(ifs: RegularIfs) -> RegularIfs:
    """Affinely conjugate so the attractor hull becomes [0, 1]."""
    lo, hi = ifs.hull
    if not hi > lo:
        raise IfsError("degenerate hull")
    if ifs.hull == (0.0, 1.0):
        return ifs
    alpha = 1.0 / (hi - lo)
    gamma = -lo * alpha
    maps = tuple(f.conjugate(alpha, gamma) for f in ifs.maps)
    # conjugated images of [0, 1] are S(f(hull)); reuse them rather than re-iterating
    return RegularIfs(maps, (0.0, 1.0), name=ifs.name)


def trim(ifs: RegularIfs, depth: int, keep: int) -> RegularIfs:
    """Sub-i.f.s. made of the lexicographically first ``keep`` branches f_u, |u| = depth."""
    words = all_words(ifs.m, depth)[:keep]
    maps = [CompositeMap([ifs.maps[s] for s in w]) for w in words]
    # hull of the sub-attractor may shrink; rebuild from the parent hull
    return normalize(RegularIfs.build(maps, ifs.hull, name=f"{ifs.name}|trim{depth}:{keep}"))


# --- construction helpers and the specification-file format -----------------

def central_cantor(n: int | float) -> RegularIfs:
    """Two-map central Cantor set {x/n, x/n + (n-1)/n}."""
    r = 1.0 / n
    return RegularIfs((AffineMap(r, 0.0), AffineMap(r, 1.0 - r)), (0.0, 1.0), name=f"C(1/{n:g})")


def gauss_system(digits: Sequence[int] = (1, 3), normalized: bool = True) -> RegularIfs:
    """Continued-fraction branches x -> 1/(k + x) for the given digits."""
    maps = [MoebiusMap(0.0, 1.0, 1.0, float(k)) for k in digits]
    raw = RegularIfs.build(maps, (0.0, 1.0), name="gauss" + "".join(map(str, digits)))
    return normalize(raw) if normalized else raw


def mixed_system(n: float = 3.0, c: float = 0.5) -> RegularIfs:
    """f_1(x) = x/n (affine) beside a Moebius branch carrying [0, 1] onto [1 - 1/n, 1]."""
    b = 1.0 - 1.0 / n
    f2 = MoebiusMap(c + 1.0 / n, b, c, 1.0)
    return RegularIfs((AffineMap(1.0 / n, 0.0), f2), (0.0, 1.0), name=f"mixed(1/{n:g})")


def map_from_spec(entry: dict) -> SmoothMap:
    kind = str(entry.get("kind", "")).lower()
    try:
        if kind == "affine":
            return AffineMap(float(entry["a"]), float(entry.get("b", 0.0)))
        if kind in ("moebius", "mobius", "möbius"):
            return MoebiusMap(*(float(entry[k]) for k in ("p", "q", "r", "s")))
        if kind in ("perturbed-affine", "perturbed_affine"):
            ref = entry.get("ref", [0.0, 1.0])
            return PerturbedAffineMap(float(entry["a"]), float(entry.get("b", 0.0)),
                                      float(entry.get("eps", 0.0)),
                                      float(ref[0]), float(ref[1]) - float(ref[0]))
    except KeyError as exc:
        raise IfsError(f"map entry of kind {kind!r} is missing coefficient {exc.args[0]!r}") from None
    raise IfsError(f"unknown map kind {kind!r}")


def preset(name: str) -> RegularIfs:
    """Named systems: ``cantor:N``, ``gauss:D1,D2,...`` and ``mixed:N``."""
    key, _, arg = name.partition(":")
    key = key.strip().lower()
    if key == "cantor":
        return central_cantor(float(arg))
    if key == "gauss":
        return gauss_system(tuple(int(s) for s in arg.split(",")))
    if key == "mixed":
        return mixed_system(float(arg or 3))
    raise IfsError(f"unknown preset {name!r}")


def ifs_from_spec(spec: dict | str, normalized: bool = True) -> RegularIfs:
    """Build an i.f.s. from a parsed specification mapping (or a preset name)."""
    if isinstance(spec, str):
        return preset(spec)
    if "preset" in spec:
        return preset(spec["preset"])
    entries = spec.get("maps")
    if not entries:
        raise IfsError("specification has no maps")
    maps = [map_from_spec(e) for e in entries]
    start = tuple(spec.get("domain", (0.0, 1.0)))
    raw = RegularIfs.build(maps, start, name=str(spec.get("name", "")))
    return normalize(raw) if normalized else raw


def ifs_to_spec(ifs: RegularIfs) -> dict:
    return {
        "name": ifs.name,
        "hull": list(ifs.hull),
        "maps": [{"kind": f.kind, **f.params} for f in ifs.maps],
    }
