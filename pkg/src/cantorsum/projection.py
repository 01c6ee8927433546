"""Projection counting N(lambda), good slopes, faithful subfamilies and their stability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .decomposition import ProductDecomposition, ProductSystem, product_decomposition
from .dimension import projected_intervals
from .ifs import Word


@dataclass(frozen=True)
class Rectangle:
    pair: tuple[Word, Word]
    x: tuple[float, float]
    y: tuple[float, float]


def project(rect: Rectangle, lam: float) -> tuple[float, float]:
    """Pi_lambda(x, y) = x + lambda y applied to a rectangle."""
    a, b = lam * rect.y[0], lam * rect.y[1]
    return rect.x[0] + min(a, b), rect.x[1] + max(a, b)


def _cubic(x):
    return x - x ** 3


def _cubic_d1(x):
    return 1.0 - 3.0 * x * x


@dataclass(frozen=True)
class PerturbationPair:
    """phi_i(x) = x + delta_i (x - x^3): increasing diffeomorphisms of [0, 1] fixing both ends."""

    delta1: float = 0.0
    delta2: float = 0.0

    def __post_init__(self):
        for d in (self.delta1, self.delta2):
            if not abs(d) < 0.5:
                raise ValueError("|delta| must be < 1/2 for phi to stay increasing")

    def first(self, x):
        return np.asarray(x, dtype=float) + self.delta1 * _cubic(np.asarray(x, dtype=float))

    def second(self, x):
        return np.asarray(x, dtype=float) + self.delta2 * _cubic(np.asarray(x, dtype=float))

    def c1_distance(self, i: int) -> float:
        """||phi_i - id||_C1 = sup |phi_i' - 1| = 2 |delta_i|."""
        return 2.0 * abs(self.delta1 if i == 1 else self.delta2)

    @property
    def is_identity(self) -> bool:
        return self.delta1 == 0.0 and self.delta2 == 0.0

    @classmethod
    def with_c1_distance(cls, dist1: float, dist2: float) -> "PerturbationPair":
        return cls(dist1 / 2.0, dist2 / 2.0)


IDENTITY = PerturbationPair()


# --- intersection counting -------------------------------------------------

def overlap_count(lo: np.ndarray, hi: np.ndarray) -> int:
    """Ordered pairs (i, j), self-pairs included, of closed intervals that intersect.

    With S = #{(i, j): lo_j <= hi_i}, the non-intersecting ordered pairs number
    2 (M^2 - S), hence N = 2 S - M^2.
    """
    m = len(lo)
    s = int(np.searchsorted(np.sort(lo), hi, side="right").sum())
    return 2 * s - m * m


def overlap_count_batch(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Row-wise overlap_count for (B, M) arrays."""
    b, m = lo.shape
    vals = np.concatenate([lo, hi], axis=1)
    # stable sort keeps every lo ahead of an equal hi, so ties count as overlaps
    order = np.argsort(vals, axis=1, kind="stable")
    is_lo = order < m
    seen = np.cumsum(is_lo, axis=1)
    s = np.where(is_lo, 0, seen).sum(axis=1)
    return 2 * s - m * m


def brute_force_count(lo: np.ndarray, hi: np.ndarray) -> int:
    """O(M^2) reference for overlap_count."""
    inter = (lo[None, :] <= hi[:, None]) & (lo[:, None] <= hi[None, :])
    return int(inter.sum())


def intersection_count(decomp: ProductDecomposition, lam: float,
                       phi: PerturbationPair | None = None,
                       subset: np.ndarray | None = None) -> int:
    lo, hi = projected_intervals(decomp, lam, phi)
    if subset is not None:
        lo, hi = lo[subset], hi[subset]
    return overlap_count(lo, hi)


def spectrum(decomp: ProductDecomposition, lams: np.ndarray,
             phi: PerturbationPair | None = None, chunk_elems: int = 1 << 22) -> np.ndarray:
    """N(lambda) over a grid of slopes."""
    xl, xh, yl, yh = decomp.x_lo, decomp.x_hi, decomp.y_lo, decomp.y_hi
    if phi is not None:
        xl, xh, yl, yh = phi.first(xl), phi.first(xh), phi.second(yl), phi.second(yh)
    lams = np.asarray(lams, dtype=float)
    out = np.empty(len(lams), dtype=np.int64)
    step = max(1, chunk_elems // (2 * max(len(xl), 1)))
    for start in range(0, len(lams), step):
        lam = lams[start:start + step, None]
        a, b = lam * yl, lam * yh
        out[start:start + step] = overlap_count_batch(xl + np.minimum(a, b), xh + np.maximum(a, b))
    return out


def slope_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Grid points k * step inside [lo, hi]; anchored at 0 so grids nest across ranges."""
    k0 = math.ceil(lo / step - 1e-9)
    k1 = math.floor(hi / step + 1e-9)
    return np.arange(k0, k1 + 1) * step


@dataclass(frozen=True)
class ClaimCheck:
    rho: float
    A: float
    integral: float
    ratio: float  # integral * rho^d
    grid: int


def integral_claim_check(sys: ProductSystem, rho: float, A: float, grid: int = 4001,
                         phi: PerturbationPair | None = None, method: str = "trapezoid") -> ClaimCheck:
    """Estimate of the integral of N over [-A, A], relative to rho^-d.

    ``method="trapezoid"`` samples N on ``grid`` points; ``method="exact"`` sums
    the measures of the slope sets E(u, v) and ignores ``grid``.
    """
    if grid < 1000:
        raise ValueError("grid must have at least 1000 points")
    decomp = product_decomposition(sys, rho)
    if method == "exact":
        integral = exact_integral(decomp, A, phi)
    elif method == "trapezoid":
        lams = np.linspace(-A, A, grid)
        integral = float(np.trapezoid(spectrum(decomp, lams, phi), lams))
    else:
        raise ValueError(f"unknown method {method!r}")
    return ClaimCheck(rho, A, integral, integral * rho ** sys.d, grid)


def _halfline_measure(a1, b1, a2, b2, lo: float, hi: float) -> np.ndarray:
    """Length of {lam in [lo, hi] : a1 + b1 lam <= 0 and a2 + b2 lam <= 0}, elementwise."""
    left = np.full(np.broadcast(a1, a2).shape, lo)
    right = np.full_like(left, hi)
    for a, b in ((a1, b1), (a2, b2)):
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -a / b
        right = np.where(b > 0, np.minimum(right, root), right)
        left = np.where(b < 0, np.maximum(left, root), left)
        right = np.where((b == 0) & (a > 0), lo, right)
    return np.clip(right - left, 0.0, None)


def exact_integral(decomp: ProductDecomposition, A: float,
                   phi: PerturbationPair | None = None, chunk_elems: int = 1 << 22) -> float:
    """Integral of N over [-A, A] as the sum over ordered pairs of the measure of E(u, v).

    Pi_lam Q(u) meets Pi_lam Q(v) iff 0 lies in X + lam Y, with X and Y the
    difference intervals of the x- and y-sides; on each half-line that is a
    pair of linear inequalities in lam, so every E(u, v) is measured exactly.
    """
    xl, xh, yl, yh = decomp.x_lo, decomp.x_hi, decomp.y_lo, decomp.y_hi
    if phi is not None:
        xl, xh, yl, yh = phi.first(xl), phi.first(xh), phi.second(yl), phi.second(yh)
    n = len(xl)
    rows = max(1, chunk_elems // max(n, 1))
    total = 0.0
    for s in range(0, n, rows):
        sl = slice(s, s + rows)
        a = xl[sl, None] - xh[None, :]
        b = xh[sl, None] - xl[None, :]
        c = yl[sl, None] - yh[None, :]
        e = yh[sl, None] - yl[None, :]
        # lam >= 0: a + lam c <= 0 <= b + lam e ; lam <= 0: a + lam e <= 0 <= b + lam c
        total += float(_halfline_measure(a, c, -b, -e, 0.0, A).sum())
        total += float(_halfline_measure(a, e, -b, -c, -A, 0.0).sum())
    return total


@dataclass(frozen=True)
class GoodSlopes:
    rho: float
    eta: float
    lams: np.ndarray
    counts: np.ndarray
    good: np.ndarray
    threshold: float
    step: float
    complement_measure: float

    @property
    def bound(self) -> float:
        return self.rho ** self.eta

    @property
    def J(self) -> np.ndarray:
        return self.lams[self.good]


def good_slopes(sys: ProductSystem, rho: float, eta: float, A: float,
                phi: PerturbationPair | None = None, step: float | None = None,
                domain: str = "full", decomp: ProductDecomposition | None = None) -> GoodSlopes:
    """Grid points lambda with N(lambda) < rho^(-2 eta - d).

    ``domain`` is ``"full"`` for [-A, A] or ``"IA"`` for [-A, -1/A] u [1/A, A].
    The complement is measured as (number of bad grid points) * step.
    """
    d = sys.d
    if not 0 < eta < d / 4:
        raise ValueError("need 0 < eta < d/4")
    step = rho / 4 if step is None else step
    lams = slope_grid(-A, A, step)
    if domain == "IA":
        lams = lams[np.abs(lams) >= 1.0 / A - 1e-12]
    elif domain != "full":
        raise ValueError(f"unknown domain {domain!r}")
    decomp = product_decomposition(sys, rho) if decomp is None else decomp
    threshold = rho ** (-2 * eta - d)
    if len(decomp) == 0:
        counts = np.zeros(len(lams), dtype=np.int64)
    else:
        counts = spectrum(decomp, lams, phi)
    good = counts < threshold
    return GoodSlopes(rho, eta, lams, counts, good, threshold, step,
                      float((~good).sum() * step))


# --- faithful families ----------------------------------------------------

@dataclass
class FaithfulCertificate:
    eta: float  # faithfulness level: #R' > rho^(eta - d) on success
    lam: float
    phi: PerturbationPair
    rho: float
    d: float
    indices: np.ndarray  # into the decomposition
    pairs: list
    lo: np.ndarray
    hi: np.ndarray
    threshold: float
    success: bool
    precondition_met: bool
    in_good_set: bool
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.indices)

    @property
    def gap(self) -> float:
        return min_gap(self.lo, self.hi)

    def validate(self) -> bool:
        """Re-check disjointness and cardinality from the stored intervals."""
        return bool(len(self) > self.threshold and self.gap > 0)

    def counting_chain(self) -> dict:
        """Each step of the counting argument behind the extraction, evaluated.

        cells >= (sum m)^2 / sum m^2 (Cauchy-Schwarz), sum m^2 <= N1 * c
        (a pair sharing a cell center overlaps, and shares at most c centers),
        representatives >= cells / c and #R' >= representatives / ply.
        """
        s = self.stats
        c = max(s["max_cells_per_rep"], 1)
        p = max(s["ply"], 1)
        cs = s["sum_m"] ** 2 / s["sum_m_sq"] if s["sum_m_sq"] else 0.0
        return {
            "cauchy_schwarz": s["cells_hit"] >= cs - 1e-9,
            "pairs": s["sum_m_sq"] <= s["N1"] * c,
            "covering": s["representatives"] >= s["cells_hit"] / c,
            "thinning": len(self) >= s["representatives"] / p,
            "bound": s["sum_m"] ** 2 / (max(s["N1"], 1) * c * c * p),
        }


def min_gap(lo: np.ndarray, hi: np.ndarray) -> float:
    """Smallest gap between consecutive intervals (negative if two overlap)."""
    if len(lo) < 2:
        return math.inf
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    return float(np.min(lo[1:] - reach[:-1]))


def greedy_disjoint(lo: np.ndarray, hi: np.ndarray, ids: np.ndarray | None = None) -> np.ndarray:
    """Maximum pairwise disjoint subfamily of closed intervals (earliest right endpoint first).

    Ties are broken by ``ids`` (lexicographic rank of the word pair).  Returns
    positions into the input arrays, sorted by left endpoint.
    """
    ids = np.arange(len(lo)) if ids is None else ids
    order = np.lexsort((ids, hi))
    keep = []
    last = -math.inf
    for i in order:
        if lo[i] > last:
            keep.append(i)
            last = hi[i]
    keep = np.asarray(keep, dtype=np.int64)
    return keep[np.argsort(lo[keep], kind="stable")]


def ply(lo: np.ndarray, hi: np.ndarray) -> int:
    """Largest number of closed intervals sharing a point."""
    if len(lo) == 0:
        return 0
    events = np.concatenate([lo, hi])
    kinds = np.concatenate([np.zeros(len(lo)), np.ones(len(hi))])  # opens before closes on ties
    order = np.lexsort((kinds, events))
    depth = np.cumsum(np.where(kinds[order] == 0, 1, -1))
    return int(depth.max())


def faithful_extract(decomp: ProductDecomposition, lam: float, eta: float,
                     phi: PerturbationPair | None = None, subset: Sequence[int] | None = None,
                     A: float | None = None, threshold: float | None = None,
                     d: float | None = None) -> FaithfulCertificate:
    """Extract a subfamily of rectangles with pairwise disjoint projections.

    Cells of length at most rho partition [-B, B] with B = max(A, |lambda|) + 1;
    each cell whose center lies in some projection gets one representative (first
    in (left endpoint, word pair) order), and the representatives are thinned to
    a maximum disjoint subfamily.  Success means more than ``threshold`` members,
    by default rho^(4 eta - d); the certificate then records the faithfulness
    level 4 eta in its ``eta`` field.
    """
    phi = IDENTITY if phi is None else phi
    rho = decomp.rho
    d = decomp.system.d if d is None else d
    threshold = rho ** (4 * eta - d) if threshold is None else threshold
    idx_all = np.arange(len(decomp)) if subset is None else np.asarray(subset, dtype=np.int64)
    lo_all, hi_all = projected_intervals(decomp, lam, phi)
    lo, hi = lo_all[idx_all], hi_all[idx_all]

    bound = max(A if A is not None else 0.0, abs(lam)) + 1.0
    n_cells = math.ceil(2 * bound / rho)
    h = 2 * bound / n_cells
    # cell j has center -bound + (j + 1/2) h; closed-interval membership
    j0 = np.ceil((lo + bound) / h - 0.5).astype(np.int64)
    j1 = np.floor((hi + bound) / h - 0.5).astype(np.int64)
    j0, j1 = np.clip(j0, 0, n_cells), np.clip(j1, -1, n_cells - 1)
    covers = np.maximum(0, j1 - j0 + 1)
    m_j = np.zeros(n_cells + 1, dtype=np.int64)
    np.add.at(m_j, j0, 1)
    np.add.at(m_j, np.minimum(j1 + 1, n_cells), -1)
    m_j = np.cumsum(m_j)[:n_cells]

    rep = np.full(n_cells, -1, dtype=np.int64)
    for k in np.lexsort((idx_all, lo)):
        if covers[k] == 0:
            continue
        seg = rep[j0[k]:j1[k] + 1]
        seg[seg < 0] = k
    chosen = np.unique(rep[rep >= 0])
    keep = chosen[greedy_disjoint(lo[chosen], hi[chosen], idx_all[chosen])]

    n1 = overlap_count(lo, hi)
    cells = int((m_j > 0).sum())
    sum_m = int(m_j.sum())
    stats = {
        "cells_hit": cells,
        "sum_m": sum_m,
        "sum_m_sq": int((m_j ** 2).sum()),
        "N1": n1,
        "representatives": int(len(chosen)),
        "ply": ply(lo[chosen], hi[chosen]),
        "max_cells_per_rep": int(covers[chosen].max()) if len(chosen) else 0,
        "cell_length": h,
    }
    indices = idx_all[keep]
    return FaithfulCertificate(
        eta=4 * eta, lam=lam, phi=phi, rho=rho, d=d, indices=indices,
        pairs=[decomp.pair(i) for i in indices], lo=lo[keep], hi=hi[keep],
        threshold=threshold, success=bool(len(keep) > threshold),
        precondition_met=bool(len(idx_all) > rho ** (eta - d)),

        in_good_set=bool(n1 < rho ** (-2 * eta - d)), stats=stats)


@dataclass(frozen=True)
class StabilityResult:
    C: float
    precondition_met: bool  # rho^eta < 1/(2C)
    indices: np.ndarray
    size: int
    required: float  # #R' / (2C)
    threshold: float  # rho^(2 eta - d)
    faithful: bool
    reprojection_disjoint: dict


def fattening_constant(lo: np.ndarray, hi: np.ndarray, lam: float, rho: float, C0: float) -> float:
    """C with Pi_lam~(Q^phi~) inside C * Pi_lam(Q^phi) when |lam~ - lam|, ||phi~ - phi|| <= C0 rho.

    Moving lambda by C0 rho moves x + lambda y by at most C0 rho (y in [0, 1]);
    moving phi_1, phi_2 in C1 by C0 rho moves it by at most C0 rho (1 + |lambda| + C0 rho).
    """
    if C0 == 0 or len(lo) == 0:
        return 1.0
    margin = C0 * rho * (2.0 + abs(lam) + C0 * rho)
    return float(1.0 + 2.0 * margin / np.min(hi - lo))


def perturbation_stability(cert: FaithfulCertificate, C0: float, decomp: ProductDecomposition,
                           strict: bool = True) -> StabilityResult:
    """Thin a certificate so it survives every (C0 rho)-perturbation of lambda and phi.

    Disjointness of the C-fattened family holds at any rho; the condition
    rho^eta < 1/(2C) only secures the doubled-eta cardinality.  With
    ``strict=False`` a violated condition is reported instead of raised.
    """
    rho, eta = cert.rho, cert.eta
    C = fattening_constant(cert.lo, cert.hi, cert.lam, rho, C0)
    ok = C0 == 0 or rho ** eta < 1.0 / (2.0 * C)
    if strict and not ok:
        raise ValueError(
            f"rho too large: rho^eta = {rho ** eta:.4g} is not below 1/(2C) = {1 / (2 * C):.4g}")
    center = 0.5 * (cert.lo + cert.hi)
    half = 0.5 * C * (cert.hi - cert.lo)
    keep = greedy_disjoint(center - half, center + half, cert.indices)
    indices = cert.indices[keep]

    checks = {}
    if C0 > 0:
        shift = C0 * rho
        for dl in (-shift, shift):
            for sign in (-1.0, 1.0):
                phi = PerturbationPair(cert.phi.delta1 + sign * shift / 2,
                                       cert.phi.delta2 + sign * shift / 2)
                lo, hi = projected_intervals(decomp, cert.lam + dl, phi)
                checks[(dl, sign)] = min_gap(lo[indices], hi[indices]) > 0
    threshold = rho ** (2 * eta - cert.d)
    return StabilityResult(C, bool(ok), indices, len(indices), len(cert) / (2 * C), threshold,
                           bool(len(indices) > threshold), checks)


def overlap_slopes_measure(decomp: ProductDecomposition, i: int, j: int, lams: np.ndarray) -> float:
    """Grid measure of E(u, v) = {lambda : Pi_lambda(Q(u)) meets Pi_lambda(Q(v))}."""
    step = float(lams[1] - lams[0])
    a_lo = decomp.x_lo[i] + np.minimum(lams * decomp.y_lo[i], lams * decomp.y_hi[i])
    a_hi = decomp.x_hi[i] + np.maximum(lams * decomp.y_lo[i], lams * decomp.y_hi[i])
    b_lo = decomp.x_lo[j] + np.minimum(lams * decomp.y_lo[j], lams * decomp.y_hi[j])
    b_hi = decomp.x_hi[j] + np.maximum(lams * decomp.y_lo[j], lams * decomp.y_hi[j])
    return float(((a_lo <= b_hi) & (b_lo <= a_hi)).sum() * step)
