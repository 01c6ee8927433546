"""Dimension of attractors and box-counting dimension of projected sumsets."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import bisect

from .decomposition import ProductSystem, loglog_fit, product_decomposition
from .ifs import RegularIfs, all_words, cylinder_arrays

MAX_DEPTH_WORDS = 1 << 15


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    method: str  # moran-exact | pressure-depth-n | box-regression
    residual: float
    scales: tuple = ()
    counts: tuple = ()
    raw_slope: float | None = None
    at_least_one: bool = False


def default_depth(ifs: RegularIfs) -> int:
    """Deepest level with at most 2^15 words."""
    return max(1, int(math.log(MAX_DEPTH_WORDS) / math.log(ifs.m)))


def moran_dimension(ifs: RegularIfs, depth: int = 8, tol: float = 1e-13) -> DimensionEstimate:
    """Root s of sum_{|u| = depth} |I(u)|^s = 1 by bisection on [0, 1]."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    _, _, lengths = cylinder_arrays(ifs, all_words(ifs.m, depth))
    lengths = lengths / ifs.hull_length
    method = "moran-exact" if ifs.is_affine else f"pressure-depth-{depth}"

    def g(s):
        return float(np.sum(lengths ** s)) - 1.0

    if g(1.0) >= 0:
        return DimensionEstimate(1.0, method, g(1.0), at_least_one=True)
    s = bisect(g, 0.0, 1.0, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=400)
    return DimensionEstimate(float(s), method, abs(g(s)))


def projected_intervals(decomp, lam: float, phi=None) -> tuple[np.ndarray, np.ndarray]:
    """Pi_lambda of every rectangle (optionally phi-perturbed) of a product decomposition."""
    xl, xh, yl, yh = decomp.x_lo, decomp.x_hi, decomp.y_lo, decomp.y_hi
    if phi is not None:
        xl, xh = phi.first(xl), phi.first(xh)
        yl, yh = phi.second(yl), phi.second(yh)
    a, b = lam * yl, lam * yh
    return xl + np.minimum(a, b), xh + np.maximum(a, b)


def merge_intervals(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Union of closed intervals as sorted disjoint components."""
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    starts = np.ones(len(lo), dtype=bool)
    starts[1:] = lo[1:] > reach[:-1]
    idx = np.flatnonzero(starts)
    ends = np.append(idx[1:], len(lo)) - 1
    return lo[idx], reach[ends]


def count_boxes(lo: np.ndarray, hi: np.ndarray, rho: float, offset: float = 0.0) -> int:
    """Number of grid cells [k rho + offset, (k+1) rho + offset) meeting sorted disjoint intervals."""
    k0 = np.floor((lo - offset) / rho).astype(np.int64)
    k1 = np.floor((hi - offset) / rho).astype(np.int64)
    prev = np.maximum.accumulate(k1)
    start = k0.copy()
    start[1:] = np.maximum(k0[1:], prev[:-1] + 1)
    return int(np.sum(np.maximum(0, k1 - start + 1)))


def merged_projection(sys: ProductSystem, lam: float, rho: float):
    decomp = product_decomposition(sys, rho)
    return merge_intervals(*projected_intervals(decomp, lam))


def sumset_cover(sys: ProductSystem, lam: float, rho: float) -> int:
    """Grid boxes of side rho meeting Pi_lambda of the rho-decomposition (max of two offsets)."""
    lo, hi = merged_projection(sys, lam, rho)
    return max(count_boxes(lo, hi, rho, 0.0), count_boxes(lo, hi, rho, rho / 2))


def sumset_dimension(sys: ProductSystem, lam: float, rho_list: Sequence[float]) -> DimensionEstimate:
    """Box-counting slope of Pi_lambda(K1 x K2); drops the extreme scales when given >= 6."""
    if len(rho_list) < 4:
        raise ValueError("need at least 4 scales")
    rhos = np.asarray(sorted(rho_list, reverse=True), dtype=float)
    counts = np.array([sumset_cover(sys, lam, r) for r in rhos])
    use = slice(1, -1) if len(rhos) >= 6 else slice(None)
    slope, _, res = loglog_fit(rhos[use], counts[use])
    return DimensionEstimate(
        float(min(max(slope, 0.0), 1.0)), "box-regression", float(np.sqrt(np.mean(res ** 2))),
        tuple(rhos.tolist()), tuple(int(c) for c in counts), raw_slope=slope)


def dyadic_scales(first: int, last: int) -> list[float]:
    return [2.0 ** -k for k in range(first, last + 1)]
