"""Moran tree of renormalized faithful families and the resulting dimension lower bound."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .decomposition import ProductSystem, loglog_fit, product_decomposition
from .hypotheses import essential_nonlinearity
from .ifs import RegularIfs, Word, cylinder, normalized_composite
from .projection import (
    IDENTITY,
    PerturbationPair,
    faithful_extract,
    good_slopes,
    greedy_disjoint,
    min_gap,
    slope_grid,
    spectrum,
)

TAIL_PAD = 8
C_BRANCH = 0.25


@dataclass(eq=False)
class TreeVertex:
    pair: tuple[Word, Word]
    level: int
    slope: float  # lambda^{u1,u2} = |I(u2)| / |I(u1)| lambda
    interval: tuple[float, float]  # Pi_lambda(Q^phi(u1, u2))
    offspring: list = field(default_factory=list)
    gap: float = math.inf
    parent: "TreeVertex | None" = field(default=None, repr=False)
    approx_error: float = 0.0

    @property
    def branching(self) -> int:
        return len(self.offspring)


@dataclass
class MoranTree:
    root: TreeVertex
    rho: float
    eta: float
    lam: float
    phi: PerturbationPair
    depth: int
    threshold: float  # minimal branching kept when pruning
    system: ProductSystem | None = None
    failures: list = field(default_factory=list)
    diagnostic: str = ""

    @property
    def levels(self) -> list[list[TreeVertex]]:
        out = [[self.root]] if self.root is not None else []
        while out and any(v.offspring for v in out[-1]):
            out.append([c for v in out[-1] for c in v.offspring])
        return out

    @property
    def empty(self) -> bool:
        return self.root is None

    def branching_range(self) -> list[tuple[int, int]]:
        """(min, max) branching of the internal vertices at each level."""
        return [(min(v.branching for v in lev), max(v.branching for v in lev))
                for lev in self.levels[:-1]]

    def vertices(self):
        for lev in self.levels:
            yield from lev


def rectangle_interval(sys: ProductSystem, pair, lam: float,
                       phi: PerturbationPair = IDENTITY) -> tuple[float, float]:
    """Pi_lambda(Q^phi(u1, u2)) in original coordinates."""
    c1, c2 = cylinder(sys.first, pair[0]), cylinder(sys.second, pair[1])
    x0, x1 = float(phi.first(c1.lo)), float(phi.first(c1.hi))
    y0, y1 = float(phi.second(c2.lo)), float(phi.second(c2.hi))
    a, b = lam * y0, lam * y1
    return x0 + min(a, b), x1 + max(a, b)


def _length(ifs: RegularIfs, u) -> float:
    return cylinder(ifs, u).length / ifs.hull_length


def value_lambda(sys: ProductSystem, pair, lam: float) -> float:
    """lambda^{u1,u2} = |I(u2)| / |I(u1)| lambda."""
    return _length(sys.second, pair[1]) / _length(sys.first, pair[0]) * lam


def limit_chart(ifs: RegularIfs, u, pad: int = TAIL_PAD):
    """T f restricted to the word 1^pad u: the approximate limit geometry along u* 1^inf."""
    return normalized_composite(ifs, Word((1,) * pad) + Word(u))


def _chart_error(ifs: RegularIfs, chart, grid: np.ndarray) -> float:
    nxt = chart.copy()
    nxt.push(ifs.maps[0])
    return float(np.max(np.abs(nxt(grid) - chart(grid))))


def _expand(sys: ProductSystem, v: TreeVertex, tree: MoranTree, pad: int,
            grid: np.ndarray) -> tuple[list[TreeVertex], str]:
    """Offspring of one vertex, or an empty list and the reason it failed."""
    u1, u2 = v.pair
    c1, c2 = limit_chart(sys.first, u1, pad), limit_chart(sys.second, u2, pad)
    sign = sys.first.orientation(u1) * sys.second.orientation(u2)
    s = sign * v.slope
    decomp = product_decomposition(sys, tree.rho, charts=(c1, c2))
    cert = faithful_extract(decomp, s, tree.eta, A=abs(s))
    err = _chart_error(sys.first, c1, grid) + abs(s) * _chart_error(sys.second, c2, grid)
    v.approx_error = err
    if len(cert) and not cert.gap > 2 * err:
        return [], f"gap {cert.gap:.3g} below twice the limit approximation error {err:.3g}"
    kids = [(Word(u1 + p[0]), Word(u2 + p[1])) for p in cert.pairs]
    ivs = np.array([rectangle_interval(sys, k, tree.lam, tree.phi) for k in kids]).reshape(-1, 2)
    # the extraction is exact in chart coordinates; re-thin in original ones
    keep = greedy_disjoint(ivs[:, 0], ivs[:, 1]) if len(kids) else np.array([], dtype=int)
    if len(keep) < tree.threshold:
        return [], f"branching {len(keep)} below threshold {tree.threshold:.3g}"
    out = []
    for i in keep:
        pair = kids[i]
        out.append(TreeVertex(pair, v.level + 1, value_lambda(sys, pair, tree.lam),
                              (float(ivs[i, 0]), float(ivs[i, 1])), parent=v))
    v.gap = min_gap(ivs[keep, 0], ivs[keep, 1])
    return out, ""


def _prune(tree: MoranTree, v: TreeVertex) -> None:
    """Drop a vertex; cascade upward while parents fall below the branching threshold."""
    while v is not None:
        parent = v.parent
        if parent is None:
            tree.root = None
            return
        parent.offspring = [c for c in parent.offspring if c is not v]
        if len(parent.offspring) >= tree.threshold:
            return
        tree.failures.append({"level": parent.level, "pair": parent.pair,
                              "reason": "lost offspring to pruning"})
        v = parent


def build_tree(sys: ProductSystem, lam: float, phi: PerturbationPair = IDENTITY,
               rho: float = 0.05, eta: float = 0.1, depth: int = 3,
               c_branch: float = C_BRANCH, pad: int = TAIL_PAD) -> MoranTree:
    """Grow the tree level by level, re-testing faithfulness at every vertex.

    A vertex keeps its offspring only if at least max(2, c_branch rho^(9 eta - d))
    of them have pairwise disjoint projections; otherwise it is pruned and logged.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    d = sys.d
    if d >= 1:
        warnings.warn(f"d = {d:.4f} >= 1: trim the first system before building the tree")
    if essential_nonlinearity(sys.first) is None:
        warnings.warn("first system is not essentially nonlinear")
    threshold = max(2.0, c_branch * rho ** (9 * eta - d))
    root = TreeVertex((Word(), Word()), 0, lam, rectangle_interval(sys, (Word(), Word()), lam, phi))
    tree = MoranTree(root, rho, eta, lam, phi, depth, threshold, sys)
    grid = np.linspace(0.0, 1.0, 65)

    frontier = [root]
    for _ in range(depth):
        nxt = []
        for v in frontier:
            if tree.root is None:
                break
            kids, reason = _expand(sys, v, tree, pad, grid)
            if not kids:
                tree.failures.append({"level": v.level, "pair": v.pair, "reason": reason})
                _prune(tree, v)
                continue
            v.offspring = kids
            nxt.extend(kids)
        if tree.root is None:
            break
        alive = {id(x) for x in tree.vertices()}
        frontier = [x for x in nxt if id(x) in alive]

    if tree.root is None:
        tree.diagnostic = _root_diagnostic(sys, rho, eta, lam)
    return tree


def _root_diagnostic(sys: ProductSystem, rho: float, eta: float, lam: float) -> str:
    if not 0 < eta < sys.d / 4:
        return f"root extraction failed at lambda={lam}"
    gs = good_slopes(sys, rho, eta, max(2.0, abs(lam) + 1.0))
    good = gs.J
    if len(good) == 0:
        return f"root extraction failed at lambda={lam}; no good slopes at this rho"
    near = good[np.argsort(np.abs(good - lam), kind="stable")[:5]]
    return (f"root extraction failed at lambda={lam}; nearby good slopes: "
            + ", ".join(f"{x:.6g}" for x in np.sort(near)))


# --- validation -------------------------------------------------------------

@dataclass
class PropertyReport:
    A: bool
    B: bool
    C: bool
    D: bool
    value_lambda: bool
    min_branching: int
    branching_constant: float  # min branching / rho^(9 eta - d)
    min_gap: float
    max_lambda_error: float
    min_length_ratio: float  # min over vertices of |I(u_i)| / rho^k

    @property
    def all_pass(self) -> bool:
        return self.A and self.B and self.C and self.D and self.value_lambda


def check_properties(tree: MoranTree, sys: ProductSystem | None = None,
                     lambda_tol: float = 1e-12) -> PropertyReport:
    """Independent checks of (A) prefix extension, (B) cylinder size, (C) branching, (D) disjointness."""
    sys = sys or tree.system
    if tree.empty:
        return PropertyReport(False, False, False, False, False, 0, 0.0, -math.inf, math.inf, 0.0)
    a_ok, b_ok, d_ok = True, True, True
    gaps, lam_err, ratios, branching = [math.inf], 0.0, [math.inf], []
    for v in tree.vertices():
        u1, u2 = v.pair
        k = v.level
        r = min(_length(sys.first, u1), _length(sys.second, u2)) / tree.rho ** k
        ratios.append(r)
        if r < 1.0:
            b_ok = False
        expected = value_lambda(sys, v.pair, tree.lam)
        lam_err = max(lam_err, abs(v.slope - expected) / max(abs(expected), 1e-300))
        if v.parent is not None:
            p = v.parent
            # telescoped edge form of the same identity
            edge = (_length(sys.first, p.pair[0]) / _length(sys.first, u1)
                    * _length(sys.second, u2) / _length(sys.second, p.pair[1]) * p.slope)
            lam_err = max(lam_err, abs(v.slope - edge) / max(abs(edge), 1e-300))
        if not v.offspring or k >= tree.depth:
            continue
        branching.append(len(v.offspring))
        for c in v.offspring:
            if not (Word(u1).is_prefix_of(c.pair[0]) and Word(u2).is_prefix_of(c.pair[1])
                    and len(c.pair[0]) + len(c.pair[1]) > len(u1) + len(u2)):
                a_ok = False
        ivs = np.array([rectangle_interval(sys, c.pair, tree.lam, tree.phi) for c in v.offspring])
        g = min_gap(ivs[:, 0], ivs[:, 1])
        gaps.append(g)
        if not g > 0:
            d_ok = False
    min_b = min(branching) if branching else 0
    target = tree.rho ** (9 * tree.eta - sys.d)
    c_ok = bool(branching) and min_b >= tree.threshold if tree.depth > 0 else True
    return PropertyReport(a_ok, b_ok, c_ok, d_ok, lam_err <= lambda_tol, min_b,
                          min_b / target if branching else 0.0, min(gaps), lam_err, min(ratios))


# --- dimension of the Moran limit set --------------------------------------

@dataclass(frozen=True)
class DimensionBound:
    value: float
    target: float  # d - 9 eta
    method: str
    radii: tuple = ()
    masses: tuple = ()


def leaf_measure(tree: MoranTree) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deepest-level intervals and their masses under uniform splitting of mass among offspring."""
    mass = {id(tree.root): 1.0}
    levels = tree.levels
    for lev in levels[:-1]:
        for v in lev:
            share = mass[id(v)] / len(v.offspring) if v.offspring else 0.0
            for c in v.offspring:
                mass[id(c)] = share
    last = levels[-1]
    lo = np.array([v.interval[0] for v in last])
    hi = np.array([v.interval[1] for v in last])
    w = np.array([mass[id(v)] for v in last])
    return lo, hi, w


def max_ball_mass(lo: np.ndarray, hi: np.ndarray, w: np.ndarray, r: float) -> float:
    """max over leaf centers x of mu(x - r, x + r), mass spread uniformly inside each leaf."""
    order = np.argsort(lo, kind="stable")
    lo, hi, w = lo[order], hi[order], w[order]
    centers = 0.5 * (lo + hi)
    length = np.maximum(hi - lo, 1e-300)
    best = 0.0
    for x in centers:
        a, b = x - r, x + r
        i0 = np.searchsorted(hi, a, side="left")
        i1 = np.searchsorted(lo, b, side="right")
        sl = slice(max(i0 - 1, 0), i1)
        cover = np.clip(np.minimum(hi[sl], b) - np.maximum(lo[sl], a), 0.0, None)
        best = max(best, float(np.sum(w[sl] * cover / length[sl])))
    return best


def dimension_lower_bound(tree: MoranTree, d: float | None = None) -> DimensionBound:
    """Mass-distribution exponent of the uniform-branching measure at finite depth.

    With two or more levels the exponent is the least-squares slope of
    log max_x mu(B(x, r)) against log r over dyadic r in [rho^depth, rho]; with a
    single level it is log(branching) / log(1/rho).
    """
    d = (tree.system.d if tree.system is not None else 0.0) if d is None else d
    target = d - 9 * tree.eta
    if tree.empty:
        return DimensionBound(0.0, target, "empty")
    levels = tree.levels
    n = len(levels) - 1
    if n == 0:
        return DimensionBound(0.0, target, "root-only")
    if n == 1:
        b = tree.root.branching
        val = math.log(b) / math.log(1 / tree.rho) if b > 1 else 0.0
        return DimensionBound(val, target, "single-level")
    if all(v.branching <= 1 for lev in levels[:-1] for v in lev):
        return DimensionBound(0.0, target, "degenerate")
    lo, hi, w = leaf_measure(tree)
    k_lo = math.ceil(math.log2(1 / tree.rho))
    k_hi = math.floor(math.log2(1 / tree.rho ** n))
    radii = [2.0 ** -k for k in range(k_lo, k_hi + 1)]
    if len(radii) < 2:
        radii = [tree.rho, tree.rho ** n]
    masses = [max_ball_mass(lo, hi, w, r) for r in radii]
    slope, _, _ = loglog_fit(np.array(radii), 1.0 / np.array(masses))
    return DimensionBound(float(slope), target, "ball-mass-regression",
                          tuple(radii), tuple(masses))


# --- scale recurrence (experimental) ----------------------------------------

@dataclass
class RecurrenceReport:
    rho: float
    eta: float
    A: float
    a: float
    step: float
    tail_len: int
    iterations: int
    fixed_point: bool  # iteration stopped because nothing changed
    families: dict  # (w1, w2) -> surviving grid slopes
    sizes: list  # total surviving grid points after each iteration

    def root(self) -> np.ndarray:
        key = (Word((1,) * self.tail_len), Word((1,) * self.tail_len))
        return self.families[key]

    @property
    def nonempty(self) -> bool:
        return len(self.root()) > 0

    @property
    def both_signs(self) -> bool:
        r = self.root()
        return bool((r > 0).any() and (r < 0).any())


def _tail_chart(ifs: RegularIfs, w: Word, pad: int):
    # (omega | k)* for omega = w 1^inf is 1^pad w*
    return normalized_composite(ifs, Word((1,) * pad) + w.star())


def recurrence_search(sys: ProductSystem, rho: float, eta: float, A: float, depth: int,
                      tail_len: int = 1, pad: int = TAIL_PAD, a: float | None = None) -> RecurrenceReport:
    """Bounded greatest-fixed-point search for scale-recurrent slope families.

    Tails are w 1^inf with |w| = tail_len.  F starts from the good slopes of each
    limit geometry on I_A; each round keeps s when at least a rho^-d decomposition
    elements (u1, u2) renormalize it to s' with every grid point of
    [s' - rho, s' + rho] inside F at the tails (u1 w1, u2 w2) truncated to tail_len.
    ``depth`` caps the number of rounds (0 returns the good sets themselves).
    """
    if A <= 1:
        raise ValueError("A must exceed 1")
    a = 1.0 / A if a is None else a
    d = sys.d
    step = rho / 4
    grid = slope_grid(-A, A, step)
    grid = grid[np.abs(grid) >= 1.0 / A - 1e-12]
    kgrid = np.round(grid / step).astype(np.int64)
    words1 = [Word(s + 1 for s in w) for w in np.ndindex(*(sys.first.m,) * tail_len)]
    words2 = [Word(s + 1 for s in w) for w in np.ndindex(*(sys.second.m,) * tail_len)]
    keys = [(w1, w2) for w1 in words1 for w2 in words2]

    info = {}
    member = {}
    for key in keys:
        charts = (_tail_chart(sys.first, key[0], pad), _tail_chart(sys.second, key[1], pad))
        decomp = product_decomposition(sys, rho, charts=charts)
        counts = spectrum(decomp, grid)
        member[key] = counts < rho ** (-2 * eta - d)
        ratios = np.array([l2 / l1 for l1 in decomp.first.length for l2 in decomp.second.length])
        nxt = []
        for i1, code1 in enumerate(decomp.first.words):
            for i2, code2 in enumerate(decomp.second.words):
                nxt.append(((code1 + key[0])[:tail_len], (code2 + key[1])[:tail_len]))
        signs = np.array([sys.first.orientation(w1) * sys.second.orientation(w2)
                          for w1 in decomp.first.words for w2 in decomp.second.words])
        info[key] = (ratios * signs, nxt)

    need = a * rho ** (-d)
    reach = int(round(rho / step))
    sizes = [int(sum(m.sum() for m in member.values()))]
    fixed = False
    it = 0
    for it in range(1, depth + 1):
        new = {}
        for key in keys:
            cur = member[key]
            ratios, nxt = info[key]
            support = np.zeros(len(grid), dtype=np.int64)
            for r, tail in zip(ratios, nxt):
                support += _window_inside(member[tail], kgrid, grid * r, step, reach)
            new[key] = cur & (support >= need)
        changed = any((new[k] != member[k]).any() for k in keys)
        member = new
        sizes.append(int(sum(m.sum() for m in member.values())))
        if not changed:
            fixed = True
            break
    families = {k: grid[m] for k, m in member.items()}
    return RecurrenceReport(rho, eta, A, a, step, tail_len, it, fixed, families, sizes)


def _window_inside(member: np.ndarray, kgrid: np.ndarray, targets: np.ndarray,
                   step: float, reach: int) -> np.ndarray:
    """For each target s', whether every grid point in [s' - rho, s' + rho] lies in the family."""
    kmin, kmax = int(kgrid.min()), int(kgrid.max())
    dense = np.zeros(kmax - kmin + 1, dtype=np.int64)  # 1 marks a missing grid point
    dense[:] = 1
    dense[kgrid - kmin] = ~member
    bad = np.concatenate([[0], np.cumsum(dense)])
    k0 = np.ceil(targets / step - reach - 1e-9).astype(np.int64)
    k1 = np.floor(targets / step + reach + 1e-9).astype(np.int64)
    inside = (k0 >= kmin) & (k1 <= kmax) & (k0 <= k1)
    i0 = np.clip(k0 - kmin, 0, len(dense))
    i1 = np.clip(k1 - kmin + 1, 0, len(dense))
    return inside & (bad[i1] - bad[i0] == 0)
