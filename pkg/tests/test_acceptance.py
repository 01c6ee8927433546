"""Acceptance suite: one test per criterion, each recorded for the terminal summary."""

import math
import time
import warnings

import numpy as np

from cantorsum.cli import cmd_theorem_check
from cantorsum.config import load_config
from cantorsum.decomposition import ProductSystem, loglog_fit, product_decomposition
from cantorsum.dimension import (
    dyadic_scales,
    merged_projection,
    moran_dimension,
    projected_intervals,
    sumset_dimension,
)
from cantorsum.hypotheses import essential_nonlinearity, incommensurability, scaling_density_search
from cantorsum.ifs import Word, central_cantor, cylinder_length, gauss_system, mixed_system
from cantorsum.limit_geometry import Tail, eigenvalue_check, lemma_linear_check, sullivan_limit
from cantorsum.moran_tree import build_tree, check_properties, dimension_lower_bound, value_lambda
from cantorsum.projection import (
    PerturbationPair,
    brute_force_count,
    faithful_extract,
    good_slopes,
    integral_claim_check,
    intersection_count,
    min_gap,
    perturbation_stability,
)
from conftest import ACCEPTANCE

C3, C4, C5 = central_cantor(3), central_cantor(4), central_cantor(5)
GAUSS = gauss_system((1, 3))
C45 = ProductSystem(C4, C5)


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (bool(ok), detail)
    assert ok, f"criterion {k}: {detail}"


def test_criterion_01_moran_exactness():
    t = time.perf_counter()
    d3, d4 = moran_dimension(C3).value, moran_dimension(C4).value
    dt = time.perf_counter() - t
    e3, e4 = abs(d3 - math.log(2) / math.log(3)), abs(d4 - 0.5)
    record(1, e3 < 1e-10 and e4 < 1e-10 and dt < 1.0,
           f"errors {e3:.1e}, {e4:.1e}; {dt:.2f} s")


def test_criterion_02_incommensurable_sumset():
    t = time.perf_counter()
    est = sumset_dimension(C45, 1.0, dyadic_scales(7, 16))
    dt = time.perf_counter() - t
    record(2, abs(est.value - 0.93068) <= 0.05 and dt < 30,
           f"measured {est.value:.5f} vs 0.93068; {dt:.1f} s")


def test_criterion_03_resonant_sumset():
    t = time.perf_counter()
    est = sumset_dimension(ProductSystem(C4, C4), 1.0, dyadic_scales(7, 16))
    dt = time.perf_counter() - t
    target = math.log(3) / math.log(4)
    record(3, abs(est.value - target) <= 0.05 and est.value < 1.0 and dt < 30,
           f"measured {est.value:.5f} vs {target:.5f}; {dt:.1f} s")


def test_criterion_04_full_interval():
    sys_ = ProductSystem(C3, C3)
    scales = dyadic_scales(6, 13)
    est = sumset_dimension(sys_, 1.0, scales)
    worst = 0.0
    covered = True
    for rho in scales:
        lo, hi = merged_projection(sys_, 1.0, rho)
        gaps = lo[1:] - hi[:-1]
        worst = max(worst, float(gaps.max(initial=0.0)) / rho)
        covered &= lo[0] <= 1e-12 and hi[-1] >= 2 - 1e-12
    record(4, abs(est.value - 1.0) <= 0.03 and covered and worst < 1.0,
           f"measured {est.value:.5f}; largest gap {worst:.2g} rho")


def test_criterion_05_count_oracle():
    rng = np.random.default_rng(2024)
    pairs = [(C3, C3), (C4, C5), (GAUSS, C4), (C5, GAUSS), (GAUSS, GAUSS), (mixed_system(3), C4)]
    done = mismatches = 0
    while done < 100:
        pair = pairs[rng.integers(len(pairs))]
        d = product_decomposition(ProductSystem(*pair), 2.0 ** -rng.integers(3, 11))
        if len(d) > 2000:
            continue
        lam = float(rng.uniform(-3, 3))
        phi = PerturbationPair(*rng.uniform(-0.4, 0.4, 2)) if rng.random() < 0.5 else None
        mismatches += intersection_count(d, lam, phi) != brute_force_count(*projected_intervals(d, lam, phi))
        done += 1
    record(5, mismatches == 0, f"{mismatches} mismatches in {done} instances")


def test_criterion_06_integral_scaling():
    # finest four dyadic scales that fit the runtime budget
    t = time.perf_counter()
    ks = [12, 13, 14, 15]
    checks = [integral_claim_check(C45, 2.0 ** -k, 2.0, method="exact") for k in ks]
    dt = time.perf_counter() - t
    slope = loglog_fit([c.rho for c in checks], [c.integral for c in checks])[0]
    record(6, slope <= C45.d + 0.1 and dt < 60,
           f"slope {slope:.4f} vs d + 0.1 = {C45.d + 0.1:.4f} over 2^-12..2^-15; {dt:.1f} s")


def test_criterion_07_good_set_measure():
    eta = 0.05
    comp = [good_slopes(C45, 2.0 ** -k, eta, 2.0).complement_measure for k in (6, 8, 10)]
    monotone = all(b <= a for a, b in zip(comp, comp[1:]))
    small = comp[-1] < (2.0 ** -10) ** eta
    record(7, monotone and small,
           "complement " + ", ".join(f"{c:.4f}" for c in comp)
           + f"; finest < rho^eta = {(2.0 ** -10) ** eta:.3f}: {small}")


def test_criterion_08_certificates():
    rng = np.random.default_rng(8)
    d = product_decomposition(C45, 2.0 ** -11)
    certs, tries = [], 0
    while len(certs) < 20 and tries < 200:
        tries += 1
        cert = faithful_extract(d, float(rng.uniform(-2, 2)), 0.05, A=2.0)
        if cert.success:
            certs.append(cert)
    bad = pre = 0
    for cert in certs:
        # the rho^eta < 1/(2C) condition only guards the doubled-eta count, not disjointness
        s = perturbation_stability(cert, 1.0, d, strict=False)
        pre += s.precondition_met
        direct = all(min_gap(*(a[s.indices] for a in projected_intervals(d, cert.lam + e))) > 0
                     for e in (-d.rho, d.rho))
        bad += not (cert.validate() and all(s.reprojection_disjoint.values()) and direct)
    record(8, len(certs) == 20 and bad == 0,
           f"{len(certs)} certificates from {tries} slopes, {bad} unsound, "
           f"{pre} meet the cardinality precondition")


def test_criterion_09_sullivan():
    one = Tail(Word(), Word((1,)))
    g = sullivan_limit(GAUSS, one, tol=1e-12)
    dist = g.distances
    ratios = [dist[k] / dist[k - 1] for k in range(3, len(dist)) if dist[k - 1] > 1e-13]
    aff = sullivan_limit(C4, one)
    ok = g.converged and ratios and max(ratios) < 0.6 and aff.k == 1 and aff.distances == [0.0]
    record(9, ok, f"max ratio {max(ratios):.3f}; affine k = {aff.k}, distance {aff.distances[0]}")


def test_criterion_10_linear_lemma():
    slope = abs(eigenvalue_check(GAUSS, 1).conjugated_slope)
    mixed = max(lemma_linear_check(mixed_system(3), u, v).part_iii
                for u, v in [((1,), (2,)), ((2, 1), (1, 2, 2)), ((1, 2, 1), (2,))])
    affine = max(lemma_linear_check(C4, u, v).part_iii
                 for u, v in [((2,), (1, 2)), ((1, 2), (2, 2, 1))])
    record(10, abs(slope - 0.381966) < 1e-6 and mixed < 1e-6 and affine < 1e-12,
           f"slope {slope:.7f}; residuals {mixed:.1e} mixed, {affine:.1e} affine")


def edge_slope(v) -> float:
    (p1, p2), (u1, u2) = v.parent.pair, v.pair
    return (cylinder_length(C4, p1) / cylinder_length(C4, u1)
            * cylinder_length(C5, u2) / cylinder_length(C5, p2) * v.parent.slope)


def test_criterion_11_tree():
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tree = build_tree(C45, 1.0, rho=0.05, eta=0.1, depth=3)
        small = build_tree(C45, 1.0, rho=0.02, eta=0.02, depth=2)
    rep = check_properties(tree)
    err = max(abs(edge_slope(v) / v.slope - 1) for v in tree.vertices() if v.parent is not None)
    err = max(err, max(abs(value_lambda(C45, v.pair, 1.0) / v.slope - 1) for v in tree.vertices()))
    bound = dimension_lower_bound(small).value
    dt = time.perf_counter() - t0
    record(11, rep.all_pass and err <= 1e-12 and bound > 0.6 and dt < 300,
           f"(A)-(D) {rep.all_pass}; edge error {err:.1e}; bound {bound:.3f}; {dt:.1f} s")


def test_criterion_12_hypothesis_checkers():
    affine = all(essential_nonlinearity(central_cantor(n)) is None for n in (3, 4, 5))
    w = essential_nonlinearity(GAUSS)
    inc = incommensurability(0.25, 0.2, 10 ** 6, 1e-12)
    sd = scaling_density_search(0.25, 0.2, 1.0, 0.05)
    ok = affine and w is not None and abs(w.value) >= 10 and inc.verdict == "no-rational-found" \
        and (sd.k, sd.l) == (7, 6)
    record(12, ok, f"affine negative {affine}; witness {abs(w.value):.1f}; {inc.verdict}; "
                   f"scaling ({sd.k}, {sd.l})")


def test_criterion_13_determinism(tmp_path, capsys):
    for name in ("a", "b"):
        cfg = load_config(first="cantor:4", second="cantor:5", seed=11, rhos=dyadic_scales(7, 12),
                          out=str(tmp_path / name))
        np.random.seed(cfg.seed)
        cmd_theorem_check(cfg)
    capsys.readouterr()
    files = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    record(13, bool(files) and same, f"{len(files)} CSVs byte-identical: {same}")
