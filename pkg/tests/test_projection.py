import itertools
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cantorsum.decomposition import ProductSystem, product_decomposition, rectangle_distances
from cantorsum.dimension import projected_intervals
from cantorsum.ifs import central_cantor, gauss_system
from cantorsum.projection import (
    IDENTITY,
    PerturbationPair,
    Rectangle,
    brute_force_count,
    exact_integral,
    faithful_extract,
    fattening_constant,
    good_slopes,
    greedy_disjoint,
    integral_claim_check,
    intersection_count,
    min_gap,
    overlap_count,
    overlap_slopes_measure,
    perturbation_stability,
    ply,
    project,
    slope_grid,
    spectrum,
)

C3, C4, C5 = central_cantor(3), central_cantor(4), central_cantor(5)
GAUSS = gauss_system((1, 3))
C45 = ProductSystem(C4, C5)


def test_project_examples():
    assert project(Rectangle(((), ()), (0, 1 / 9), (0, 1 / 9)), 1.0) == pytest.approx((0, 2 / 9))
    assert project(Rectangle(((), ()), (0.2, 0.3), (0.5, 0.9)), 0.0) == pytest.approx((0.2, 0.3))
    assert project(Rectangle(((), ()), (0, 0.1), (0.5, 0.6)), -2.0) == pytest.approx((-1.2, -0.9))


def test_vertical_projection_count_c3():
    d = product_decomposition(ProductSystem(C3, C3), 0.01)
    assert intersection_count(d, 0.0) == 16 * 16 ** 2


def test_count_matches_brute_force_c45():
    d = product_decomposition(C45, 0.01)
    lo, hi = projected_intervals(d, 1.0)
    assert intersection_count(d, 1.0) == brute_force_count(lo, hi) == 120


def test_spectrum_matches_pointwise():
    d = product_decomposition(ProductSystem(GAUSS, C4), 2 ** -7)
    lams = np.linspace(-2, 2, 101)
    phi = PerturbationPair(0.1, -0.2)
    expected = [brute_force_count(*projected_intervals(d, lam, phi)) for lam in lams]
    np.testing.assert_array_equal(spectrum(d, lams, phi, chunk_elems=1000), expected)


@settings(max_examples=100, deadline=None)
@given(pair=st.sampled_from([(C3, C3), (C4, C5), (GAUSS, C4), (C5, GAUSS)]),
       lam=st.floats(-3, 3), k=st.integers(3, 9),
       d1=st.floats(-0.4, 0.4), d2=st.floats(-0.4, 0.4))
def test_exactness_and_parity(pair, lam, k, d1, d2):
    d = product_decomposition(ProductSystem(*pair), 2.0 ** -k)
    if len(d) > 2000:
        return
    phi = PerturbationPair(d1, d2)
    lo, hi = projected_intervals(d, lam, phi)
    n = intersection_count(d, lam, phi)
    assert n == brute_force_count(lo, hi)
    assert (n - len(d)) % 2 == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(0, 6)), min_size=0, max_size=60))
def test_overlap_count_with_touching_endpoints(items):
    lo = np.array([a for a, _ in items], dtype=float)
    hi = lo + np.array([w for _, w in items], dtype=float)
    assert overlap_count(lo, hi) == brute_force_count(lo, hi)


def test_slope_grid_anchored_at_zero():
    g = slope_grid(-1.0, 1.0, 0.25)
    np.testing.assert_allclose(g, np.arange(-4, 5) * 0.25)
    assert np.isin(slope_grid(-0.5, 0.5, 0.25), g).all()


def test_integral_claim_ratios():
    ratios = [integral_claim_check(C45, 2.0 ** -k, 2.0).ratio for k in (6, 8, 10)]
    assert max(ratios) / min(ratios) < 4.0


def test_integral_claim_grid_refinement():
    a = integral_claim_check(C45, 2 ** -8, 2.0, grid=4001)
    b = integral_claim_check(C45, 2 ** -8, 2.0, grid=8001)
    assert abs(b.integral / a.integral - 1) < 0.05


def test_exact_integral_single_rectangle():
    d = product_decomposition(C45, 2.0)
    assert len(d) == 1
    assert exact_integral(d, 2.0) == pytest.approx(4.0, abs=1e-15)


@pytest.mark.parametrize("k", [6, 8])
def test_exact_integral_matches_trapezoid(k):
    a = integral_claim_check(C45, 2.0 ** -k, 2.0, grid=200001)
    b = integral_claim_check(C45, 2.0 ** -k, 2.0, method="exact")
    assert b.integral == pytest.approx(a.integral, rel=1e-3)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-1, 1), st.floats(0.01, 0.5), st.floats(-1, 1), st.floats(0.01, 0.5)),
                min_size=1, max_size=6))
def test_exact_integral_random_rectangles(rects):
    r = np.array(rects)
    box = SimpleNamespace(x_lo=r[:, 0], x_hi=r[:, 0] + r[:, 1], y_lo=r[:, 2], y_hi=r[:, 2] + r[:, 3])
    lams = np.linspace(-1.5, 1.5, 30001)
    n = [brute_force_count(box.x_lo + np.minimum(lam * box.y_lo, lam * box.y_hi),
                           box.x_hi + np.maximum(lam * box.y_lo, lam * box.y_hi)) for lam in lams]
    # a step function with at most 4 n^2 jumps, each off by at most one grid cell
    slack = 4 * len(r) ** 2 * (lams[1] - lams[0])
    assert abs(exact_integral(box, 1.5) - np.trapezoid(n, lams)) <= slack


def test_integral_claim_rejects_coarse_grid():
    with pytest.raises(ValueError):
        integral_claim_check(C45, 2 ** -8, 2.0, grid=100)


def test_good_slopes_bound_at_fine_scale():
    gs = good_slopes(C45, 2 ** -10, 0.05, 2.0)
    assert gs.complement_measure < gs.bound


def test_vertical_slope_excluded_for_c3_square():
    gs = good_slopes(ProductSystem(C3, C3), 0.01, 0.05, 2.0)
    zero = np.flatnonzero(np.isclose(gs.lams, 0.0))[0]
    assert gs.counts[zero] == 4096 >= gs.threshold
    assert not gs.good[zero]


def test_good_slopes_empty_decomposition_keeps_grid():
    d = product_decomposition(C45, 0.01)
    empty = type(d)(d.system, d.rho, d.first.__class__(0.01, 2, *(np.zeros(0, np.int64),) * 2,
                                                          *(np.zeros(0),) * 3), d.second)
    gs = good_slopes(C45, 0.01, 0.05, 2.0, decomp=empty)
    assert gs.good.all()


def test_good_slopes_ia_domain():
    gs = good_slopes(C45, 2 ** -8, 0.05, 2.0, domain="IA")
    assert np.all(np.abs(gs.lams) >= 0.5 - 1e-12)
    with pytest.raises(ValueError):
        good_slopes(C45, 2 ** -8, 0.3, 2.0)


def test_extraction_fails_at_coarse_scale_even_for_best_family():
    # at rho = 2^-10 no disjoint family is large enough: the greedy family is maximum
    d = product_decomposition(C45, 2 ** -10)
    lo, hi = projected_intervals(d, 1.0)
    best = len(greedy_disjoint(lo, hi))
    cert = faithful_extract(d, 1.0, 0.05, A=2.0)
    assert best == 136 < cert.threshold
    assert not cert.success and cert.gap > 0


def test_extraction_succeeds_and_chain_holds():
    d = product_decomposition(C45, 2 ** -11)
    cert = faithful_extract(d, 1.0, 0.05, A=2.0)
    assert cert.success and cert.validate()
    assert cert.eta == pytest.approx(0.2)
    chain = cert.counting_chain()
    assert chain["cauchy_schwarz"] and chain["pairs"] and chain["covering"] and chain["thinning"]
    assert len(cert) >= chain["bound"]


def test_disjoint_input_kept_up_to_factor_three():
    d = product_decomposition(C45, 2 ** -11)
    lo, hi = projected_intervals(d, 1.0)
    subset = greedy_disjoint(lo, hi)
    cert = faithful_extract(d, 1.0, 0.05, subset=subset, A=2.0)
    assert 3 * len(cert) >= len(subset)
    assert set(cert.indices) <= set(subset.tolist())


def test_adversarial_slope_reports_best_effort():
    d = product_decomposition(ProductSystem(C4, C4), 2 ** -10)
    cert = faithful_extract(d, 0.0, 0.05, A=2.0)
    assert not cert.in_good_set
    assert cert.gap > 0  # still a disjoint family


def test_stability_identity_perturbation():
    d = product_decomposition(C45, 2 ** -11)
    cert = faithful_extract(d, 1.0, 0.05, A=2.0)
    s = perturbation_stability(cert, 0.0, d)
    assert s.C == 1.0
    np.testing.assert_array_equal(s.indices, cert.indices)


def test_stability_reprojection():
    d = product_decomposition(C45, 2 ** -11)
    cert = faithful_extract(d, 1.0, 0.05, A=2.0)
    s = perturbation_stability(cert, 1.0, d)
    assert s.precondition_met
    assert len(s.reprojection_disjoint) == 4 and all(s.reprojection_disjoint.values())
    # direct oracle at lambda +- rho with unperturbed phi
    for lam in (1.0 - d.rho, 1.0 + d.rho):
        lo, hi = projected_intervals(d, lam)
        assert min_gap(lo[s.indices], hi[s.indices]) > 0


def test_stability_rejects_large_rho():
    d = product_decomposition(C45, 0.3)
    cert = faithful_extract(d, 1.0, 0.05, A=2.0, threshold=0)
    with pytest.raises(ValueError, match="rho too large"):
        perturbation_stability(cert, 1.0, d)
    assert not perturbation_stability(cert, 1.0, d, strict=False).precondition_met


def test_fattening_constant_formula():
    lo, hi = np.array([0.0, 1.0]), np.array([0.1, 1.2])
    assert fattening_constant(lo, hi, 1.0, 0.01, 1.0) == pytest.approx(
        1 + 2 * 0.01 * (3 + 0.01) / 0.1)


@pytest.mark.parametrize("rho", [2 ** -8, 2 ** -10])
def test_common_directions_measure(rho):
    d = product_decomposition(C45, rho)
    lams = np.linspace(-2, 2, 40001)
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(150):
        i, j = rng.choice(len(d), 2, replace=False)
        dist = rectangle_distances(d, i)[j]
        worst = max(worst, overlap_slopes_measure(d, i, j, lams) * dist / rho)
    assert worst < 50.0  # measured about 25 at both scales


@settings(max_examples=60, deadline=None)
@given(lam=st.floats(-2, 2), k=st.integers(9, 12))
def test_certificate_soundness(lam, k):
    d = product_decomposition(C45, 2.0 ** -k)
    cert = faithful_extract(d, lam, 0.05, A=2.0)
    assert cert.gap > 0
    assert cert.validate() == cert.success
    lo, hi = projected_intervals(d, lam)
    np.testing.assert_array_equal(lo[cert.indices], cert.lo)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.01, 1)), min_size=1, max_size=40))
def test_greedy_is_maximum_and_ply(items):
    lo = np.array([a for a, _ in items])
    hi = lo + np.array([w for _, w in items])
    keep = greedy_disjoint(lo, hi)
    assert min_gap(lo[keep], hi[keep]) > 0
    # interval graphs are perfect: ply colours cover the family, each colour is disjoint
    assert len(keep) * ply(lo, hi) >= len(lo)
    if len(lo) <= 10:
        best = max(len(c) for r in range(len(lo) + 1) for c in itertools.combinations(range(len(lo)), r)
                   if len(c) < 2 or min_gap(lo[list(c)], hi[list(c)]) > 0)
        assert len(keep) == best


def test_perturbation_pair_c1_distance():
    phi = PerturbationPair.with_c1_distance(0.2, 0.1)
    x = np.linspace(0, 1, 10001)
    assert np.max(np.abs(np.gradient(phi.first(x), x) - 1)) == pytest.approx(0.2, rel=1e-3)
    assert phi.c1_distance(2) == pytest.approx(0.1)
    assert IDENTITY.is_identity
    with pytest.raises(ValueError):
        PerturbationPair(0.6, 0.0)
