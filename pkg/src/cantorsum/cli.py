"""Command-line driver: ``cantorsum <command> [--config FILE] [flags]``.

Exit codes: 0 success, 1 invariant or hypothesis failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import export
from .config import ConfigError, ExperimentConfig, load_config
from .decomposition import ProductSystem, cardinality_scaling, product_decomposition, rho_words
from .dimension import moran_dimension, sumset_dimension
from .hypotheses import check_incommensurability, essential_nonlinearity
from .ifs import IfsError, RegularIfs, all_words, ifs_from_spec, ifs_to_spec, trim
from .limit_geometry import Tail, decay_ratios, sullivan_limit
from .moran_tree import build_tree, check_properties, dimension_lower_bound, recurrence_search
from .projection import PerturbationPair, faithful_extract, perturbation_stability, spectrum

OK, FAIL, CONFIG = 0, 1, 2


def _systems(cfg: ExperimentConfig) -> ProductSystem:
    try:
        first = ifs_from_spec(cfg.first)
        second = ifs_from_spec(cfg.second)
    except IfsError as exc:
        raise ConfigError(f"invalid system: {exc}") from None
    return ProductSystem(first, second, cfg.dim_depth)


def _phi(cfg: ExperimentConfig) -> PerturbationPair:
    return PerturbationPair.with_c1_distance(cfg.delta, cfg.delta)


def _out(cfg: ExperimentConfig, name: str) -> Path:
    return Path(cfg.out) / name


def _describe(label: str, ifs: RegularIfs) -> None:
    print(f"{label}: {ifs.name or 'unnamed'}  hull [{ifs.hull[0]:.6g}, {ifs.hull[1]:.6g}]")
    for i, spec in enumerate(ifs_to_spec(ifs)["maps"], 1):
        coeffs = ", ".join(f"{k}={v:.10g}" for k, v in spec.items() if k != "kind")
        print(f"  f{i}: {spec['kind']}({coeffs})")


# --- commands -------------------------------------------------------------

def cmd_validate(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    _describe("K1", sys_.first)
    _describe("K2", sys_.second)
    print(f"d1 = {sys_.d1:.5f}  d2 = {sys_.d2:.5f}  d = {sys_.d:.5f}")
    return OK


def cmd_dimension(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    e1, e2 = moran_dimension(sys_.first, _depth(sys_.first, cfg)), moran_dimension(sys_.second, _depth(sys_.second, cfg))
    est = sumset_dimension(sys_, cfg.lam, cfg.rhos)
    print(f"d1 = {e1.value:.5f} ({e1.method})  d2 = {e2.value:.5f} ({e2.method})")
    print(f"box dimension of K1 + {cfg.lam:g} K2: {est.value:.5f} (raw slope {est.raw_slope:.5f}, "
          f"rms residual {est.residual:.3g})  predicted min(d, 1) = {min(sys_.d, 1.0):.5f}")
    export.write_dimension(_out(cfg, "dimension.csv"), est)
    return OK


def _depth(ifs: RegularIfs, cfg: ExperimentConfig) -> int:
    from .dimension import default_depth

    return cfg.dim_depth or default_depth(ifs)


def cmd_decompose(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    w1, w2 = rho_words(sys_.first, cfg.rho), rho_words(sys_.second, cfg.rho)
    print(f"rho = {cfg.rho:g}: #W1 = {len(w1)}  #W2 = {len(w2)}  #Lambda = {len(w1) * len(w2)}")
    if len(cfg.rhos) >= 4:
        fit = cardinality_scaling(sys_, cfg.rhos)
        print(f"growth exponent {fit.slope:.5f} vs d = {sys_.d:.5f}; sup #Lambda rho^d = {fit.constant:.4g}")
    rows = [(1, w, lo, hi) for w, lo, hi in zip(w1.words, w1.lo, w1.hi)]
    rows += [(2, w, lo, hi) for w, lo, hi in zip(w2.words, w2.lo, w2.hi)]
    export.write_csv(_out(cfg, "decomposition.csv"), ["factor", "word", "lo", "hi"], rows)
    return OK


def cmd_spectrum(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    decomp = product_decomposition(sys_, cfg.rho)
    lams = np.linspace(cfg.lam_lo, cfg.lam_hi, cfg.lam_n)
    counts = spectrum(decomp, lams, _phi(cfg) if cfg.delta else None)
    thr = cfg.rho ** (-2 * cfg.eta - sys_.d)
    print(f"{len(lams)} slopes, #Lambda = {len(decomp)}; N ranges {counts.min()}..{counts.max()}; "
          f"{int((counts >= thr).sum())} grid points at or above rho^(-2 eta - d) = {thr:.4g}")
    export.write_spectrum(_out(cfg, "spectrum.csv"), lams, counts)
    return OK


def cmd_faithful(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    decomp = product_decomposition(sys_, cfg.rho)
    cert = faithful_extract(decomp, cfg.lam, cfg.eta, phi=_phi(cfg), A=cfg.A)
    print(f"extracted {len(cert)} of {len(decomp)} rectangles; threshold rho^(4 eta - d) = "
          f"{cert.threshold:.4g}; gap {cert.gap:.4g}; success {cert.success}")
    if not cert.precondition_met:
        print(f"note: #Lambda = {len(decomp)} does not exceed rho^(eta - d) = "
              f"{cfg.rho ** (cfg.eta - sys_.d):.4g}")
    stab = perturbation_stability(cert, cfg.C0, decomp, strict=False)
    print(f"C0 = {cfg.C0:g}: fattening C = {stab.C:.4g}; stable subfamily {stab.size}; "
          f"rho^eta < 1/(2C): {stab.precondition_met}; re-projection disjoint: "
          f"{all(stab.reprojection_disjoint.values())}")
    export.write_certificate(_out(cfg, "certificate.csv"), cert)
    ok = cert.validate() and all(stab.reprojection_disjoint.values())
    return OK if ok else FAIL


def cmd_limit(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    try:
        tail = Tail.parse(cfg.tail)
    except ValueError as exc:
        raise ConfigError(f"bad tail {cfg.tail!r}: {exc}") from None
    code = OK
    for label, ifs in (("K1", sys_.first), ("K2", sys_.second)):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                L = sullivan_limit(ifs, tail, k_max=cfg.k_max, tol=cfg.limit_tol)
        except IfsError as exc:
            raise ConfigError(f"tail does not fit {label}: {exc}") from None
        if L.is_identity:
            print(f"{label}: identity, converged at k=1")
        else:
            ratios = decay_ratios(L.distances)
            tail_ratio = f"{np.median(ratios[2:]):.4f}" if len(ratios) > 2 else "n/a"
            state = "converged" if L.converged else "not converged"
            print(f"{label}: {state} at k={L.k}; last C1 step {L.distances[-1]:.3g}; "
                  f"median decay ratio {tail_ratio}")
            if not L.converged:
                code = FAIL
        export.write_limit(_out(cfg, f"limit_{label}.csv"), L)
    return code


def cmd_hypotheses(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    rows = []
    w1 = essential_nonlinearity(sys_.first, cfg.nonlinearity_depth)
    w2 = essential_nonlinearity(sys_.second, cfg.nonlinearity_depth)
    for label, w in (("K1", w1), ("K2", w2)):
        if w is None:
            print(f"nonlinearity {label}: negative")
        else:
            print(f"nonlinearity {label}: witness (i, j) = ({w.i}, {w.j}) at x0 = {w.point:.8f}, "
                  f"value {w.value:.6g}, distance to K <= {w.distance_to_K:.2g}")
        rows.append((f"nonlinearity_{label}", int(w is not None), abs(w.value) if w else 0.0))
    ok2, reps = check_incommensurability(sys_.first, sys_.second, cfg.q_max, cfg.rational_tol)
    best = max(reps, key=lambda r: (r.incommensurable, r.error))
    print(f"incommensurability: {best.verdict} (log r1 / log r2 = {best.ratio:.12f}, best p/q = "
          f"{best.p}/{best.q}, error {best.error:.3g}, q <= {cfg.q_max})")
    rows.append(("incommensurability", int(ok2), best.ratio))
    export.write_csv(_out(cfg, "hypotheses.csv"), ["check", "holds", "value"], rows)
    holds = (w1 is not None or w2 is not None) and ok2
    print(f"hypotheses hold: {holds}")
    return OK if holds else FAIL


def cmd_tree(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tree = build_tree(sys_, cfg.lam, _phi(cfg), cfg.rho, cfg.eta, cfg.depth, cfg.c_branch)
    if tree.empty:
        print(tree.diagnostic)
        return FAIL
    rep = check_properties(tree)
    bound = dimension_lower_bound(tree)
    print(f"levels {len(tree.levels)}; branching per level {tree.branching_range()}; "
          f"{len(tree.failures)} pruned")
    print(f"(A) {rep.A}  (B) {rep.B}  (C) {rep.C}  (D) {rep.D}  lambda identity {rep.value_lambda} "
          f"(max rel. error {rep.max_lambda_error:.2g})")
    print(f"dimension lower bound {bound.value:.4f} ({bound.method}); d - 9 eta = {bound.target:.4f}")
    export.write_tree(_out(cfg, "tree.csv"), tree)
    return OK if rep.all_pass else FAIL


def cmd_recurrence(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    rep = recurrence_search(sys_, cfg.rho, cfg.eta, cfg.A, cfg.depth, tail_len=cfg.tail_len)
    print(f"{rep.iterations} rounds, fixed point reached: {rep.fixed_point}; surviving grid points "
          f"per round {rep.sizes}")
    print(f"root family nonempty: {rep.nonempty}; meets both half-lines: {rep.both_signs}")
    rows = [(k[0], k[1], s) for k, v in sorted(rep.families.items()) for s in v]
    export.write_csv(_out(cfg, "recurrence.csv"), ["tail1", "tail2", "slope"], rows)
    return OK


def trim_below_one(sys_: ProductSystem, max_depth: int = 3) -> tuple[ProductSystem, str]:
    """Drop branches of the first system (after iterating) until d < 1, keeping d maximal."""
    if sys_.d < 1:
        return sys_, ""
    best = None
    for depth in range(1, max_depth + 1):
        for keep in range(2, sys_.first.m ** depth):
            cand = ProductSystem(trim(sys_.first, depth, keep), sys_.second, sys_.dim_depth)
            if cand.d < 1 and (best is None or cand.d > best[0].d):
                best = (cand, f"depth {depth}, keep {keep}")
    if best is None:
        raise ConfigError("cannot trim the first system below d = 1")
    return best


def cmd_theorem_check(cfg: ExperimentConfig) -> int:
    sys_ = _systems(cfg)
    predicted = min(sys_.d, 1.0)
    w1 = essential_nonlinearity(sys_.first, cfg.nonlinearity_depth)
    w2 = essential_nonlinearity(sys_.second, cfg.nonlinearity_depth)
    h1 = w1 is not None or w2 is not None
    h2, _ = check_incommensurability(sys_.first, sys_.second, cfg.q_max, cfg.rational_tol)
    est = sumset_dimension(sys_, 1.0, cfg.rhos)
    close = abs(est.value - predicted) <= cfg.dim_tol
    if close:
        verdict = "pass"
    elif not (h1 and h2):
        verdict = "hypothesis-failure"
    else:
        verdict = "violation"

    tree_sys, trimmed = trim_below_one(sys_)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tree = build_tree(tree_sys, 1.0, rho=cfg.tree_rho, eta=cfg.tree_eta,
                          depth=cfg.tree_depth, c_branch=cfg.c_branch)
    bound = dimension_lower_bound(tree)
    props = check_properties(tree) if not tree.empty else None

    print(f"system {sys_.name}: d1 = {sys_.d1:.5f}, d2 = {sys_.d2:.5f}, d = {sys_.d:.5f}")
    print(f"hypothesis (1) essential nonlinearity: {'holds' if h1 else 'fails'}")
    print(f"hypothesis (2) incommensurability: {'holds' if h2 else 'fails'}")
    print(f"sumset dimension at lambda = 1: measured {est.value:.5f}, predicted {predicted:.5f}, "
          f"tolerance {cfg.dim_tol:g} -> {verdict}")
    if trimmed:
        print(f"tree built on trimmed first system ({trimmed}); d = {tree_sys.d:.5f}")
    print(f"tree lower bound {bound.value:.5f} vs d - 9 eta = {bound.target:.5f}; "
          f"properties {'pass' if props and props.all_pass else 'fail'}")

    rows = [
        ("d1", sys_.d1, sys_.d1, 0.0, "info"),
        ("d2", sys_.d2, sys_.d2, 0.0, "info"),
        ("hypothesis_1", 1.0, float(h1), 0.0, "holds" if h1 else "fails"),
        ("hypothesis_2", 1.0, float(h2), 0.0, "holds" if h2 else "fails"),
        ("sumset_dimension", predicted, est.value, cfg.dim_tol, verdict),
        ("tree_lower_bound", bound.target, bound.value, 0.0,
         "pass" if props and props.all_pass else "fail"),
    ]
    export.write_csv(_out(cfg, "theorem.csv"),
                     ["quantity", "predicted", "measured", "tolerance", "verdict"], rows)
    export.write_dimension(_out(cfg, "sumset_counts.csv"), est)
    if not tree.empty:
        export.write_tree(_out(cfg, "theorem_tree.csv"), tree)
    return OK if verdict == "pass" else FAIL


COMMANDS = {
    "validate": cmd_validate,
    "dimension": cmd_dimension,
    "decompose": cmd_decompose,
    "spectrum": cmd_spectrum,
    "faithful": cmd_faithful,
    "limit": cmd_limit,
    "hypotheses": cmd_hypotheses,
    "tree": cmd_tree,
    "recurrence": cmd_recurrence,
    "theorem-check": cmd_theorem_check,
}


def _rho_list(text: str) -> list[float]:
    if ":" in text:
        a, b = (int(s) for s in text.split(":"))
        return [2.0 ** -k for k in range(a, b + 1)]
    return [float(s) for s in text.split(",") if s.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file")
    common.add_argument("--first", help="first system preset, e.g. cantor:4 or gauss:1,3")
    common.add_argument("--second", help="second system preset")
    common.add_argument("--lam", type=float, help="slope lambda")
    common.add_argument("--lam-lo", dest="lam_lo", type=float)
    common.add_argument("--lam-hi", dest="lam_hi", type=float)
    common.add_argument("--lam-n", dest="lam_n", type=int, help="lambda grid size")
    common.add_argument("--rhos", type=_rho_list, help="comma list, or K1:K2 for 2^-K1..2^-K2")
    common.add_argument("--rho", type=float)
    common.add_argument("--eta", type=float)
    common.add_argument("--A", type=float)
    common.add_argument("--delta", type=float, help="C1 size of the perturbation pair")
    common.add_argument("--C0", type=float)
    common.add_argument("--depth", type=int)
    common.add_argument("--dim-depth", dest="dim_depth", type=int)
    common.add_argument("--tail", help="eventually periodic tail, e.g. 2.1(1)")
    common.add_argument("--c-branch", dest="c_branch", type=float)
    common.add_argument("--out", help="output directory for CSV files")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="cantorsum", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, **overrides)
        np.random.seed(cfg.seed)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return CONFIG


if __name__ == "__main__":
    sys.exit(main())
