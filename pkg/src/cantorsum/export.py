"""Deterministic CSV writers: header row, comma separator, repr floats, LF line endings."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def _cell(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, tuple) and all(isinstance(s, (int, np.integer)) for s in x):
        return ".".join(str(int(s)) for s in x)
    return str(x)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])
    return path


def write_spectrum(path, lams, counts) -> Path:
    return write_csv(path, ["lambda", "N"], zip(lams, counts))


def write_certificate(path, cert) -> Path:
    rows = ((p[0], p[1], lo, hi) for p, lo, hi in zip(cert.pairs, cert.lo, cert.hi))
    return write_csv(path, ["word1", "word2", "lo", "hi"], rows)


def write_limit(path, limit) -> Path:
    return write_csv(path, ["node", "value", "derivative"],
                     zip(limit.nodes, limit.values, limit.derivs))


def write_tree(path, tree) -> Path:
    rows = ((v.level, v.pair[0], v.pair[1], v.slope, v.branching, v.gap)
            for v in tree.vertices())
    return write_csv(path, ["level", "word1", "word2", "slope", "branching", "gap"], rows)


def write_dimension(path, estimate) -> Path:
    return write_csv(path, ["rho", "count"], zip(estimate.scales, estimate.counts))
