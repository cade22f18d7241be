"""Statistics used by the harness: probe uniformity and tail fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

MAX_BINS = 64
MIN_PROBES = 1000


@dataclass(frozen=True)
class UniformityResult:
    level: int
    epoch: int
    probes: int
    statistic: float
    p_value: float


def chi_square_uniform(cells: np.ndarray, n_cells: int) -> tuple[float, float]:
    """Chi-square test of ``cells`` against uniform on ``[0, n_cells)``.

    Cells are grouped into ``min(64, n_cells)`` contiguous bins of near-equal
    width; expected counts are proportional to each bin's width.
    """
    cells = np.asarray(cells, dtype=np.int64)
    nb = min(MAX_BINS, n_cells)
    edges = (np.arange(nb + 1) * n_cells) // nb
    obs = np.bincount(np.searchsorted(edges, cells, side="right") - 1, minlength=nb)[:nb]
    exp = np.diff(edges) * (len(cells) / n_cells)
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue)


def probe_uniformity(probes: dict, table_cells: dict, min_probes: int = MIN_PROBES) -> list[UniformityResult]:
    """One test per (level, epoch) with at least ``min_probes`` recorded probe cells."""
    out = []
    for (level, epoch), cells in sorted(probes.items()):
        if len(cells) < min_probes:
            continue
        stat, p = chi_square_uniform(np.asarray(cells), table_cells[level])
        out.append(UniformityResult(level, epoch, len(cells), stat, p))
    return out


def fit_geometric_tail(survival: np.ndarray, k_min: int = 1) -> tuple[float, float]:
    """Fit ``log S(k) = a + k log(beta)`` over ``k >= k_min`` with ``S(k) > 0``.

    Returns ``(beta, r_squared)``.
    """
    survival = np.asarray(survival, dtype=float)
    k = np.arange(len(survival))
    mask = (k >= k_min) & (survival > 0)
    if mask.sum() < 2:
        return math.nan, math.nan
    x, y = k[mask], np.log(survival[mask])
    res = stats.linregress(x, y)
    return float(math.exp(res.slope)), float(res.rvalue ** 2)


def fit_io_constant(ns, ios, M: int, B: int) -> tuple[float, list[float]]:
    """Geometric-mean constant ``C`` for ``io ~ C (N/B) log_{M/B}(N/B)^2`` and per-point ratios."""
    model = [(N / B) * (math.log(N / B) / math.log(M / B)) ** 2 for N in ns]
    ratios = [io / mdl for io, mdl in zip(ios, model)]
    c = math.exp(sum(math.log(r) for r in ratios) / len(ratios))
    return c, [r / c for r in ratios]
