import math

import numpy as np
from scipy import stats

from oblivram.analysis import (chi_square_uniform, fit_geometric_tail, fit_io_constant,
                               probe_uniformity)


def test_chi_square_matches_direct_computation():
    rng = np.random.default_rng(0)
    cells = rng.integers(0, 100, 5000)
    stat, p = chi_square_uniform(cells, 100)
    # 64 bins over 100 cells: widths 1 or 2
    edges = (np.arange(65) * 100) // 64
    obs = np.array([((cells >= a) & (cells < b)).sum() for a, b in zip(edges[:-1], edges[1:])])
    exp = np.diff(edges) * 50.0
    want = ((obs - exp) ** 2 / exp).sum()
    assert math.isclose(stat, want)
    assert math.isclose(p, stats.chi2.sf(want, 63))


def test_chi_square_flags_skew():
    cells = np.concatenate([np.zeros(3000, int), np.arange(1000) % 64])
    assert chi_square_uniform(cells, 64)[1] < 1e-10


def test_probe_uniformity_threshold():
    rng = np.random.default_rng(1)
    probes = {(3, 1): rng.integers(0, 40, 2000).tolist(), (3, 2): [1, 2, 3]}
    res = probe_uniformity(probes, {3: 40})
    assert [(r.level, r.epoch, r.probes) for r in res] == [(3, 1, 2000)]


def test_geometric_fit_recovers_rate():
    k = np.arange(20)
    beta, r2 = fit_geometric_tail(0.7 ** k, k_min=1)
    assert math.isclose(beta, 0.7) and math.isclose(r2, 1.0)
    assert math.isnan(fit_geometric_tail(np.array([1.0, 0.0]), 1)[0])


def test_io_constant_fit():
    ns = [2 ** 10, 2 ** 12, 2 ** 14]
    M, B = 1000, 10
    model = [(N / B) * (math.log(N / B) / math.log(M / B)) ** 2 for N in ns]
    c, rel = fit_io_constant(ns, [3 * x for x in model], M, B)
    assert math.isclose(c, 3) and all(math.isclose(r, 1) for r in rel)
