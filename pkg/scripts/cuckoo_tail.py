"""Component-size survival and stash occupancy of random cuckoo graphs at several loads."""

import argparse
import math
from collections import Counter

import numpy as np

from oblivram.analysis import fit_geometric_tail
from oblivram.cli import cuckoo_trial
from oblivram.cuckoo_hash import component_stats
from oblivram.hashing import derive_seed
from oblivram.oblivious_build import fast_cuckoo_cells


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--loads", default="0.1,0.2,0.25,1/3,0.4,0.45")
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    kmax = 128
    print(f"n={args.n} trials={args.trials}  (load = keys / (2m))")
    for text in args.loads.split(","):
        num, _, den = text.partition("/")
        load = float(num) / float(den or 1)
        m = math.ceil(args.n / (2 * load))
        counts = np.zeros(kmax + 1)
        stash = Counter()
        for t in range(args.trials):
            keys, hashes = cuckoo_trial(args.n, m, derive_seed(args.seed, t))
            vs = component_stats(keys, hashes).vertex_sizes
            counts += np.bincount(np.minimum(vs, kmax), minlength=kmax + 1)[: kmax + 1]
            stash[int((fast_cuckoo_cells(keys, hashes) == 0).sum())] += 1
        surv = counts[::-1].cumsum()[::-1] / counts.sum()
        beta, r2 = fit_geometric_tail(surv, 1)
        top = int(np.flatnonzero(surv).max())
        hist = " ".join(f"{k}:{v}" for k, v in sorted(stash.items()))
        print(f"  load={load:.3f} m={m} beta={beta:.3f} r2={r2:.3f} largest={top} stash {hist}", flush=True)


if __name__ == "__main__":
    main()
