"""Per-round message volume of the BFS cuckoo construction, for fitting its ceiling."""

import argparse
import math
import random

import numpy as np

from oblivram.hashing import HashPair
from oblivram.oblivious_build import bfs_ceiling, bfs_message_stats


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="64,256,1024,4096")
    ap.add_argument("--seeds", type=int, default=40)
    ap.add_argument("--load", type=float, default=0.5, help="keys per cell of one sub-table")
    args = ap.parse_args()
    for n in map(int, args.sizes.split(",")):
        m = math.ceil(n / args.load)
        per_round = []
        used = []
        for seed in range(args.seeds):
            rng = random.Random(seed)
            keys = rng.sample(range(1 << 40), n)
            r = bfs_message_stats(keys, HashPair(rng.getrandbits(63), rng.getrandbits(63), m))
            per_round.append(r.round_sizes)
            used.append(r.rounds_used)
        width = max(used)
        mat = np.zeros((len(per_round), width))
        for i, row in enumerate(per_round):
            mat[i, : len(row)] = row
        worst = mat.max(axis=0) / n
        slack = [bfs_ceiling(i + 1, n) / n for i in range(width)]
        print(f"n={n} rounds max={width} mean={np.mean(used):.1f}")
        print("  worst/n :", " ".join(f"{x:.2f}" for x in worst))
        print("  ceil/n  :", " ".join(f"{x:.2f}" for x in slack))


if __name__ == "__main__":
    main()
