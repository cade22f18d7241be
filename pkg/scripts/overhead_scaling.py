"""Amortized physical accesses per logical op across n, with growth ratios."""

import argparse
import math
import time

from oblivram import OramConfig, oram_new
from oblivram.cli import _initial_values
from oblivram.oram_core import parse_mode
from oblivram.workloads import random_ops


def per_op(n, mode, seed, ops_factor):
    client = oram_new(OramConfig(n, mode=mode, seed=seed), _initial_values(n, seed))
    base = client.physical_accesses()
    T = int(n * ops_factor)
    for op in random_ops(n, T, seed):
        client.access(op.addr, op.kind, op.value)
    return (client.physical_accesses() - base) / T, client


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", default="10,12,14,16", help="log2 n values")
    ap.add_argument("--modes", default="const,sublinear:2")
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--ops-factor", type=float, default=1.0, help="T = factor * n")
    args = ap.parse_args()
    Ls = [int(x) for x in args.levels.split(",")]
    for text in args.modes.split(","):
        mode = parse_mode(text)
        power = 2 if text == "const" else 1
        prev = None
        print(f"mode={mode}")
        for L in Ls:
            t = time.perf_counter()
            x, client = per_op(1 << L, mode, args.seed, args.ops_factor)
            line = f"  L={L:2d} per_op={x:.4g} rebuilds={sum(client.stats.rebuilds.values())} " \
                   f"retries={client.stats.retries} secs={time.perf_counter() - t:.1f}"
            if prev is not None:
                pL, px = prev
                target = (L / pL) ** power
                line += f" ratio={x / px:.3f} target={target:.3f} measured/target={x / px / target:.3f}"
            print(line, flush=True)
            prev = (L, x)


if __name__ == "__main__":
    main()
