"""I/O counts of the external oblivious sort against (N/B) log^2_{M/B}(N/B).

Counts come from the exact count-only twin, so large N is cheap; ``--verify``
also runs the real sort for each N and checks the count and sortedness.
"""

import argparse

from oblivram.analysis import fit_io_constant
from oblivram.cli import sort_trial
from oblivram.oblivious_sort import arity, em_sort_io


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--B", type=int, default=16)
    ap.add_argument("--M", type=int, default=3 * 16 ** 4 + 64)
    ap.add_argument("--powers", default="12,14,16,18,20,22")
    ap.add_argument("--verify", action="store_true")
    args = ap.parse_args()
    M, B = args.M, args.B
    Ns = [1 << int(p) for p in args.powers.split(",")]
    ios = [sum(em_sort_io(N, M, B)) for N in Ns]
    c, rel = fit_io_constant(Ns, ios, M, B)
    print(f"M={M} B={B} arity={arity(M, B)} fitted C={c:.4f}")
    for N, io, r in zip(Ns, ios, rel):
        line = f"  N=2^{N.bit_length() - 1:<2d} io={io:<12d} io/(C*model)={r:.3f}"
        if args.verify:
            log, ok = sort_trial(N, M, B, 0)
            line += f" real={sum(log.counts())} sorted={ok}"
        print(line, flush=True)


if __name__ == "__main__":
    main()
