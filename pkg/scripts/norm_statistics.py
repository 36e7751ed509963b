"""Coefficient-norm statistics of the K-null design and the band-stop bracket.

Prints mean / RMS of ||g||_IQ-1 next to the published values and the RMS sandwich.
"""
import argparse

from sdmimo.analysis import TABLE1_MEAN, TABLE1_RMS, bounds_sweep, table1_stats
from sdmimo.designs import prop1_rms_bounds


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(" K     mean  (pub.)      rms  (pub.)   rms bracket")
    for k in range(2, 9):
        s = table1_stats(k, args.samples, args.seed)
        lo, hi = prop1_rms_bounds(k)
        print(f"{k:2d} {s.mean:8.2f} {TABLE1_MEAN[k]:7.2f} {s.rms:8.2f} {TABLE1_RMS[k]:7.2f}   [{lo:.2f}, {hi:.0f}]")
    print("\n L  lower   min norm   max norm   upper")
    for r in bounds_sweep(seed=args.seed):
        print(f"{r['L']:2d} {r['lower']:6.0f} {r['norm_min']:10.3f} {r['norm_max']:10.3f} {r['upper']:7.2f}")


if __name__ == "__main__":
    main()
