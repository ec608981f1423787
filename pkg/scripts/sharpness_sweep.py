"""Sweep the sharpness experiment over (delta, eps) and print the fitted constants.

Usage: python3 scripts/sharpness_sweep.py [--n 8192] [--length 512] [--csv sweep.csv]
"""
import argparse

from lightcone import harness as H
from lightcone.io import write_csv
from lightcone.spectral import make_grid

TIMES = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100] + list(range(120, 421, 20))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=8192)
    ap.add_argument("--length", type=float, default=512.0)
    ap.add_argument("--origin", type=float, default=-64.0)
    ap.add_argument("--deltas", type=float, nargs="+", default=[0.7, 0.8, 0.9])
    ap.add_argument("--eps", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    ap.add_argument("--csv")
    args = ap.parse_args(argv)
    g = make_grid(1, args.n, args.length, origin=(args.origin,))
    upper = args.origin + args.length
    rows = []
    print(f"{'delta':>6} {'eps':>6} {'R':>9} {'C_env':>9} {'C_lsq':>9} {'last':>8} {'first>':>7}")
    for delta in args.deltas:
        for eps in args.eps:
            rep = H.sharpness_run(g, delta, eps, [t for t in TIMES if t < upper])
            last = max((j for j, ok in enumerate(rep.in_box) if ok), default=None)
            meas = rep.measured[last] if last is not None else float("nan")
            hit = rep.first_exceed[0.5]
            print(f"{delta:6.2f} {eps:6.2f} {rep.R:9.4f} {rep.C_envelope:9.3f} {rep.C_lsq:9.3f} "
                  f"{meas:8.4f} {str(hit):>7}")
            rows.append([delta, eps, rep.R, rep.C_envelope, rep.C_lsq, meas, hit])
    if args.csv:
        write_csv(args.csv, ["delta", "eps", "R", "C_envelope", "C_lsq", "measured_last", "first_exceed"],
                  rows)


if __name__ == "__main__":
    main()
