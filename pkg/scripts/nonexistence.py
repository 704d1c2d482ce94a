"""Refinement study for the pinned problem 1/2|dw|^2 + 1/2|w|^2.

Interior mass of the discrete minimizer should shrink as the grid is refined
when k = 2; the k = 1 control keeps it.
"""

import argparse
import json

from formvar.minimization import nonexistence_probe


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--res", default="8,16,32")
    ap.add_argument("--k", type=int, default=2)
    ap.add_argument("--method", choices=["linear", "descent"], default="linear")
    ap.add_argument("--out")
    args = ap.parse_args()
    res = tuple(int(r) for r in args.res.split(","))

    rep = nonexistence_probe(res, k=args.k, method=args.method)
    print(f"{'res':>5} {'energy':>12} {'interior':>12} {'boundary':>12}")
    for r, e, i, b in zip(rep.res, rep.energies, rep.interior_mass, rep.boundary_adjacent_mass):
        print(f"{r:5d} {e:12.6f} {i:12.3e} {b:12.3e}")
    print(f"interior mass decreasing: {rep.decreasing}; relaxed minimizer norm {rep.relaxed_norm:.2e}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(rep.to_dict(), fh, indent=2)


if __name__ == "__main__":
    main()
