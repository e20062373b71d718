"""Per-level decay estimates against the dense eigenvalue, as CSV."""

import argparse
import csv
import sys

from skipfree import oracle
from skipfree.model import TruncationWindow
from skipfree.presets import PRESETS, preset
from skipfree.qsd import decay_parameter


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="bd-drift-down", choices=sorted(PRESETS))
    ap.add_argument("--levels", default="25,50,100,200,400")
    ap.add_argument("--dense-max", type=int, default=400, help="skip the dense check above this level")
    args = ap.parse_args()
    m = preset(args.model)
    which = "X" if m.is_killed else "Y"
    out = csv.writer(sys.stdout)
    out.writerow(["level", "lambda_recursion", "lambda_dense"])
    for N in (int(v) for v in args.levels.split(",")):
        lam = decay_parameter(m, TruncationWindow(N, schedule=(N,)), which).lambda0
        dense = oracle.principal_eigenpair(m, N, with_killing=m.is_killed).rate if N <= args.dense_max else ""
        out.writerow([N, repr(lam), repr(dense) if dense != "" else ""])


if __name__ == "__main__":
    main()
