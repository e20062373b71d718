"""Regime verdicts and the series diagnostics behind them for every preset."""

import argparse

from skipfree.model import TruncationWindow
from skipfree.presets import EXPECTED_REGIME, PRESETS, preset
from skipfree.qsd import classify


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-max", type=int, default=400)
    args = ap.parse_args()
    win = TruncationWindow(args.n_max)
    print(f"{'preset':18s} {'regime':20s} {'expected':20s} {'S':12s} {'C':12s} {'lambda0':>10s}")
    for name in sorted(PRESETS):
        v = classify(preset(name), win)
        d = v.evidence["diagnostics"]
        print(f"{name:18s} {v.regime:20s} {EXPECTED_REGIME[name]:20s} {d['S']['verdict']:12s} "
              f"{d['C']['verdict']:12s} {v.evidence['decay']['lambda0']:10.6f}")


if __name__ == "__main__":
    main()
