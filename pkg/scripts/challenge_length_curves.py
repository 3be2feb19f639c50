#!/usr/bin/env python3
"""Sweep the optimal challenge length and reference power against the
separation ratio for several error budgets, and write plot-ready CSV.

Usage:
    python scripts/challenge_length_curves.py --out results/challenge_curves.csv
"""

import argparse
from pathlib import Path

import numpy as np

from dbvsim.bounds import DbvSpec
from dbvsim.channel import DEFAULT_CHANNEL
from dbvsim.optimize import sweep_curves, write_curves_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--psi-start", type=float, default=1.01)
    ap.add_argument("--psi-stop", type=float, default=1.5)
    ap.add_argument("--points", type=int, default=50)
    ap.add_argument("--eps", default="1e-3,1e-4,1e-5")
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results/challenge_curves.csv")
    args = ap.parse_args()

    psis = [round(float(p), 6) for p in np.linspace(args.psi_start, args.psi_stop, args.points)]
    eps_values = [float(e) for e in args.eps.split(",")]
    template = DbvSpec(psi=psis[0], eps_fa=eps_values[0], eps_fr=eps_values[0])
    rows = sweep_curves(
        template, DEFAULT_CHANNEL, "dfa", psis, eps_values=eps_values, jobs=args.jobs
    )
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_curves_csv(rows, args.out)
    print(f"{len(rows)} rows -> {args.out}")


if __name__ == "__main__":
    main()
