#!/usr/bin/env python3
"""Scan the bounded-retrieval protocol: the largest feasible retrieval rate
as a function of the separation ratio, and the minimal source length at
fixed retrieval rates, for both intruder models.

Usage:
    python scripts/brm_feasibility_scan.py --mode general --out results/brm_general
"""

import argparse
import csv
from pathlib import Path

import numpy as np

from dbvsim.bounds import DbvSpec
from dbvsim.channel import DEFAULT_CHANNEL
from dbvsim.optimize import max_feasible_lambda, sweep_curves, write_curves_csv


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--mode", choices=("general", "sampling"), default="general")
    ap.add_argument("--psi-start", type=float, default=1.05)
    ap.add_argument("--psi-stop", type=float, default=3.0)
    ap.add_argument("--points", type=int, default=40)
    ap.add_argument("--lambdas", default=None,
                    help="comma list; default 0.05,0.1 (general) or 0.1,0.5,0.9 (sampling)")
    ap.add_argument("--eps", type=float, default=1e-4)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None, help="output prefix (two CSVs)")
    args = ap.parse_args()

    lambdas = args.lambdas or ("0.05,0.1" if args.mode == "general" else "0.1,0.5,0.9")
    lambda_values = [float(v) for v in lambdas.split(",")]
    out_prefix = args.out or f"results/brm_{args.mode}"
    Path(out_prefix).parent.mkdir(parents=True, exist_ok=True)

    psis = [round(float(p), 6) for p in np.linspace(args.psi_start, args.psi_stop, args.points)]

    # largest feasible retrieval rate per separation ratio
    with open(f"{out_prefix}_max_lambda.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["psi", "lambda_star", "feasible"])
        for psi in psis:
            res = max_feasible_lambda(psi, DEFAULT_CHANNEL, args.mode)
            w.writerow([f"{psi:.9g}", f"{res.lambda_star:.9g}",
                        "true" if res.feasible else "false"])

    # minimal source length at the fixed rates
    template = DbvSpec(psi=psis[0], eps_fa=args.eps, eps_fr=args.eps)
    rows = sweep_curves(
        template, DEFAULT_CHANNEL, args.mode, psis,
        lambda_values=lambda_values, jobs=args.jobs,
    )
    write_curves_csv(rows, f"{out_prefix}_n_star.csv")
    print(f"wrote {out_prefix}_max_lambda.csv and {out_prefix}_n_star.csv")


if __name__ == "__main__":
    main()
