#!/usr/bin/env python3
"""Margin reanalysis of the SUPPORT right-heart-catheterization study.

The dataset is public but not bundled; download a CSV with one row per
patient, a binary 30-day-survival outcome, a binary RHC treatment column and
covariate columns, then point this script at it.  Published values from the
original margin analysis (margin 3663 of 5735, ACE 0.049, SE 0.016) are
reported side-by-side; exact agreement is not expected because that
analysis's SVM hyperparameters and preprocessing were not recorded.

Usage:
    python scripts/run_rhc_analysis.py --csv data/rhc.csv \
        --outcome surv30 --treatment rhc --out results/rhc
"""

import argparse
import sys
from pathlib import Path

from overlap_lab.errors import OverlapLabError
from overlap_lab.reports import emit_report
from overlap_lab.studies import task_rhc


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--csv", required=True, help="path to the RHC-format CSV")
    parser.add_argument("--outcome", default="y")
    parser.add_argument("--treatment", default="t")
    parser.add_argument("--covariates", nargs="*", default=None,
                        help="covariate columns (default: all others)")
    parser.add_argument("--sigma2-sweep", nargs="*", type=float, default=None)
    parser.add_argument("--n-boot", type=int, default=500)
    parser.add_argument("--out", default="results/rhc")
    parser.add_argument("--seed", type=int, default=20260809)
    args = parser.parse_args()

    if not Path(args.csv).exists():
        sys.exit(f"dataset not found: {args.csv} (the RHC file is user-supplied)")

    cfg = {
        "dataset": {
            "path": args.csv,
            "outcome": args.outcome,
            "treatment": args.treatment,
        },
        "rhc": {"n_boot": args.n_boot},
    }
    if args.covariates:
        cfg["dataset"]["covariates"] = args.covariates
    if args.sigma2_sweep:
        cfg["rhc"]["sigma2_sweep"] = args.sigma2_sweep

    try:
        report = task_rhc(cfg, args.seed, Path(args.out))
    except OverlapLabError as exc:
        sys.exit(f"{exc.category}: {exc}")
    emit_report(report, Path(args.out))

    counts = report["counts"]
    print(f"n={counts['n']} treated={counts['n_treated']} "
          f"(published {counts['expected_n']}/{counts['expected_treated']}, "
          f"verified={counts['verified']})")
    for row in report["sweep"]:
        print(f"sigma2={row['sigma2']:g}: margin {row['n_margin']}, "
              f"estimate {row['estimate']:+.4f} (SE {row['se']:.4f})")
    ref = report["reference"]
    print(f"published reference: margin {ref['margin_size']}, "
          f"estimate {ref['ace']}, SE {ref['se']}")
    print(f"all sweep estimates positive: {report['all_positive']}")
    print(report["tree_outline"])


if __name__ == "__main__":
    main()
