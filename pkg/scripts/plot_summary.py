#!/usr/bin/env python3
"""Plot one metric from a dcomp summary CSV against M/N.

    python scripts/plot_summary.py summary.csv fraction_recovered -o fig.png
"""
import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("metric")
    ap.add_argument("-o", "--out", default="plot.png")
    args = ap.parse_args()

    with open(args.csv) as fh:
        rows = [r for r in csv.DictReader(l for l in fh if not l.startswith("#")) if r["metric"] == args.metric]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for alg in sorted({r["algorithm"] for r in rows}):
        pts = sorted((int(r["M"]) / int(r["N"]), float(r["value"]), float(r["ci_low"]), float(r["ci_high"]))
                     for r in rows if r["algorithm"] == alg)
        x, y, lo, hi = zip(*pts)
        ax.plot(x, y, marker="o", label=alg)
        ax.fill_between(x, lo, hi, alpha=0.2)
    ax.set_xlabel("M/N")
    ax.set_ylabel(args.metric)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
