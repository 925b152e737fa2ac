#!/usr/bin/env python3
"""Render a slicematch trajectory CSV as a convergence plot.

Usage: plot_trajectory.py TRAJECTORY_CSV [OUTPUT_PNG]

Plots the SW2 estimate (with a 3-stderr band) and the per-step cost
gamma_k^2 * slice_loss_sum against the iteration index.
"""

import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    csv_path = sys.argv[1]
    out_path = sys.argv[2] if len(sys.argv) > 2 else csv_path.rsplit(".", 1)[0] + ".png"

    ks, sw2, stderr, cost = [], [], [], []
    with open(csv_path, newline="") as fh:
        for row in csv.DictReader(fh):
            if not row["sw2_estimate"]:
                continue
            ks.append(int(row["k"]))
            sw2.append(float(row["sw2_estimate"]))
            stderr.append(float(row["sw2_stderr"]))
            cost.append(float(row["consecutive_cost"]))

    fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    ax1.plot(ks, sw2, "o-", color="tab:blue", label="SW2(sigma_k, mu)")
    lo = [max(v - 3 * s, 0.0) for v, s in zip(sw2, stderr)]
    hi = [v + 3 * s for v, s in zip(sw2, stderr)]
    ax1.fill_between(ks, lo, hi, color="tab:blue", alpha=0.2, label="3 stderr")
    ax1.set_ylabel("SW2 estimate")
    ax1.legend()
    ax1.grid(alpha=0.3)

    ax2.plot(ks[1:], cost[1:], "s-", color="tab:orange")
    ax2.set_yscale("log")
    ax2.set_xlabel("iteration k")
    ax2.set_ylabel("step cost W2^2(sigma_k, sigma_{k-1})")
    ax2.grid(alpha=0.3)

    fig.tight_layout()
    fig.savefig(out_path, dpi=150)
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
