#!/usr/bin/env python3
"""Plot the energy series written by `ktplate simulate`.

Usage: plot_series.py OUT_DIR [--save FILE]
"""
import argparse
import json
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--save", type=Path, help="write the figure instead of showing it")
    args = ap.parse_args()

    data = np.genfromtxt(args.out_dir / "series.csv", delimiter=",", names=True)
    summary_path = args.out_dir / "summary.json"
    summary = json.loads(summary_path.read_text()) if summary_path.exists() else {}

    fig, (ax_e, ax_ell) = plt.subplots(2, 1, sharex=True, figsize=(7, 6))
    for name in ("E1", "E", "X"):
        ax_e.semilogy(data["t"], data[name], label=name)
    fit = summary.get("decay_fit", {})
    if "kappa_hat" in fit:
        t = np.linspace(*fit["window"], 50)
        ax_e.semilogy(t, fit["c_hat"] * np.exp(-fit["kappa_hat"] * t), "k--",
                      label=f"fit, kappa = {fit['kappa_hat']:.4g}")
    ax_e.set_ylabel("energy")
    ax_e.legend()
    ax_ell.plot(data["t"], data["ellipticity_min"])
    ax_ell.set_ylabel("min N'(z)")
    ax_ell.set_xlabel("t")
    if "halt" in summary:
        fig.suptitle(f"halt: {summary['halt']}")
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
