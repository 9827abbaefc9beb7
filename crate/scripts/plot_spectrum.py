#!/usr/bin/env python3
"""Plot per-mode spectral abscissas from `ktplate spectrum`.

Usage: plot_spectrum.py OUT_DIR [--save FILE]
"""
import argparse
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out_dir", type=Path)
    ap.add_argument("--save", type=Path)
    args = ap.parse_args()

    data = np.genfromtxt(args.out_dir / "spectrum.csv", delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(data["k"], -data["abscissa"], "o-")
    ax.set_xlabel("k")
    ax.set_ylabel("-abscissa")
    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
