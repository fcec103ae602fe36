"""
Render the plot data written by the harness.

    python visualize.py results/ifs-figure
"""
import glob
import os
import re
import sys

import matplotlib.pyplot as plt
import numpy as np


def _depth(path: str) -> int:
    return int(re.search(r"depth_(\d+)\.csv$", path).group(1))


def plot_ifs_figure(out_dir: str) -> plt.Figure:
    """One panel per depth n with the graph of T^n 1 on [0, 1]."""
    paths = sorted(glob.glob(os.path.join(out_dir, "ifs_depth_*.csv")), key=_depth)
    if not paths:
        raise FileNotFoundError(f"No ifs_depth_*.csv files in {out_dir}")
    fig, axes = plt.subplots(len(paths), 1, figsize=(10, 1.6 * len(paths)), sharex=True, squeeze=False)
    for ax, path in zip(axes[:, 0], paths):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        ax.fill_between(data[:, 0], data[:, 1], step="mid", alpha=0.6)
        ax.set_ylabel(f"n = {_depth(path)}")
        ax.set_ylim(0, 1.2)
        ax.grid(True)
    axes[-1, 0].set_xlabel("x")
    fig.suptitle("T^n f for f = 1")
    fig.tight_layout()
    return fig


def plot_kernel_surfaces(out_dir: str) -> plt.Figure:
    paths = sorted(glob.glob(os.path.join(out_dir, "ifs_kernel_depth_*.csv")), key=_depth)
    if not paths:
        raise FileNotFoundError(f"No ifs_kernel_depth_*.csv files in {out_dir}")
    fig, axes = plt.subplots(1, len(paths), figsize=(4 * len(paths), 4), squeeze=False)
    for ax, path in zip(axes[0], paths):
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        grid, surface = data[:, 0], data[:, 1:]
        image = ax.imshow(surface, origin="lower", extent=(grid[0], grid[-1], grid[0], grid[-1]))
        ax.set_title(f"K_{_depth(path)}(x, y)")
        fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    return fig


def plot_order_chain(out_dir: str) -> plt.Figure:
    data = np.loadtxt(os.path.join(out_dir, "order_chain.csv"), delimiter=",", skiprows=1, usecols=(0, 1))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(data[:, 0], data[:, 1], marker="o")
    ax.axhline(0.0, color="gray", linestyle="--")
    ax.set_xlabel("n")
    ax.set_ylabel("min eigenvalue of G(K^(n+1)) - G(K^n)")
    ax.set_title("Order chain")
    ax.grid(True)
    return fig


PLOTS = {
    "ifs_depth_0.csv": plot_ifs_figure,
    "ifs_kernel_depth_0.csv": plot_kernel_surfaces,
    "order_chain.csv": plot_order_chain,
}


if __name__ == "__main__":
    out_dir = sys.argv[1] if len(sys.argv) > 1 else "results"
    for marker, plot in PLOTS.items():
        if os.path.exists(os.path.join(out_dir, marker)):
            plot(out_dir)
    plt.show()
