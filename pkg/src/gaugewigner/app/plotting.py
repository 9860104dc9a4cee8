"""Static matplotlib figures (PNG) rendered next to the CSV exports."""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: str | Path) -> Path:
    path = Path(path).with_suffix(".png")
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible across runs
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_lines(x: np.ndarray, ys: Sequence[np.ndarray], labels: Sequence[str], path,
               xlabel: str = "", ylabel: str = "", title: str = "", logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for y, lab in zip(ys, labels):
        ax.plot(x, y, label=lab)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if logy:
        ax.set_yscale("log")
    if len(ys) > 1:
        ax.legend()
    ax.grid(alpha=0.3)
    return _save(fig, path)


def plot_map(x: np.ndarray, y: np.ndarray, z: np.ndarray, path, xlabel: str = "",
             ylabel: str = "", title: str = "", diverging: bool = True) -> Path:
    """``z[i, j]`` on ``(x[i], y[j])``."""
    fig, ax = plt.subplots(figsize=(5, 4))
    z = np.asarray(z)
    if diverging:
        vmax = float(np.max(np.abs(z))) or 1.0
        im = ax.pcolormesh(x, y, z.T, cmap="RdBu_r", vmin=-vmax, vmax=vmax, shading="auto")
    else:
        im = ax.pcolormesh(x, y, z.T, cmap="viridis", shading="auto")
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return _save(fig, path)
