import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

MARKERS = ["o", "s", "^", "D", "v"]


def eigenvalue_scatter(series: dict[str, np.ndarray], lattice: np.ndarray, path: Path,
                       title: str = "Eigenvalues", xlabel: str = "Re λ", ylabel: str = "Im λ") -> Path:
    """Scatter of eigenvalues in the complex plane with lattice points drawn as crosses, saved as SVG.

    Parameters
    ----------
    series : dict[str, np.ndarray]
        complex eigenvalues per method label; non-finite values are skipped
    lattice : np.ndarray
        complex reference lattice points
    path : Path
        output .svg file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 5))
    lattice = np.asarray(lattice, dtype=complex)
    if lattice.size:
        ax.scatter(lattice.real, lattice.imag, marker="x", s=60, color="black", label="lattice", zorder=1)
    for i, (label, values) in enumerate(series.items()):
        values = np.asarray(values, dtype=complex)
        values = values[np.isfinite(values)]
        ax.scatter(values.real, values.imag, marker=MARKERS[i % len(MARKERS)], s=25, alpha=0.8,
                   facecolors="none", edgecolors=f"C{i}", label=label, zorder=2)
    ax.axhline(0, color="grey", linewidth=0.5)
    ax.axvline(0, color="grey", linewidth=0.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logging.info(f"Wrote eigenvalue scatter to {path}")
    return path
