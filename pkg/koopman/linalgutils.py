import numpy as np
from scipy import linalg


def symmetric_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending."""
    return linalg.eigh(0.5 * (matrix + matrix.T))


def spectral_cutoff(eigenvalues: np.ndarray, rtol: float) -> np.ndarray:
    """Mask of eigenvalues kept by a relative cutoff rtol * λ_max."""
    largest = np.max(np.abs(eigenvalues)) if eigenvalues.size else 0.0
    return eigenvalues > rtol * largest


def cutoff_condition(eigenvalues: np.ndarray, keep: np.ndarray) -> float:
    """λ_max / λ_min⁺ over the kept eigenvalues (inf when nothing is kept)."""
    if not np.any(keep):
        return np.inf
    kept = eigenvalues[keep]
    return float(np.max(kept) / np.min(kept))


def wrap_imaginary(delta: complex, dt: float | None) -> complex:
    """Fold the imaginary part of a generator-eigenvalue difference into (-π/dt, π/dt]."""
    if dt is None:
        return delta
    period = 2 * np.pi / dt
    imag = delta.imag - period * np.round(delta.imag / period)
    return complex(delta.real, imag)
