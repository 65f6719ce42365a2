from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from koopman.basis.monomials import MultiIndex, enumerate_multiindices
from koopman.errors import InvalidArgumentError
from koopman.linalgutils import wrap_imaginary
from koopman.spectral.eigen import LatticeEigenvalue


@dataclass(frozen=True)
class LatticeReport:
    """Outcome of matching block eigenvalues against the lattice of degree-1 eigenvalues.

    Attributes
    ----------
    eigenvalues : list[LatticeEigenvalue]
        input eigenvalues with lattice_label (None when unmatched) and match_error filled in
    continuous : bool
        True when errors are measured on generator eigenvalues λ, False on μ
    max_error_by_degree : dict[int, float]
        largest matching error per degree
    unmatched : list[LatticeEigenvalue]
        eigenvalues further than tol from every lattice point of their degree
    """
    eigenvalues: list[LatticeEigenvalue]
    continuous: bool
    max_error_by_degree: dict[int, float]
    unmatched: list[LatticeEigenvalue]

    @property
    def mean_error(self) -> float:
        errors = [eig.match_error for eig in self.eigenvalues if eig.match_error is not None]
        return float(np.mean(errors)) if errors else np.nan

    def as_frame(self) -> pd.DataFrame:
        return eigenvalue_frame(self.eigenvalues)


def eigenvalue_frame(eigenvalues: list[LatticeEigenvalue]) -> pd.DataFrame:
    """Tabulate eigenvalues with columns degree, re_mu, im_mu, re_lambda, im_lambda, lattice_label, match_error."""
    return pd.DataFrame({
        "degree": [eig.degree for eig in eigenvalues],
        "re_mu": [eig.mu.real for eig in eigenvalues],
        "im_mu": [eig.mu.imag for eig in eigenvalues],
        "re_lambda": [np.nan if eig.lam is None else eig.lam.real for eig in eigenvalues],
        "im_lambda": [np.nan if eig.lam is None else eig.lam.imag for eig in eigenvalues],
        "lattice_label": ["" if eig.lattice_label is None else str(eig.lattice_label) for eig in eigenvalues],
        "match_error": [np.nan if eig.match_error is None else eig.match_error for eig in eigenvalues],
    })


def lattice_points(generators, degree: int, continuous: bool) -> list[tuple[MultiIndex, complex]]:
    """All lattice points of one total degree: Σ αⱼλⱼ (continuous) or ∏ μⱼ^αⱼ (discrete)."""
    generators = np.asarray(generators, dtype=complex)
    points = []
    for index in enumerate_multiindices(len(generators), degree):
        if index.total_degree != degree:
            continue
        exponents = np.array(index.exponents)
        value = np.sum(exponents * generators) if continuous else np.prod(generators ** exponents)
        points.append((index, complex(value)))
    return points


def _distance(value: complex, target: complex, continuous: bool, dt: float | None) -> float:
    delta = value - target
    return abs(wrap_imaginary(delta, dt) if continuous else delta)


def lattice_match(eigs: list[LatticeEigenvalue], tol: float, dt: float | None = None) -> LatticeReport:
    """Label each block eigenvalue with the closest lattice point of its degree.

    The degree-1 eigenvalues generate the lattice. When every eigenvalue carries a generator
    eigenvalue λ the comparison is made on λ, modulo 2πi/dt when dt is given so that the
    principal-branch logarithm does not create false mismatches; otherwise on μ.

    Parameters
    ----------
    eigs : list[LatticeEigenvalue]
        output of block_eigenvalues
    tol : float
        largest accepted matching error
    dt : float | None
        sampling time used to compute λ

    Returns
    -------
    report: LatticeReport
        labelled eigenvalues, per-degree maximal errors and the unmatched ones
    """
    first = [eig for eig in eigs if eig.degree == 1]
    if not first:
        raise InvalidArgumentError("Lattice matching needs degree-1 eigenvalues")
    continuous = all(eig.lam is not None for eig in eigs)
    generators = [eig.lam if continuous else eig.mu for eig in first]
    cache = {}
    labelled, unmatched, max_errors = [], [], {}
    for eig in eigs:
        if eig.degree not in cache:
            cache[eig.degree] = lattice_points(generators, eig.degree, continuous)
        value = eig.lam if continuous else eig.mu
        index, error = min(((index, _distance(value, point, continuous, dt)) for index, point in cache[eig.degree]),
                           key=lambda pair: pair[1])
        matched = replace(eig, lattice_label=index if error <= tol else None, match_error=error)
        if error > tol:
            unmatched.append(matched)
        labelled.append(matched)
        max_errors[eig.degree] = max(max_errors.get(eig.degree, 0.0), error)
    return LatticeReport(eigenvalues=labelled, continuous=continuous,
                         max_error_by_degree=max_errors, unmatched=unmatched)


def lattice_distance(values, generators, max_degree: int, dt: float | None = None) -> np.ndarray:
    """Distance of arbitrary eigenvalues to the lattice up to max_degree (any degree allowed).

    Used for methods whose matrices have no degree blocks. With dt, values and generators are
    generator eigenvalues λ and differences are folded modulo 2πi/dt; without dt they are μ's.
    """
    continuous = dt is not None
    points = [point for r in range(max_degree + 1) for _, point in lattice_points(generators, r, continuous)]
    distances = []
    for value in values:
        if value is None:
            distances.append(np.nan)
            continue
        distances.append(min(_distance(complex(value), point, continuous, dt) for point in points))
    return np.array(distances)
