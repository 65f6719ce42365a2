import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
from scipy import linalg

from koopman.basis.monomials import MonomialBasis, MultiIndex, as_points, evaluate_basis
from koopman.edmd.EDMD import KoopmanMatrix
from koopman.errors import DimensionMismatchError, InvalidArgumentError
from koopman.projection.taylor import TaylorCoefficients

RESONANCE_THRESHOLD = 1e10
DEFECT_THRESHOLD = 1e8
ALIASING_FRACTION = 0.9


@dataclass(frozen=True)
class LatticeEigenvalue:
    """Eigenvalue of one diagonal block K̄_rr.

    Attributes
    ----------
    mu : complex
        Koopman operator eigenvalue estimate
    lam : complex | None
        generator eigenvalue log(mu)/dt (principal branch), None without dt or when mu = 0
    degree : int
        total degree r of the block that produced it
    lattice_label : MultiIndex | None
        matched combination of degree-1 eigenvalues, set by lattice_match
    match_error : float | None
        distance to the matched lattice point
    decayed : bool
        mu == 0, the mode is below noise and has no generator eigenvalue
    """
    mu: complex
    lam: complex | None
    degree: int
    lattice_label: MultiIndex | None = None
    match_error: float | None = None
    decayed: bool = False


@dataclass(frozen=True, eq=False)
class PrincipalEigenfunction:
    """Taylor coefficients of a principal Koopman eigenfunction.

    The degree-0 coefficient is zero and the degree-1 block has unit Euclidean norm with
    its first nonzero entry real positive.

    When `defective` is set the degree-1 block of K had no full eigenvector basis and the
    degree-1 coefficients are orthonormal Schur vectors of its invariant subspace. Only the
    first of them is an eigenvector; the others, and the functions built from them, span
    the invariant subspace but are not eigenfunctions (Kv - μv need not vanish).
    """
    mu: complex
    coefficients: TaylorCoefficients
    degree_max: int
    conditioning: list[float]
    lam: complex | None = None
    resonant_degrees: tuple[int, ...] = ()
    defective: bool = False

    def block(self, degree: int) -> np.ndarray:
        return self.coefficients.block(degree)

    def unscaled(self, rho: float) -> "PrincipalEigenfunction":
        """Coefficients in original coordinates for a fit on data rescaled by ρ.

        A fitted coefficient d_α becomes d_α ρ^{|α|-1}; the degree-1 block keeps unit norm.
        """
        if rho == 1.0:
            return self
        factors = float(rho) ** (self.coefficients.basis.degrees - 1.0)
        return replace(self, coefficients=TaylorCoefficients(self.coefficients.basis,
                                                             self.coefficients.coefficients * factors))


def generator_eigenvalue(mu: complex, dt: float | None) -> complex | None:
    if dt is None or mu == 0:
        return None
    return complex(np.log(complex(mu)) / dt)


def block_eigenvalues(K: KoopmanMatrix, dt: float | None = None) -> list[LatticeEigenvalue]:
    """Eigenvalues of the diagonal blocks K̄_rr, tagged with their degree r.

    Parameters
    ----------
    K : KoopmanMatrix
        matrix with degree-block metadata
    dt : float | None
        sampling time; when given, λ = log(μ)/dt on the principal branch

    Returns
    -------
    eigenvalues: list[LatticeEigenvalue]
        degree 0 first, then ascending degrees
    """
    if dt is not None and not dt > 0:
        raise InvalidArgumentError(f"Sampling time must be positive, got {dt}")
    eigenvalues = []
    for block in K.blocks:
        for mu in linalg.eigvals(K.block(block.degree, block.degree)):
            mu = complex(mu)
            eigenvalues.append(LatticeEigenvalue(mu=mu, lam=generator_eigenvalue(mu, dt),
                                                 degree=block.degree, decayed=mu == 0))
    if dt is not None:
        for eig in eigenvalues:
            if eig.degree == 1 and eig.lam is not None and abs(eig.lam.imag) * dt >= ALIASING_FRACTION * np.pi:
                logging.warning(f"Degree-1 eigenvalue λ={eig.lam:.4g} is close to the aliasing limit π/Δt; "
                                f"λ and λ ± 2πi/Δt cannot be distinguished at Δt={dt}")
    return eigenvalues


def _degree_one_pairs(K11: np.ndarray, defect_threshold: float):
    mus, W = linalg.eig(K11)
    if np.linalg.cond(W) <= defect_threshold:
        return mus, W, False
    logging.warning(f"Degree-1 block is (near) defective (eigenvector condition {np.linalg.cond(W):.3e}); "
                    f"using an orthonormal Schur basis of the invariant subspace")
    T, Z = linalg.schur(K11.astype(complex), output="complex")
    return np.diag(T), Z, True


def _normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    nonzero = np.flatnonzero(np.abs(v) > 1e-12)
    if nonzero.size:
        c = v[nonzero[0]]
        v = v * (np.conj(c) / abs(c))
    return v


def principal_eigenfunctions(K: KoopmanMatrix, resonance_threshold: float = RESONANCE_THRESHOLD,
                             defect_threshold: float = DEFECT_THRESHOLD) -> list[PrincipalEigenfunction]:
    """Taylor coefficients of the principal eigenfunctions by block back-substitution.

    For each eigenpair (μ, w) of K̄₁₁, v̄₁ = w (normalized) and for r >= 2

        v̄_r = (μI - K̄_rr)⁻¹ Σ_{s<r} K̄_rs v̄_s

    which makes Kv = μv hold row block by row block when K is block lower triangular.
    Solves whose condition number exceeds resonance_threshold fall back to a truncated
    least-squares solution and are flagged as resonant.

    Parameters
    ----------
    K : KoopmanMatrix
        matrix with degree-block metadata and a monomial basis
    resonance_threshold : float
        condition number above which a degree is treated as resonant
    defect_threshold : float
        eigenvector-matrix condition number above which K̄₁₁ is treated as defective

    Returns
    -------
    eigenfunctions: list[PrincipalEigenfunction]
        one per eigenvalue of K̄₁₁
    """
    if K.blocks is None or not isinstance(K.basis, MonomialBasis):
        raise InvalidArgumentError("Principal eigenfunctions need a monomial basis with degree blocks")
    if len(K.blocks) < 2:
        raise InvalidArgumentError("The basis must contain degree-1 monomials")
    d = len(K.blocks) - 1
    mus, W, defective = _degree_one_pairs(K.block(1, 1), defect_threshold)
    eigenfunctions = []
    for j, mu in enumerate(mus):
        mu = complex(mu)
        pieces = {1: _normalize(W[:, j].astype(complex))}
        conditioning = [1.0]
        resonant = []
        for r in range(2, d + 1):
            rhs = sum(K.block(r, s) @ pieces[s] for s in range(1, r))
            A = mu * np.eye(K.blocks[r].size) - K.block(r, r)
            condition = float(np.linalg.cond(A))
            conditioning.append(condition)
            if condition > resonance_threshold:
                logging.warning(f"Resonant solve for μ={mu:.4g} at degree {r} (condition {condition:.3e}); "
                                f"using a truncated least-squares solution")
                pieces[r] = linalg.lstsq(A, rhs, cond=1.0 / resonance_threshold)[0]
                resonant.append(r)
            else:
                pieces[r] = linalg.solve(A, rhs)
        coefficients = np.zeros(K.size, dtype=complex)
        for r, piece in pieces.items():
            coefficients[K.blocks[r].slice] = piece
        eigenfunctions.append(PrincipalEigenfunction(
            mu=mu, coefficients=TaylorCoefficients(K.basis, coefficients), degree_max=d,
            conditioning=conditioning, lam=generator_eigenvalue(mu, K.dt),
            resonant_degrees=tuple(resonant), defective=defective))
    return eigenfunctions


def convergence_radius(ef: PrincipalEigenfunction) -> float:
    """Root-test estimate of the Taylor series' radius of convergence.

    Cauchy-Hadamard on the upper half of the available degrees: R ≈ 1 / max_r ‖v̄_r‖^{1/r}.
    """
    d = ef.degree_max
    roots = [np.linalg.norm(ef.block(r)) ** (1.0 / r) for r in range(max(1, (d + 1) // 2), d + 1)]
    largest = max(roots, default=0.0)
    return float(1.0 / largest) if largest > 0 else np.inf


def evaluate_eigenfunction(ef: PrincipalEigenfunction, basis: MonomialBasis, grid, equilibrium) -> pd.DataFrame:
    """Evaluate a truncated eigenfunction Σ cᵢ β_α (p - x*)^α on a grid.

    Returns
    -------
    values: pandas.DataFrame
        columns x1..xn, re_phi, im_phi, abs_phi, arg_phi; the estimated radius of
        convergence is stored in `values.attrs["convergence_radius"]`
    """
    points = as_points(grid, basis.dimension)
    center = np.asarray(equilibrium, dtype=float).reshape(-1)
    if center.shape != (basis.dimension,):
        raise DimensionMismatchError(f"Equilibrium has {center.size} coordinates, expected {basis.dimension}")
    phi = evaluate_basis(basis, points - center) @ ef.coefficients.coefficients
    radius = convergence_radius(ef)
    outside = int(np.count_nonzero(np.max(np.abs(points - center), axis=1) >= radius))
    if outside:
        logging.warning(f"{outside} grid points lie beyond the estimated radius of convergence {radius:.3g}")
    values = pd.DataFrame(points, columns=[f"x{i + 1}" for i in range(basis.dimension)])
    values["re_phi"] = phi.real
    values["im_phi"] = phi.imag
    values["abs_phi"] = np.abs(phi)
    values["arg_phi"] = np.angle(phi)
    values.attrs["convergence_radius"] = radius
    return values
