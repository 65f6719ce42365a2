import contextlib
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from mpmath import mp
from scipy import linalg

from koopman.basis.monomials import MonomialBasis, as_points, evaluate_basis
from koopman.errors import DimensionMismatchError, InvalidArgumentError, SingularGramError
from koopman.kernel.kernels import KernelSpec, _kernel_block, _mp_kernel_block
from koopman.linalgutils import cutoff_condition, spectral_cutoff, symmetric_eigh

PSD_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-12
MIN_EXTENDED_DIGITS = 16


class InversionKind(str, Enum):
    EXACT = "exact"
    PINV = "pinv"
    RIDGE = "ridge"
    EXTENDED = "extended"


@dataclass(frozen=True)
class InversionPolicy:
    """How G⁻¹ is applied.

    EXTENDED rebuilds G from the sample points in mpmath arithmetic with `digits` significant
    digits and solves it there with a pivoted LU factorization. EXACT solves with a pivoted
    symmetric factorization in float64, PINV zeroes eigenvalues below rtol·λ_max, RIDGE solves
    with G + γI (explicit opt-in, γ = 0 reduces to EXACT).
    """
    kind: InversionKind = InversionKind.EXTENDED
    rtol: float = 1e-12
    gamma: float = 0.0
    digits: int = 50

    @classmethod
    def exact(cls) -> "InversionPolicy":
        return cls(kind=InversionKind.EXACT)

    @classmethod
    def pinv(cls, rtol: float = 1e-12) -> "InversionPolicy":
        return cls(kind=InversionKind.PINV, rtol=rtol)

    @classmethod
    def ridge(cls, gamma: float = 0.0) -> "InversionPolicy":
        return cls(kind=InversionKind.RIDGE, gamma=gamma)

    @classmethod
    def extended(cls, digits: int = 50) -> "InversionPolicy":
        if digits < MIN_EXTENDED_DIGITS:
            raise InvalidArgumentError(f"Extended precision needs at least {MIN_EXTENDED_DIGITS} digits, got {digits}")
        return cls(kind=InversionKind.EXTENDED, digits=digits)

    @classmethod
    def parse(cls, text: str) -> "InversionPolicy":
        """Parse 'extended', 'extended:60', 'exact', 'pinv', 'pinv:1e-10' or 'ridge:1e-8'."""
        name, _, value = text.strip().lower().partition(":")
        try:
            if name == InversionKind.EXTENDED:
                return cls.extended(int(value)) if value else cls.extended()
            if name == InversionKind.EXACT:
                return cls.exact()
            if name == InversionKind.PINV:
                return cls.pinv(float(value)) if value else cls.pinv()
            if name == InversionKind.RIDGE:
                return cls.ridge(float(value)) if value else cls.ridge()
        except ValueError:
            pass
        raise InvalidArgumentError(f"Unknown inversion policy '{text}' "
                                   f"(expected extended[:digits], exact, pinv[:rtol] or ridge:gamma)")

    def __str__(self):
        if self.kind == InversionKind.EXTENDED:
            return f"extended:{self.digits}"
        if self.kind == InversionKind.PINV:
            return f"pinv:{self.rtol:g}"
        if self.kind == InversionKind.RIDGE:
            return f"ridge:{self.gamma:g}"
        return "exact"


DEFAULT_POLICY = InversionPolicy.extended()


class GramMatrix:
    """Gram matrix G[i, j] = k(xᵢ, xⱼ) with its eigen-decomposition computed once.

    Attributes
    ----------
    values : np.ndarray
        M x M symmetric matrix
    spec : KernelSpec
        kernel used to build it
    points : np.ndarray
        the sample points (untranslated), M x n
    translated : np.ndarray | None
        the points relative to the kernel centre when G was assembled from the kernel;
        None for a matrix given by its values only
    eigenvalues, eigenvectors : np.ndarray
        symmetric eigen-decomposition, eigenvalues ascending
    effective_rank : int
        number of eigenvalues above rtol·λ_max
    condition_estimate : float
        λ_max / λ_min⁺ over the kept eigenvalues
    """
    def __init__(self, values: np.ndarray, spec: KernelSpec, points: np.ndarray, rtol: float = DEFAULT_POLICY.rtol,
                 translated: np.ndarray | None = None):
        self.values = values
        self.values.setflags(write=False)
        self.spec = spec
        self.points = points
        self.translated = translated
        self.rtol = rtol
        self.eigenvalues, self.eigenvectors = symmetric_eigh(values)
        keep = spectral_cutoff(self.eigenvalues, rtol)
        self.effective_rank = int(np.count_nonzero(keep))
        self.condition_estimate = cutoff_condition(self.eigenvalues, keep)
        if not self.is_psd():
            logging.warning(f"Gram matrix is not positive semidefinite within {PSD_TOLERANCE:g} "
                            f"(smallest eigenvalue {self.eigenvalues[0]:.3e})")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def is_symmetric(self) -> bool:
        scale = np.max(np.abs(self.values), initial=0.0)
        return bool(np.max(np.abs(self.values - self.values.T), initial=0.0) <= SYMMETRY_TOLERANCE * scale)

    def is_psd(self, tol: float = PSD_TOLERANCE) -> bool:
        if self.size == 0:
            return True
        return bool(self.eigenvalues[0] >= -tol * self.eigenvalues[-1])

    def extended_values(self):
        """G as an mpmath matrix at the current working precision, re-evaluated from the kernel when possible."""
        if self.translated is not None:
            return _mp_kernel_block(self.spec, self.translated, self.translated)
        return mp.matrix(self.values.tolist())


def gram_matrix(spec: KernelSpec, points, rtol: float = DEFAULT_POLICY.rtol) -> GramMatrix:
    """Assemble the Gram matrix of a kernel on a point set.

    Parameters
    ----------
    spec : KernelSpec
        kernel, including its centre x*
    points : array-like
        M sample points inside the (translated) kernel domain
    rtol : float
        cutoff used for the effective rank and condition estimate

    Returns
    -------
    G: GramMatrix
        symmetric Gram matrix with cached eigen-decomposition
    """
    x = as_points(points, spec.dimension)
    u = spec.translate(x)
    spec.check_domain(u, role="sample")
    values = _kernel_block(spec, u, u)
    G = GramMatrix(values, spec=spec, points=x, rtol=rtol, translated=u)
    logging.info(f"Gram matrix built: M={G.size}, effective rank {G.effective_rank}, "
                 f"condition estimate {G.condition_estimate:.3e}")
    return G


def working_precision(policy: InversionPolicy):
    """mpmath precision context of a policy; a no-op for the float64 policies."""
    if policy.kind == InversionKind.EXTENDED:
        return mp.workdps(policy.digits)
    return contextlib.nullcontext()


def basis_matrix(basis, points, policy: InversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Data matrix of a basis on points, with exact mpmath monomials under the extended policy.

    Other bases are always evaluated in float64.
    """
    if policy.kind == InversionKind.EXTENDED and isinstance(basis, MonomialBasis):
        with working_precision(policy):
            return evaluate_basis(basis, points, exact=True)
    return basis.evaluate(points)


def _extended_solve(G: GramMatrix, rhs: np.ndarray) -> np.ndarray:
    # runs inside working_precision; returns an M x p object array of mpf
    matrix = G.extended_values()
    try:
        lu, pivots = mp.LU_decomp(matrix)
    except ZeroDivisionError as e:
        raise SingularGramError(f"Gram matrix is numerically singular at {mp.dps} digits; "
                                f"use more digits or the pinv policy",
                                condition_estimate=G.condition_estimate) from e
    columns = [mp.U_solve(lu, mp.L_solve(lu, mp.matrix(rhs[:, j].tolist()), pivots)) for j in range(rhs.shape[1])]
    solution = np.empty(rhs.shape, dtype=object)
    for j, column in enumerate(columns):
        for i in range(rhs.shape[0]):
            solution[i, j] = column[i]
    return solution


def _check_rows(G: GramMatrix, rhs: np.ndarray):
    if rhs.shape[0] != G.size:
        raise DimensionMismatchError(f"Right-hand side has {rhs.shape[0]} rows, Gram matrix has size {G.size}")


def apply_gram_inverse(G: GramMatrix, B, policy: InversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Compute G⁻¹B under an inversion policy.

    Parameters
    ----------
    G : GramMatrix
        the Gram matrix
    B : array-like
        M x p right-hand side (a length-M vector is treated as one column and returned as a vector)
    policy : InversionPolicy
        EXTENDED, EXACT, PINV (spectral cutoff) or RIDGE

    Returns
    -------
    solution: np.ndarray
        G⁻¹B in float64 with the shape of B
    """
    rhs = np.asarray(B)
    _check_rows(G, rhs)
    if policy.kind == InversionKind.EXTENDED:
        with working_precision(policy):
            solution = _extended_solve(G, rhs.reshape(G.size, -1))
        return solution.astype(float).reshape(rhs.shape)
    rhs = rhs.astype(float)
    if policy.kind == InversionKind.PINV:
        keep = spectral_cutoff(G.eigenvalues, policy.rtol)
        V = G.eigenvectors[:, keep]
        return V @ ((V.T @ rhs) / G.eigenvalues[keep].reshape((-1,) + (1,) * (rhs.ndim - 1)))
    matrix = G.values if policy.kind == InversionKind.EXACT else G.values + policy.gamma * np.eye(G.size)
    try:
        return linalg.solve(matrix, rhs, assume_a="sym")
    except linalg.LinAlgError as e:
        raise SingularGramError(f"Gram matrix factorization failed: {e}",
                                condition_estimate=G.condition_estimate) from e


def gram_weighted_product(G: GramMatrix, A, B, policy: InversionPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Compute AᵀG⁻¹B under an inversion policy.

    Under the extended policy G is solved against the columns of A and the product with B is
    formed before rounding back to float64, so A should be the well-resolved side (the basis
    data matrix) and B the data side.

    Parameters
    ----------
    G : GramMatrix
        the Gram matrix
    A, B : array-like
        M x p and M x q matrices (vectors allowed), float64 or mpmath object arrays

    Returns
    -------
    product: np.ndarray
        p x q float64 matrix; a vector or scalar when A or B is a vector
    """
    left, right = np.asarray(A), np.asarray(B)
    _check_rows(G, left)
    _check_rows(G, right)
    shape = left.shape[1:] + right.shape[1:]
    if policy.kind != InversionKind.EXTENDED:
        return left.astype(float).T @ apply_gram_inverse(G, right, policy)
    with working_precision(policy):
        solution = _extended_solve(G, left.reshape(G.size, -1))
        product = solution.T @ right.reshape(G.size, -1).astype(object)
    logging.debug(f"Extended Gram solve: M={G.size}, {policy.digits} digits, {solution.shape[1]} columns")
    return product.astype(float).reshape(shape)
