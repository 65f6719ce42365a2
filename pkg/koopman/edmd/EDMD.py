import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from koopman.basis.monomials import DegreeBlock, MonomialBasis, as_points, degree_offsets
from koopman.errors import DimensionMismatchError, InvalidArgumentError, RankDeficiencyError
from koopman.kernel.gram import DEFAULT_POLICY, InversionPolicy, basis_matrix, gram_matrix, gram_weighted_product
from koopman.kernel.kernels import KernelSpec


class KoopmanMethod(str, Enum):
    ANALYTIC = "analytic-EDMD"
    ANALYTIC_NONORTHO = "analytic-EDMD-nonortho"
    EDMD = "EDMD"
    KERNEL = "kernel-EDMD"
    ORACLE = "exact-oracle"


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """M data pairs (x_k, y_k = φ(x_k)).

    Attributes
    ----------
    xs, ys : np.ndarray
        M x n samples and their images
    dt : float | None
        sampling time of a flow, None for a discrete map
    equilibrium : np.ndarray
        expansion point x*, the origin by default; fits translate by it once, up front
    scale : float
        rescaling factor ρ already applied to xs, ys and equilibrium (1 when unscaled)
    metadata : dict
        provenance (system, seed, box, ...)
    """
    xs: np.ndarray
    ys: np.ndarray
    dt: float | None = None
    equilibrium: np.ndarray = None
    scale: float = 1.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        xs = as_points(self.xs)
        ys = as_points(self.ys, xs.shape[1])
        if xs.shape[0] != ys.shape[0] or xs.shape[0] < 1:
            raise DimensionMismatchError(f"Need M >= 1 pairs with equal counts, got {xs.shape[0]} and {ys.shape[0]}")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgumentError(f"Sampling time must be positive, got {self.dt}")
        if not self.scale > 0:
            raise InvalidArgumentError(f"Rescaling factor must be positive, got {self.scale}")
        equilibrium = np.zeros(xs.shape[1]) if self.equilibrium is None else np.asarray(self.equilibrium, dtype=float).reshape(-1)
        if equilibrium.shape != (xs.shape[1],):
            raise DimensionMismatchError(f"Equilibrium has {equilibrium.size} coordinates, expected {xs.shape[1]}")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "equilibrium", equilibrium)

    @property
    def size(self) -> int:
        return self.xs.shape[0]

    @property
    def dimension(self) -> int:
        return self.xs.shape[1]

    def translated(self) -> tuple[np.ndarray, np.ndarray]:
        return self.xs - self.equilibrium, self.ys - self.equilibrium

    def with_equilibrium(self, equilibrium) -> "SnapshotSet":
        """Same data expanded around another point, given in original (unscaled) coordinates."""
        return replace(self, equilibrium=self.scale * np.asarray(equilibrium, dtype=float).reshape(-1))

    def rescaled(self, rho: float) -> "SnapshotSet":
        """Data in coordinates z = ρx; eigenvalues are invariant under this conjugacy."""
        if not rho > 0:
            raise InvalidArgumentError(f"Rescaling factor must be positive, got {rho}")
        return replace(self, xs=rho * self.xs, ys=rho * self.ys, equilibrium=rho * self.equilibrium,
                       scale=self.scale * rho)

    def drop_out_of_domain(self, kernel: KernelSpec) -> "SnapshotSet":
        """Remove pairs whose translated sample or image leaves the kernel domain."""
        u, v = self.translated()
        inside = np.all(np.abs(u) < kernel.domain_radius, axis=1) & np.all(np.abs(v) < kernel.domain_radius, axis=1)
        dropped = int(np.count_nonzero(~inside))
        if dropped:
            logging.warning(f"Dropped {dropped} of {self.size} pairs outside the {kernel.family.value} kernel domain")
        if dropped == self.size:
            raise InvalidArgumentError("Every pair lies outside the kernel domain")
        return replace(self, xs=self.xs[inside], ys=self.ys[inside])


@dataclass(frozen=True, eq=False)
class KoopmanMatrix:
    """Finite-section approximation K of the Koopman operator.

    Column j holds the basis coefficients of the projection of K eⱼ, i.e. K acts on
    coefficient vectors. For a monomial basis the matrix is close to block lower
    triangular: K[i, j] ≈ 0 whenever |α(i)| < |α(j)|.
    """
    values: np.ndarray
    basis: object
    method: KoopmanMethod
    blocks: tuple[DegreeBlock, ...] | None = None
    dt: float | None = None
    equilibrium: np.ndarray | None = None
    scale: float = 1.0
    gram_condition: float | None = None
    flags: tuple[str, ...] = ()

    def __post_init__(self):
        if self.values.shape != (self.basis.size, self.basis.size):
            raise DimensionMismatchError(f"Koopman matrix of shape {self.values.shape} for a basis of size {self.basis.size}")
        if self.blocks is None and isinstance(self.basis, MonomialBasis):
            object.__setattr__(self, "blocks", tuple(degree_offsets(self.basis)))

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def block(self, r: int, s: int) -> np.ndarray:
        """Sub-matrix K̄_rs of rows with degree r and columns with degree s."""
        if self.blocks is None:
            raise InvalidArgumentError("Koopman matrix carries no degree-block metadata")
        return self.values[self.blocks[r].slice, self.blocks[s].slice]


def _koopman(values, basis, method, data: SnapshotSet, **kwargs) -> KoopmanMatrix:
    return KoopmanMatrix(values=values, basis=basis, method=method, dt=data.dt,
                         equilibrium=data.equilibrium, scale=data.scale, **kwargs)


def _check_basis(data: SnapshotSet, basis):
    if basis.dimension != data.dimension:
        raise DimensionMismatchError(f"Basis dimension {basis.dimension} != data dimension {data.dimension}")


def _gram_inputs(data: SnapshotSet, basis, kernel: KernelSpec, policy: InversionPolicy):
    _check_basis(data, basis)
    xs, ys = data.translated()
    centred = kernel.recentered()
    centred.check_domain(xs, role="sample")
    centred.check_domain(ys, role="image")
    G = gram_matrix(centred, xs)
    return G, basis_matrix(basis, xs, policy), basis_matrix(basis, ys, policy)


def fit_analytic_edmd(data: SnapshotSet, basis: MonomialBasis, kernel: KernelSpec,
                      policy: InversionPolicy = DEFAULT_POLICY) -> KoopmanMatrix:
    """Analytic EDMD: K = XᵀG⁻¹Y on data translated by the equilibrium.

    Parameters
    ----------
    data : SnapshotSet
        snapshot pairs; translated by data.equilibrium before anything else
    basis : MonomialBasis
        weighted monomials orthonormal in the kernel's RKHS
    kernel : KernelSpec
        Taylor-type kernel; it is re-centred at the origin after translation
    policy : InversionPolicy
        how G⁻¹ is applied

    Returns
    -------
    K: KoopmanMatrix
        N x N matrix with K[i, j] = eᵢᵀG⁻¹e′ⱼ
    """
    G, X, Y = _gram_inputs(data, basis, kernel, policy)
    K = gram_weighted_product(G, X, Y, policy)
    return _koopman(K, basis, KoopmanMethod.ANALYTIC, data, gram_condition=G.condition_estimate)


def fit_analytic_edmd_nonortho(data: SnapshotSet, basis, kernel: KernelSpec,
                               policy: InversionPolicy = DEFAULT_POLICY) -> KoopmanMatrix:
    """Analytic EDMD for a non-orthonormal basis: K = (XᵀG⁻¹X)⁻¹XᵀG⁻¹Y.

    Any basis object with `size`, `dimension` and `evaluate(points)` is accepted; it is
    evaluated on the translated data.
    """
    G, X, Y = _gram_inputs(data, basis, kernel, policy)
    W = gram_weighted_product(G, X, np.hstack([X, Y]), policy)
    gram_of_basis = W[:, :basis.size]
    rank = np.linalg.matrix_rank(gram_of_basis)
    if rank < basis.size:
        raise RankDeficiencyError(f"XᵀG⁻¹X has rank {rank} < {basis.size}; the basis is not resolved by the data")
    K = np.linalg.solve(gram_of_basis, W[:, basis.size:])
    return _koopman(K, basis, KoopmanMethod.ANALYTIC_NONORTHO, data, gram_condition=G.condition_estimate)


def triangularity_residual(K: KoopmanMatrix) -> tuple[float, float]:
    """Size of the entries that block-triangularity says should vanish.

    Returns
    -------
    residual: tuple[float, float]
        max |K[i, j]| over |α(i)| < |α(j)|, and the Frobenius norm of those entries over ‖K‖_F
    """
    if K.blocks is None:
        raise InvalidArgumentError("Koopman matrix carries no degree-block metadata")
    degrees = np.concatenate([np.full(block.size, block.degree) for block in K.blocks])
    upper = degrees[:, None] < degrees[None, :]
    entries = np.abs(K.values[upper])
    if entries.size == 0:
        return 0.0, 0.0
    total = np.linalg.norm(K.values)
    relative = float(np.linalg.norm(entries) / total) if total > 0 else 0.0
    return float(entries.max()), relative
