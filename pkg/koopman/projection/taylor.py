from dataclasses import dataclass

import numpy as np
import pandas as pd

from koopman.basis.monomials import MonomialBasis, as_points, evaluate_basis
from koopman.errors import DimensionMismatchError, InvalidArgumentError
from koopman.kernel.gram import DEFAULT_POLICY, GramMatrix, InversionPolicy, basis_matrix, gram_weighted_product


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Values f(x_k) of a function on M sample points."""
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = as_points(self.points)
        values = np.asarray(self.values).reshape(-1)
        if points.shape[0] != values.shape[0]:
            raise DimensionMismatchError(f"{points.shape[0]} points but {values.shape[0]} values")
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError("Sampled function values must be finite")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, function, points) -> "SampledFunction":
        """Sample a vectorized callable taking an (M, n) array."""
        x = as_points(points)
        return cls(points=x, values=np.asarray(function(x), dtype=float).reshape(-1))

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class TaylorCoefficients:
    """Coefficients of a function in a weighted monomial basis (real or complex)."""
    basis: MonomialBasis
    coefficients: np.ndarray

    def __post_init__(self):
        if self.coefficients.shape != (self.basis.size,):
            raise DimensionMismatchError(f"{self.coefficients.shape[0]} coefficients for a basis of size {self.basis.size}")

    def polynomial(self, points) -> np.ndarray:
        """Evaluate Σ cᵢ eᵢ(p) at (already translated) points."""
        return evaluate_basis(self.basis, points) @ self.coefficients

    def block(self, degree: int) -> np.ndarray:
        return self.coefficients[self.basis.degrees == degree]


def _check_same_points(f: SampledFunction, G: GramMatrix):
    if len(f) != G.size:
        raise DimensionMismatchError(f"Function sampled at {len(f)} points, Gram matrix has size {G.size}")
    if f.points.shape != G.points.shape or not np.array_equal(f.points, G.points):
        raise DimensionMismatchError("Function must be sampled at the points used to build the Gram matrix")


def rkhs_inner_product(f: SampledFunction, g: SampledFunction, G: GramMatrix,
                       policy: InversionPolicy = DEFAULT_POLICY) -> float:
    """Data-driven RKHS inner product ⟨f, g⟩_H ≈ fᵀG⁻¹g."""
    _check_same_points(f, G)
    _check_same_points(g, G)
    return float(gram_weighted_product(G, f.values, g.values, policy))


def taylor_project(f: SampledFunction, basis: MonomialBasis, G: GramMatrix,
                   policy: InversionPolicy = DEFAULT_POLICY) -> TaylorCoefficients:
    """Orthogonal Taylor projection of a sampled function.

    Coefficient i is fᵀG⁻¹eᵢ, where eᵢ holds the i-th basis function evaluated at the
    sample points translated by the kernel centre.

    Parameters
    ----------
    f : SampledFunction
        function values at the points used to build G
    basis : MonomialBasis
        weighted monomial basis orthonormal in the kernel's RKHS
    G : GramMatrix
        Gram matrix of the samples
    policy : InversionPolicy
        how G⁻¹ is applied

    Returns
    -------
    coefficients: TaylorCoefficients
        projection coefficients in the basis
    """
    _check_same_points(f, G)
    if basis.dimension != G.spec.dimension:
        raise DimensionMismatchError(f"Basis dimension {basis.dimension} != point dimension {G.spec.dimension}")
    E = basis_matrix(basis, G.spec.translate(f.points), policy)
    return TaylorCoefficients(basis=basis, coefficients=gram_weighted_product(G, E, f.values, policy))


def l2_project(f: SampledFunction, basis: MonomialBasis, center=None) -> TaylorCoefficients:
    """Discrete L² (least-squares polynomial regression) projection on the same samples."""
    x = f.points if center is None else f.points - np.asarray(center, dtype=float)
    E = evaluate_basis(basis, x)
    coefficients, *_ = np.linalg.lstsq(E, f.values, rcond=None)
    return TaylorCoefficients(basis=basis, coefficients=coefficients)


def taylor_table(f: SampledFunction, basis: MonomialBasis, G: GramMatrix, exact=None,
                 policy: InversionPolicy = DEFAULT_POLICY) -> pd.DataFrame:
    """Side-by-side Taylor and L² projection coefficients, with exact values when known."""
    table = pd.DataFrame({"degree": basis.degrees,
                          "exponents": basis.labels(),
                          "taylor": taylor_project(f, basis, G, policy).coefficients,
                          "l2": l2_project(f, basis, G.spec.center).coefficients})
    if exact is not None:
        table["exact"] = np.asarray(exact, dtype=float)
    return table
