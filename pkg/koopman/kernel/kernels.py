import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from mpmath import mp

from koopman.basis.monomials import MonomialBasis, WeightScheme, as_points
from koopman.errors import DimensionMismatchError, DomainViolationError


class KernelFamily(str, Enum):
    SZEGO = "szego"
    EXPONENTIAL = "exponential"


WEIGHTS = {KernelFamily.SZEGO: WeightScheme.UNIT,
           KernelFamily.EXPONENTIAL: WeightScheme.FACTORIAL}


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """A Taylor-type kernel k(x, y) = f((x-x*)ᵀ(y-x*)) centred at x*.

    Attributes
    ----------
    family : KernelFamily
        SZEGO for ∏ 1/(1 - uᵢvᵢ) (Hardy space on the polydisc), EXPONENTIAL for exp(uᵀv)
    dimension : int
        state dimension n
    center : np.ndarray
        expansion point x*; evaluation uses translated coordinates u = x - x*
    """
    family: KernelFamily
    dimension: int
    center: np.ndarray = field(default=None)

    def __post_init__(self):
        center = np.zeros(self.dimension) if self.center is None else np.asarray(self.center, dtype=float).reshape(-1)
        if center.shape != (self.dimension,):
            raise DimensionMismatchError(f"Kernel center has {center.size} coordinates, expected {self.dimension}")
        object.__setattr__(self, "family", KernelFamily(self.family))
        object.__setattr__(self, "center", center)

    @property
    def domain_radius(self) -> float:
        return 1.0 if self.family == KernelFamily.SZEGO else np.inf

    def recentered(self, center=None) -> "KernelSpec":
        """Same kernel expanded around another point (the origin by default)."""
        return replace(self, center=np.zeros(self.dimension) if center is None else center)

    def monomial_basis(self, max_degree: int) -> MonomialBasis:
        """The weighted monomial basis that is orthonormal in this kernel's RKHS."""
        return MonomialBasis.build(self.dimension, max_degree, WEIGHTS[self.family])

    def translate(self, points) -> np.ndarray:
        return as_points(points, self.dimension) - self.center

    def check_domain(self, translated: np.ndarray, role: str = "point") -> None:
        """Raise DomainViolationError if any translated coordinate leaves the open domain."""
        if np.isinf(self.domain_radius):
            return
        magnitude = np.max(np.abs(translated), axis=1) if translated.size else np.zeros(0)
        offending = np.flatnonzero(~(magnitude < self.domain_radius))
        if offending.size:
            indices = [int(i) for i in offending]
            worst = float(np.nanmax(magnitude)) if np.any(np.isfinite(magnitude)) else np.inf
            raise DomainViolationError(
                f"{len(indices)} {role}(s) outside the {self.family.value} kernel domain "
                f"(|x - x*| < {self.domain_radius}), first {role} index {indices[0]}, "
                f"max coordinate magnitude {worst:.4g}; rescale the data or choose another kernel",
                indices=indices, role=role, max_abs=worst)


def _kernel_block(spec: KernelSpec, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    # entries are computed independently so the result does not depend on the argument order
    products = u[:, None, :] * v[None, :, :]
    if spec.family == KernelFamily.SZEGO:
        return 1.0 / np.prod(1.0 - products, axis=2)
    return np.exp(np.sum(products, axis=2))


def _mp_kernel_block(spec: KernelSpec, u: np.ndarray, v: np.ndarray):
    """Kernel block as an mpmath matrix at the current working precision.

    The float coordinates are taken as exact; only the kernel arithmetic is rounded.
    """
    rows = []
    for p in u:
        row = []
        for q in v:
            products = [mp.mpf(a) * mp.mpf(b) for a, b in zip(p, q)]
            if spec.family == KernelFamily.SZEGO:
                row.append(1 / mp.fprod(1 - t for t in products))
            else:
                row.append(mp.exp(mp.fsum(products)))
        rows.append(row)
    return mp.matrix(rows)


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate k(x, y) for two points.

    Parameters
    ----------
    spec : KernelSpec
        the kernel
    x, y : array-like
        points of dimension n

    Returns
    -------
    value: float
        ∏ᵢ 1/(1 - uᵢvᵢ) for the Szegő kernel, exp(uᵀv) for the exponential kernel, with u = x - x*, v = y - x*
    """
    u = spec.translate(np.reshape(x, (1, -1)))
    v = spec.translate(np.reshape(y, (1, -1)))
    spec.check_domain(u)
    spec.check_domain(v)
    return float(_kernel_block(spec, u, v)[0, 0])


@dataclass(frozen=True, eq=False)
class CrossGramMatrix:
    """M x M matrix A with A[i, j] = k(yᵢ, xⱼ)."""
    values: np.ndarray
    spec: KernelSpec


def cross_gram_matrix(spec: KernelSpec, xs, ys) -> CrossGramMatrix:
    """Kernel matrix between images and samples, A[i, j] = k(yᵢ, xⱼ).

    Images may leave the Szegő domain although the samples do not; this is reported
    with the offending image indices.
    """
    u = spec.translate(xs)
    v = spec.translate(ys)
    spec.check_domain(u, role="sample")
    spec.check_domain(v, role="image")
    return CrossGramMatrix(values=_kernel_block(spec, v, u), spec=spec)


def validate_domain(spec: KernelSpec, xs, ys) -> float:
    """Pre-fit scan of samples and images; returns the largest translated coordinate magnitude."""
    u = spec.translate(xs)
    v = spec.translate(ys)
    largest = float(max(np.max(np.abs(u), initial=0.0), np.max(np.abs(v), initial=0.0)))
    logging.info(f"Largest translated coordinate magnitude: {largest:.4g} (domain radius {spec.domain_radius})")
    spec.check_domain(u, role="sample")
    spec.check_domain(v, role="image")
    return largest


class KernelSectionBasis:
    """Non-orthonormal basis of kernel sections e_i = k(c_i, ·).

    With the sample points as centres, the data matrices of this basis are the Gram matrix
    and the cross Gram matrix, so the non-orthonormal analytic EDMD fit reduces to kernel EDMD.
    """
    def __init__(self, spec: KernelSpec, centers):
        self.spec = spec
        self.centers = spec.translate(centers)
        spec.check_domain(self.centers, role="center")

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    def evaluate(self, points) -> np.ndarray:
        u = self.spec.translate(points)
        self.spec.check_domain(u)
        return _kernel_block(self.spec, u, self.centers)

    def labels(self) -> list[str]:
        return [f"k(c{i},.)" for i in range(self.size)]
