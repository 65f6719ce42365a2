import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from mpmath import mp

from koopman.errors import DimensionMismatchError, InvalidArgumentError


class WeightScheme(str, Enum):
    """Monomial weights β_α making {β_α x^α} orthonormal in a Taylor-type RKHS."""
    UNIT = "unit"            # Szegő kernel on the polydisc
    FACTORIAL = "factorial"  # exponential kernel, β_α = 1/sqrt(α!)


@dataclass(frozen=True)
class MultiIndex:
    """Exponent vector α of a monomial x^α."""
    exponents: tuple[int, ...]

    def __post_init__(self):
        if len(self.exponents) < 1:
            raise InvalidArgumentError("A multi-index needs at least one exponent")
        if any(a < 0 for a in self.exponents):
            raise InvalidArgumentError(f"Negative exponent in {self.exponents}")

    @property
    def total_degree(self) -> int:
        return sum(self.exponents)

    @property
    def dimension(self) -> int:
        return len(self.exponents)

    def factorial(self) -> int:
        return math.prod(math.factorial(a) for a in self.exponents)

    def __str__(self):
        return "(" + ",".join(str(a) for a in self.exponents) + ")"


class DegreeBlock(NamedTuple):
    """Contiguous range of basis indices sharing one total degree (0-based start)."""
    degree: int
    start: int
    size: int

    @property
    def slice(self) -> slice:
        return slice(self.start, self.start + self.size)


def _compositions(length: int, total: int):
    # reverse-lexicographic: the first exponent runs from total down to 0
    if length == 1:
        yield (total,)
        return
    for value in range(total, -1, -1):
        for rest in _compositions(length - 1, total - value):
            yield (value,) + rest


def enumerate_multiindices(n: int, d: int) -> list[MultiIndex]:
    """Enumerate all multi-indices of n variables with total degree at most d.

    Indices are sorted by total degree and, within one degree, in reverse-lexicographic
    order, e.g. (2,0), (1,1), (0,2) for n=2 and degree 2.

    Parameters
    ----------
    n : int
        number of variables, n >= 1
    d : int
        maximal total degree, d >= 0

    Returns
    -------
    indices: list[MultiIndex]
        the C(n+d, d) multi-indices in graded order
    """
    if n < 1 or d < 0:
        raise InvalidArgumentError(f"Invalid multi-index range n={n}, d={d}: need n >= 1 and d >= 0")
    return [MultiIndex(exponents) for r in range(d + 1) for exponents in _compositions(n, r)]


def monomial_weight(index: MultiIndex, scheme: WeightScheme) -> float:
    if scheme == WeightScheme.FACTORIAL:
        return 1.0 / math.sqrt(index.factorial())
    return 1.0


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    """Weighted monomial basis {β_α x^α : |α| <= d} in graded order.

    Attributes
    ----------
    dimension : int
        number of state variables n
    max_degree : int
        maximal total degree d
    scheme : WeightScheme
        how the weights β_α were chosen
    indices : tuple[MultiIndex, ...]
        multi-indices in graded order, N = C(n+d, d) of them
    weights : np.ndarray
        positive weight β_α per index
    """
    dimension: int
    max_degree: int
    scheme: WeightScheme
    indices: tuple[MultiIndex, ...]
    weights: np.ndarray

    @classmethod
    def build(cls, n: int, d: int, scheme: WeightScheme = WeightScheme.UNIT) -> "MonomialBasis":
        indices = tuple(enumerate_multiindices(n, d))
        weights = np.array([monomial_weight(index, scheme) for index in indices])
        weights.setflags(write=False)
        return cls(dimension=n, max_degree=d, scheme=WeightScheme(scheme), indices=indices, weights=weights)

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def exponent_matrix(self) -> np.ndarray:
        """N x n integer matrix of exponents."""
        return np.array([index.exponents for index in self.indices], dtype=int)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([index.total_degree for index in self.indices], dtype=int)

    def evaluate(self, points) -> np.ndarray:
        return evaluate_basis(self, points)

    def labels(self) -> list[str]:
        return [str(index) for index in self.indices]


def as_points(points, n: int | None = None) -> np.ndarray:
    """Coerce a point list to an (M, n) float array, checking the dimension when n is given."""
    array = np.asarray(points, dtype=float)
    if array.ndim == 1:
        array = array.reshape(-1, 1) if n in (None, 1) else array.reshape(1, -1)
    if array.ndim != 2:
        raise DimensionMismatchError(f"Expected a list of points, got an array of shape {array.shape}")
    if n is not None and array.shape[1] != n:
        raise DimensionMismatchError(f"Points have dimension {array.shape[1]}, expected {n}")
    return array


def evaluate_basis(basis: MonomialBasis, points, exact: bool = False) -> np.ndarray:
    """Build the data matrix of a basis on a point set.

    Entry (k, i) is β_{α(i)} · points[k]^{α(i)}, computed with integer exponents.

    Parameters
    ----------
    basis : MonomialBasis
        the basis to evaluate
    points : array-like
        M points of dimension n (a flat list is read as M scalar points when n = 1)
    exact : bool
        evaluate with mpmath numbers at the current working precision, the float
        coordinates taken as exact (object array)

    Returns
    -------
    matrix: np.ndarray
        M x N data matrix
    """
    x = as_points(points, basis.dimension)
    exponents = basis.exponent_matrix
    if exact:
        x = np.vectorize(mp.mpf, otypes=[object])(x)
        exponents = exponents.astype(object)
    powers = np.prod(x[:, None, :] ** exponents[None, :, :], axis=2)
    return powers * basis.weights


def degree_offsets(basis: MonomialBasis) -> list[DegreeBlock]:
    """Partition of the basis into total-degree blocks.

    The block of degree r has C(n+r-1, r) members and starts where degree r-1 ends.
    """
    blocks = []
    start = 0
    for r in range(basis.max_degree + 1):
        size = math.comb(basis.dimension + r - 1, r)
        blocks.append(DegreeBlock(degree=r, start=start, size=size))
        start += size
    return blocks
