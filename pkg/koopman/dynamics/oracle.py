import logging

import numpy as np
import sympy
from numpy.polynomial import polynomial

from koopman.basis.monomials import MonomialBasis
from koopman.edmd.EDMD import KoopmanMatrix, KoopmanMethod
from koopman.errors import InvalidArgumentError

MAX_EXACT_TERMS = 64


def polynomial_map(coefficients):
    """Vectorized 1D map x -> p(x) with coefficients in ascending powers."""
    coefficients = np.asarray([float(c) for c in coefficients])
    return lambda x: polynomial.polyval(np.asarray(x, dtype=float), coefficients)


def _exact_powers(coefficients, d: int) -> list[list]:
    x = sympy.Symbol("x")
    p = sum(sympy.Rational(str(c)) * x ** k for k, c in enumerate(coefficients))
    powers = []
    for j in range(d + 1):
        expanded = sympy.Poly(sympy.expand(p ** j), x)
        powers.append([expanded.coeff_monomial(x ** i) for i in range(d + 1)])
    return powers


def _float_powers(coefficients, d: int) -> list[np.ndarray]:
    c = np.asarray([float(a) for a in coefficients])
    powers = []
    for j in range(d + 1):
        full = polynomial.polypow(c, j) if j else np.array([1.0])
        truncated = np.zeros(d + 1)
        truncated[:min(d + 1, full.size)] = full[:d + 1]
        powers.append(truncated)
    return powers


def exact_koopman_matrix_oracle(coefficients, basis: MonomialBasis) -> KoopmanMatrix:
    """Exact truncated composition matrix of a 1D polynomial map y = p(x).

    With basis functions eⱼ = βⱼxʲ, column j holds the coefficients of eⱼ∘p truncated to
    degree d: K[i, j] = (βⱼ/βᵢ)[pʲ]ᵢ. Coefficients are expanded in exact rational
    arithmetic; when deg(p)·d exceeds the term limit the expansion uses floats and the
    result is flagged "float-fallback".

    Parameters
    ----------
    coefficients : sequence
        coefficients of p in ascending powers (ints, floats, strings or Fractions)
    basis : MonomialBasis
        one-dimensional monomial basis of degrees 0..d

    Returns
    -------
    K: KoopmanMatrix
        oracle matrix with method "exact-oracle"
    """
    if basis.dimension != 1:
        raise InvalidArgumentError(f"The composition oracle handles 1D maps only, got a basis of dimension {basis.dimension}")
    if len(coefficients) == 0:
        raise InvalidArgumentError("Polynomial map needs at least one coefficient")
    d = basis.max_degree
    degree_p = max(len(coefficients) - 1, 1)
    flags = ()
    if degree_p * d <= MAX_EXACT_TERMS:
        try:
            powers = [[float(a) for a in row] for row in _exact_powers(coefficients, d)]
        except (OverflowError, ValueError, TypeError) as e:
            logging.warning(f"Exact expansion failed ({e}); falling back to floating point")
            powers, flags = _float_powers(coefficients, d), ("float-fallback",)
    else:
        logging.warning(f"deg(p)·d = {degree_p * d} exceeds {MAX_EXACT_TERMS} terms; falling back to floating point")
        powers, flags = _float_powers(coefficients, d), ("float-fallback",)
    # basis index i is the monomial x^i in a 1D basis
    weights = basis.weights
    values = np.array(powers, dtype=float).T * (weights[None, :] / weights[:, None])
    return KoopmanMatrix(values=values, basis=basis, method=KoopmanMethod.ORACLE, flags=flags)
