from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from koopman.errors import InvalidArgumentError

EQUILIBRIUM_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """A continuous-time benchmark system ẋ = f(x).

    Attributes
    ----------
    name : str
        registry name
    dimension : int
        state dimension n
    vector_field : Callable[[np.ndarray], np.ndarray]
        f evaluated row-wise on an (M, n) array; rows must not interact
    known_equilibria : list[np.ndarray]
        points with ‖f(x*)‖ <= 1e-12, checked on construction
    known_jacobian_eigs : list[complex] | None
        linearization eigenvalues at the first equilibrium, used as test oracles
    """
    name: str
    dimension: int
    vector_field: Callable[[np.ndarray], np.ndarray]
    known_equilibria: list = field(default_factory=list)
    known_jacobian_eigs: list | None = None

    def __post_init__(self):
        equilibria = [np.asarray(x, dtype=float).reshape(-1) for x in self.known_equilibria]
        for x in equilibria:
            if x.shape != (self.dimension,):
                raise InvalidArgumentError(f"Equilibrium {x} of {self.name} has the wrong dimension")
            residual = np.linalg.norm(self(x))
            if residual > EQUILIBRIUM_TOLERANCE:
                raise InvalidArgumentError(f"{x} is not an equilibrium of {self.name} (‖f(x*)‖ = {residual:.3e})")
        object.__setattr__(self, "known_equilibria", equilibria)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        state = np.asarray(x, dtype=float)
        return np.asarray(self.vector_field(np.atleast_2d(state))).reshape(state.shape)

    def jacobian(self, x, step: float = 1e-6) -> np.ndarray:
        """Central-difference Jacobian of the vector field at x."""
        x = np.asarray(x, dtype=float).reshape(-1)
        shifts = step * np.eye(self.dimension)
        columns = [(self(x + h) - self(x - h)) / (2 * step) for h in shifts]
        return np.stack(columns, axis=1)

    def linearization_eigs(self, x) -> np.ndarray:
        """Eigenvalues of the Jacobian at x (the degree-1 generator eigenvalues there)."""
        return np.linalg.eigvals(self.jacobian(x))


def cubic1d() -> SystemSpec:
    """ẋ = x - x³: unstable equilibrium at 0 (λ = 1), stable ones at ±1 (λ = -2)."""
    return SystemSpec(name="cubic1d", dimension=1,
                      vector_field=lambda x: x - x ** 3,
                      known_equilibria=[[0.0], [1.0], [-1.0]],
                      known_jacobian_eigs=[1.0])


def _van_der_pol(x):
    x1, x2 = x[:, 0], x[:, 1]
    return np.stack([-x2, -(1 - x1 ** 2) * x2 + x1], axis=1)


def van_der_pol() -> SystemSpec:
    """Reversed Van der Pol: stable focus at the origin with λ = -0.5 ± i√3/2, unstable limit cycle."""
    return SystemSpec(name="vanderpol", dimension=2, vector_field=_van_der_pol,
                      known_equilibria=[[0.0, 0.0]],
                      known_jacobian_eigs=[complex(-0.5, np.sqrt(3) / 2), complex(-0.5, -np.sqrt(3) / 2)])


def _rotating(x):
    x1, x2 = x[:, 0], x[:, 1]
    return np.stack([-x1 - x1 ** 2 * x2 - x2 ** 3,
                     -x2 + x1 * x2 ** 2 + x1 ** 3], axis=1)


def rotating2d() -> SystemSpec:
    """Rotating dynamics, in polar form ṙ = -r, θ̇ = r²; linearization -I (λ = -1 twice)."""
    return SystemSpec(name="rotating2d", dimension=2, vector_field=_rotating,
                      known_equilibria=[[0.0, 0.0]], known_jacobian_eigs=[-1.0, -1.0])


def linear_diagonal(rates) -> SystemSpec:
    """ẋᵢ = aᵢxᵢ, whose flow is the diagonal linear map exp(aᵢt)."""
    rates = np.asarray(rates, dtype=float).reshape(-1)
    name = "linear:" + ",".join(repr(float(a)) for a in rates)
    return SystemSpec(name=name, dimension=rates.size, vector_field=lambda x: x * rates,
                      known_equilibria=[np.zeros(rates.size)], known_jacobian_eigs=list(rates))


def custom(name: str, vector_field: Callable, dimension: int, equilibria=None) -> SystemSpec:
    return SystemSpec(name=name, dimension=dimension, vector_field=vector_field,
                      known_equilibria=list(equilibria or []))


SYSTEMS = {
    "cubic1d": cubic1d,
    "vanderpol": van_der_pol,
    "rotating2d": rotating2d,
}


def get_system(name: str) -> SystemSpec:
    """Look up a benchmark system by name ("linear:a1,a2,..." builds a diagonal linear system)."""
    key = name.strip().lower()
    if key.startswith("linear:"):
        try:
            return linear_diagonal([float(a) for a in key.split(":", 1)[1].split(",")])
        except ValueError as e:
            raise InvalidArgumentError(f"Invalid linear system rates in '{name}'") from e
    if key not in SYSTEMS:
        raise InvalidArgumentError(f"Unknown system '{name}', expected one of {sorted(SYSTEMS)} or linear:a1,...")
    return SYSTEMS[key]()
