import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from tqdm import tqdm

from koopman.dynamics.systems import SystemSpec
from koopman.edmd.EDMD import SnapshotSet
from koopman.errors import DimensionMismatchError, InvalidArgumentError, SimulationBlowUpError

MAX_STEP = 0.01


@dataclass(frozen=True)
class SamplingPlan:
    """Uniform i.i.d. sampling of M initial states in an axis-aligned box [low, high).

    A coordinate with low == high is held fixed.
    """
    count: int
    low: tuple[float, ...]
    high: tuple[float, ...]
    dt: float | None = None
    seed: int = 0
    distribution: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "low", tuple(float(a) for a in np.atleast_1d(self.low)))
        object.__setattr__(self, "high", tuple(float(b) for b in np.atleast_1d(self.high)))
        if self.count < 1:
            raise InvalidArgumentError(f"Sampling plan needs at least one sample, got {self.count}")
        if len(self.low) != len(self.high) or not self.low:
            raise InvalidArgumentError("Sampling box needs matching low/high bounds for every coordinate")
        if any(a > b for a, b in zip(self.low, self.high)):
            raise InvalidArgumentError(f"Sampling box has low > high: {self.low} > {self.high}")
        if self.dt is not None and not self.dt > 0:
            raise InvalidArgumentError(f"Sampling time must be positive, got {self.dt}")
        if self.distribution != "uniform":
            raise InvalidArgumentError(f"Unsupported distribution '{self.distribution}'")

    @property
    def dimension(self) -> int:
        return len(self.low)

    def draw(self) -> np.ndarray:
        """Draw the M x n initial states, sequentially from one seeded generator."""
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.low, self.high, size=(self.count, self.dimension))


def default_substeps(dt: float) -> int:
    """Number of RK4 steps keeping h <= 0.01."""
    return max(1, math.ceil(dt / MAX_STEP - 1e-9))


def _check_finite(state: np.ndarray, system: SystemSpec):
    bad = np.flatnonzero(~np.all(np.isfinite(np.atleast_2d(state)), axis=1))
    if bad.size:
        raise SimulationBlowUpError(f"Trajectory of {system.name} blew up for sample {int(bad[0])} "
                                    f"({bad.size} non-finite states)", sample_index=int(bad[0]))


def rk4_flow(system: SystemSpec, x0, dt: float, substeps: int | None = None, progress: bool = False) -> np.ndarray:
    """Advance states by dt with the classical 4th-order Runge-Kutta scheme.

    Parameters
    ----------
    system : SystemSpec
        vector field to integrate
    x0 : array-like
        one state (n,) or a batch (M, n); rows are integrated independently
    dt : float
        flow time, > 0
    substeps : int | None
        number of RK4 steps of size dt/substeps (default keeps h <= 0.01)
    progress : bool
        show a tqdm bar over the substeps

    Returns
    -------
    state: np.ndarray
        flowed state(s), same shape as x0
    """
    if not dt > 0:
        raise InvalidArgumentError(f"Flow time must be positive, got {dt}")
    substeps = default_substeps(dt) if substeps is None else substeps
    if substeps < 1:
        raise InvalidArgumentError(f"Need at least one RK4 substep, got {substeps}")
    state = np.array(x0, dtype=float)
    if state.shape[-1] != system.dimension:
        raise DimensionMismatchError(f"State dimension {state.shape[-1]} != system dimension {system.dimension}")
    h = dt / substeps
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in tqdm(range(substeps), desc=f"RK4 {system.name}", disable=not progress):
            k1 = system(state)
            k2 = system(state + 0.5 * h * k1)
            k3 = system(state + 0.5 * h * k2)
            k4 = system(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_finite(state, system)
    return state


def generate_snapshots(system: SystemSpec, plan: SamplingPlan, substeps: int | None = None,
                       equilibrium=None, progress: bool = False) -> SnapshotSet:
    """Sample initial states and flow each of them for plan.dt.

    Initial states are drawn before any integration, so the batch integration cannot
    perturb the random stream.
    """
    if plan.dimension != system.dimension:
        raise DimensionMismatchError(f"Sampling box has dimension {plan.dimension}, system {system.name} has {system.dimension}")
    if plan.dt is None:
        raise InvalidArgumentError("Flow snapshots need a sampling time dt")
    xs = plan.draw()
    ys = rk4_flow(system, xs, plan.dt, substeps, progress=progress)
    metadata = {"system": system.name, "seed": plan.seed, "box": list(zip(plan.low, plan.high)),
                "substeps": default_substeps(plan.dt) if substeps is None else substeps}
    logging.info(f"Generated {plan.count} snapshot pairs of {system.name} (n={system.dimension}, "
                 f"dt={plan.dt}, seed={plan.seed}, box={metadata['box']})")
    return SnapshotSet(xs=xs, ys=ys, dt=plan.dt, equilibrium=equilibrium, metadata=metadata)


def generate_map_snapshots(step: Callable[[np.ndarray], np.ndarray], plan: SamplingPlan,
                           equilibrium=None, name: str = "map") -> SnapshotSet:
    """Snapshot pairs (x, step(x)) of a discrete-time map, without integration."""
    xs = plan.draw()
    ys = np.asarray(step(xs), dtype=float).reshape(xs.shape)
    return SnapshotSet(xs=xs, ys=ys, dt=None, equilibrium=equilibrium,
                       metadata={"system": name, "seed": plan.seed, "box": list(zip(plan.low, plan.high))})
