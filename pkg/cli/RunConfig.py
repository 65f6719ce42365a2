import os
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from koopman.errors import ConfigError
from koopman.kernel.gram import InversionPolicy
from koopman.kernel.kernels import KernelFamily

SEED_ENV = "ANALYTIC_EDMD_SEED"
METHODS = ("analytic", "analytic-nonortho", "edmd")


def _floats(value):
    if value is None or isinstance(value, list):
        return value
    if isinstance(value, (int, float)):
        return [float(value)]
    return [float(v) for v in str(value).replace(";", ",").split(",") if v.strip()]


class RunConfig(BaseModel):
    """Flat run configuration shared by every sub-command.

    Attributes
    ----------
    system : str | None
        benchmark system name (cubic1d, vanderpol, rotating2d, linear:a1,...)
    input_file : Path | None
        snapshot CSV to read instead of generating data
    koopman_file : Path | None
        Koopman matrix CSV written by `fit`
    kernel : str
        szego or exponential
    equilibrium : list[float] | None
        expansion point x* in original coordinates
    degree : int
        maximal total degree d of the monomial basis
    m, box, dt, seed, substeps : sampling plan
    rescale : float
        coordinate scaling ρ applied to the data before fitting
    policy : str
        Gram inversion policy (extended[:digits], exact, pinv[:rtol], ridge:gamma)
    tol : float
        lattice matching tolerance
    drop_out_of_domain : bool
        drop pairs leaving the kernel domain instead of aborting
    output_dir : Path
        where every artifact is written
    method : str
        fit method (analytic, analytic-nonortho, edmd)
    """
    model_config = ConfigDict(extra="forbid")

    system: str | None = None
    input_file: Path | None = None
    koopman_file: Path | None = None
    kernel: str = KernelFamily.SZEGO.value
    equilibrium: list[float] | None = None
    degree: int = 4
    m: int = 20
    box: list[float] | None = None
    dt: float = 0.5
    seed: int | None = None
    substeps: int | None = None
    rescale: float = 1.0
    policy: str = "extended:50"
    tol: float = 0.1
    drop_out_of_domain: bool = False
    output_dir: Path = Path("results")
    method: str = "analytic"

    @field_validator("equilibrium", "box", mode="before")
    @classmethod
    def split_floats(cls, value):
        return _floats(value)

    @field_validator("kernel")
    @classmethod
    def check_kernel(cls, value: str) -> str:
        return KernelFamily(value.strip().lower()).value

    @field_validator("policy")
    @classmethod
    def check_policy(cls, value: str) -> str:
        return str(InversionPolicy.parse(value))

    @field_validator("method")
    @classmethod
    def check_method(cls, value: str) -> str:
        if value not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        return value

    @field_validator("input_file", "koopman_file")
    @classmethod
    def check_exists(cls, value: Path | None) -> Path | None:
        if value is not None and not value.is_file():
            raise ValueError(f"file {value} does not exist")
        return value

    @model_validator(mode="after")
    def check_ranges(self) -> "RunConfig":
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not self.dt > 0 or not self.rescale > 0 or not self.tol > 0:
            raise ValueError("dt, rescale and tol must be positive")
        if self.substeps is not None and self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.box is not None and (len(self.box) % 2 or not self.box):
            raise ValueError(f"box needs low,high pairs, got {self.box}")
        return self

    @property
    def inversion_policy(self) -> InversionPolicy:
        return InversionPolicy.parse(self.policy)

    def resolved_seed(self) -> int:
        """Seed from flag or config, then the ANALYTIC_EDMD_SEED variable, then 0."""
        if self.seed is not None:
            return self.seed
        try:
            return int(os.environ.get(SEED_ENV, 0))
        except ValueError as e:
            raise ConfigError(f"{SEED_ENV} must be an integer") from e

    def box_bounds(self, n: int) -> tuple[list[float], list[float]]:
        """Per-coordinate (low, high); a single pair is repeated for every coordinate."""
        if self.box is None:
            raise ConfigError("A sampling box is required (--box low,high[,low,high...])")
        pairs = [self.box[i:i + 2] for i in range(0, len(self.box), 2)]
        if len(pairs) == 1:
            pairs = pairs * n
        if len(pairs) != n:
            raise ConfigError(f"Box has {len(pairs)} coordinate ranges, expected {n}")
        return [p[0] for p in pairs], [p[1] for p in pairs]

    @classmethod
    def load(cls, path: Path | None = None, **overrides) -> "RunConfig":
        """Read a flat YAML config file and apply command-line overrides (None means unset)."""
        values = {}
        if path is not None:
            try:
                with open(path) as file:
                    values = yaml.safe_load(file) or {}
            except (OSError, yaml.YAMLError) as e:
                raise ConfigError(f"Cannot read config file {path}: {e}") from e
            if not isinstance(values, dict):
                raise ConfigError(f"Config file {path} must hold flat key: value pairs")
            values = {key.replace("-", "_"): value for key, value in values.items()}
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**values)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
