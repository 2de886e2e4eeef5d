"""
tfem/commands/config.py
Validated subcommand configurations.

Values come from the [section] of a TOML file and are overridden by the
flags given on the command line.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from tfem.approx.features import MIN_RELU_ATOMS
from tfem.config.settings import Defaults
from tfem.errors import ConfigError
from tfem.utils.file_loader import load_config


class Arm(str, Enum):
    LLOYD = "lloyd"
    TF = "tf"
    TF_PLUS = "tf_plus"


class Variable(str, Enum):
    DELTA = "delta"
    DIM = "dim"
    N = "n"
    CLASSES = "classes"
    IMBALANCE = "imbalance"
    TAU = "tau"


class Init(str, Enum):
    SPECTRAL = "spectral"
    KMEANSPP = "kmeanspp"


INTEGER_VARIABLES = {Variable.DIM, Variable.N, Variable.CLASSES, Variable.TAU}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InstanceOptions(_Strict):
    seed: int
    k: int = Field(2, ge=2)
    d: int = Field(5, ge=1)
    per_cluster: int = Field(Defaults.PER_CLUSTER, ge=1)
    delta: float = Field(4.0, gt=0.0)
    sigma: float = Field(1.0, ge=0.0)
    sigma_range: Optional[tuple[float, float]] = None
    imbalance: Optional[float] = Field(None, gt=0.0, lt=1.0)

    @field_validator("sigma_range")
    @classmethod
    def _ordered_range(cls, value):
        if value is not None and not 0.0 <= value[0] <= value[1]:
            raise ValueError(f"sigma_range must satisfy 0 <= lo <= hi, got {value}")
        return value


class GenConfig(InstanceOptions):
    count: int = Field(1, ge=1)


class RunConfig(InstanceOptions):
    tau: int = Field(1, ge=1)
    m_heads: int = Field(512, ge=MIN_RELU_ATOMS)
    beta: Optional[float] = Field(None, gt=0.0)
    feature_seed: int = 0
    init: Init = Init.SPECTRAL
    arms: list[Arm] = Field(default_factory=lambda: list(Arm), min_length=1)
    instance: Optional[str] = None
    save_params: bool = False


class SweepConfig(RunConfig):
    variable: Variable
    grid: list[float] = Field(min_length=1)
    seeds: int = Field(Defaults.SEEDS, ge=1)
    workers: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _grid_fits_variable(self):
        if self.instance is not None:
            raise ValueError("a sweep generates its own instances; drop 'instance'")
        if self.variable in INTEGER_VARIABLES and any(v != int(v) or v < 1 for v in self.grid):
            raise ValueError(f"grid of '{self.variable.value}' must hold positive integers, got {self.grid}")
        if self.variable is Variable.IMBALANCE and any(not 0.0 < v < 1.0 for v in self.grid):
            raise ValueError(f"imbalance ratios must lie in (0, 1), got {self.grid}")
        if self.variable is Variable.DELTA and any(v <= 0.0 for v in self.grid):
            raise ValueError(f"delta values must be > 0, got {self.grid}")
        return self

    def point(self, value: float) -> dict:
        """Instance and run fields at one grid value."""
        return {
            Variable.DELTA: {"delta": float(value)},
            Variable.DIM: {"d": int(value)},
            Variable.N: {"per_cluster": int(value)},
            Variable.CLASSES: {"k": int(value)},
            Variable.IMBALANCE: {"imbalance": float(value)},
            Variable.TAU: {"tau": int(value)},
        }[self.variable]


class PcaConfig(_Strict):
    seed: int
    d: int = Field(8, ge=1)
    k: int = Field(3, ge=1)
    tau: int = Field(60, ge=1)
    m_heads: int = Field(512, ge=MIN_RELU_ATOMS)
    count: int = Field(20, ge=1)
    top: list[float] = Field(default_factory=lambda: [10.0, 7.0, 4.5])
    tail_hi: float = Field(2.0, ge=0.0)

    @model_validator(mode="after")
    def _spectrum(self):
        if self.k > self.d:
            raise ValueError(f"need k <= d, got k={self.k}, d={self.d}")
        if len(self.top) != self.k:
            raise ValueError(f"top must list k={self.k} eigenvalues, got {len(self.top)}")
        if any(a <= b for a, b in zip(self.top, self.top[1:])) or self.top[-1] <= self.tail_hi:
            raise ValueError("top eigenvalues must decrease strictly and stay above tail_hi")
        return self


class AuditConfig(_Strict):
    seed: int
    draws: int = Field(10_000, ge=1)
    d_max: int = Field(10, ge=2)
    beta_range: tuple[float, float] = (0.1, 100.0)
    decay_ms: list[int] = Field(default_factory=lambda: [64, 256, 1024, 4096], min_length=2)
    em_instances: int = Field(5, ge=0)
    pca_matrices: int = Field(3, ge=0)
    m_heads: int = Field(1024, ge=MIN_RELU_ATOMS)


def resolve(model: type[BaseModel], config_file: Optional[str], section: str, overrides: dict) -> BaseModel:
    """
    File section first, then every flag that was given.

    Raises:
        ConfigError: on an unreadable file or a failed validation
    """
    data = load_config(config_file, section)
    data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return model(**data)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or section}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"[{section}] {problems}")
