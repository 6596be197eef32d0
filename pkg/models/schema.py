"""
Run-configuration schema.

JSON configs are validated with pydantic; validation problems are
re-raised as ConfigurationError naming the offending key.
"""
import json
import logging
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import settings
from models.exceptions import ConfigurationError

logger = logging.getLogger(__name__)


class StrictModel(BaseModel):
    """Base model rejecting unknown keys."""
    model_config = ConfigDict(extra='forbid', frozen=True)


# ---------------------------------------------------------------- domains

class IntervalDomain(StrictModel):
    """Open interval (a, b)."""
    kind: Literal['interval'] = 'interval'
    a: float
    b: float

    @model_validator(mode='after')
    def _ordered(self) -> 'IntervalDomain':
        if not self.a < self.b:
            raise ValueError("interval requires a < b")
        return self

    @property
    def dim(self) -> int:
        return 1


class RectangleDomain(StrictModel):
    """Open rectangle (a1, b1) x (a2, b2)."""
    kind: Literal['rectangle'] = 'rectangle'
    a1: float
    b1: float
    a2: float
    b2: float

    @model_validator(mode='after')
    def _ordered(self) -> 'RectangleDomain':
        if not (self.a1 < self.b1 and self.a2 < self.b2):
            raise ValueError("rectangle requires a1 < b1 and a2 < b2")
        return self

    @property
    def dim(self) -> int:
        return 2


class BallDomain(StrictModel):
    """Open ball of the given radius; the center fixes the dimension."""
    kind: Literal['ball'] = 'ball'
    center: List[float] = Field(min_length=1, max_length=2)
    radius: float = Field(gt=0)

    @property
    def dim(self) -> int:
        return len(self.center)


Shape = Annotated[Union[IntervalDomain, RectangleDomain, BallDomain], Field(discriminator='kind')]


# ----------------------------------------------------------------- datums

class ConstantDatum(StrictModel):
    kind: Literal['constant'] = 'constant'
    value: float


class AffineDatum(StrictModel):
    """x -> slope . x + offset."""
    kind: Literal['affine'] = 'affine'
    slope: List[float] = Field(min_length=1, max_length=2)
    offset: float = 0.0


class RadialDatum(StrictModel):
    """kappa on the strip, `interior` inside the domain."""
    kind: Literal['radial'] = 'radial'
    kappa: float
    interior: float = 0.0


class TableDatum(StrictModel):
    """Node values listed inline (coordinates then value) or read from a field CSV."""
    kind: Literal['table'] = 'table'
    rows: Optional[List[List[float]]] = None
    path: Optional[str] = None
    interior: float = 0.0

    @model_validator(mode='after')
    def _one_source(self) -> 'TableDatum':
        if (self.rows is None) == (self.path is None):
            raise ValueError("table datum needs exactly one of 'rows' or 'path'")
        return self


class OracleDatum(StrictModel):
    """Closed-form reference evaluated on every node, strip included."""
    kind: Literal['oracle'] = 'oracle'
    name: Literal['gradient_constraint_1d', 'dead_core', 'limit_radial']
    radius: Optional[float] = Field(default=None, gt=0)
    kappa: Optional[float] = Field(default=None, gt=0)
    center: Optional[List[float]] = None
    lambda0: Optional[float] = Field(default=None, gt=0)
    p: Optional[float] = Field(default=None, ge=2)

    @model_validator(mode='after')
    def _parameters(self) -> 'OracleDatum':
        if self.name in ('dead_core', 'limit_radial'):
            if self.radius is None or self.kappa is None:
                raise ValueError(f"oracle '{self.name}' needs 'radius' and 'kappa'")
        if self.name == 'dead_core' and (self.lambda0 is None or self.p is None):
            raise ValueError("oracle 'dead_core' needs 'lambda0' and 'p'")
        return self


Datum = Annotated[
    Union[ConstantDatum, AffineDatum, RadialDatum, TableDatum, OracleDatum],
    Field(discriminator='kind'),
]


# ---------------------------------------------------------------- problem

class ProblemSpec(StrictModel):
    """Domain, lattice parameters, boundary datum, lambda0 and optional p."""
    domain: Shape
    h: float = Field(gt=0)
    epsilon: float = Field(gt=0)
    boundary: Datum
    lambda0: Union[float, Datum] = 1.0
    p: Optional[float] = Field(default=None, ge=2)

    @field_validator('lambda0')
    @classmethod
    def _positive_lambda(cls, value):
        if isinstance(value, float) and not value > 0:
            raise ValueError("lambda0 must be strictly positive")
        return value

    @model_validator(mode='after')
    def _dimensions(self) -> 'ProblemSpec':
        dim = self.domain.dim
        if isinstance(self.boundary, AffineDatum) and len(self.boundary.slope) != dim:
            raise ValueError(f"affine slope must have {dim} component(s)")
        return self

    @property
    def dim(self) -> int:
        return self.domain.dim


# ----------------------------------------------------------------- blocks

OperatorName = Literal['pay_or_leave', 'gradient_constraint', 'infinity_harmonic']


class DppBlock(StrictModel):
    operator: OperatorName = 'pay_or_leave'
    tol: float = Field(default_factory=lambda: settings.dpp.tol, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.dpp.max_iter, ge=1)
    sweep: Literal['jacobi', 'gauss_seidel'] = 'jacobi'
    reference: Optional[Datum] = None


class PlapOptionsBlock(StrictModel):
    delta: Optional[float] = Field(default=None, ge=0)
    tol_grad: float = Field(default_factory=lambda: settings.plap.tol_grad, gt=0)
    max_iter: int = Field(default_factory=lambda: settings.plap.max_iter, ge=1)


class PlapBlock(StrictModel):
    p_list: List[float] = Field(min_length=1)
    options: PlapOptionsBlock = Field(default_factory=PlapOptionsBlock)
    reference: Optional[Datum] = None

    @field_validator('p_list')
    @classmethod
    def _exponents(cls, value: List[float]) -> List[float]:
        for p in value:
            if not 2 <= p <= settings.plap.p_max:
                raise ValueError(f"p={p} outside [2, {settings.plap.p_max:g}]")
        return value


class GameBlock(StrictModel):
    episodes: int = Field(ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    start: List[float] = Field(min_length=1, max_length=2)
    max_steps: int = Field(default_factory=lambda: settings.game.max_steps, ge=1)
    strategy: Literal['greedy', 'random', 'backtracking'] = 'greedy'
    include_truncated: bool = False
    log_episodes: bool = True


class PatchBlock(StrictModel):
    theta_tol: Optional[float] = Field(default=None, ge=0)
    theta_scales: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])


class AnalyzeBlock(StrictModel):
    radii: List[float] = Field(min_length=1)
    rho: float = Field(gt=0)
    tol_pos: Optional[float] = Field(default=None, ge=0)
    exponent: Optional[float] = Field(default=None, ge=1)
    field: Literal['dpp', 'plap', 'file'] = 'dpp'
    field_path: Optional[str] = None
    tol_scales: List[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0])

    @model_validator(mode='after')
    def _field_source(self) -> 'AnalyzeBlock':
        if self.field == 'file' and not self.field_path:
            raise ValueError("field 'file' requires 'field_path'")
        return self


class SweepEpsBlock(StrictModel):
    eps_list: List[float] = Field(min_length=1)
    reference: Optional[Datum] = None


class RunConfig(StrictModel):
    """A full run configuration; which blocks are needed depends on the subcommand."""
    problem: ProblemSpec
    dpp: Optional[DppBlock] = None
    plap: Optional[PlapBlock] = None
    game: Optional[GameBlock] = None
    patch: Optional[PatchBlock] = None
    analyze: Optional[AnalyzeBlock] = None
    sweep_eps: Optional[SweepEpsBlock] = None
    output_dir: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> 'RunConfig':
        """Validate a decoded config, mapping failures to ConfigurationError."""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            first = e.errors()[0]
            key = '.'.join(str(part) for part in first['loc']) or 'config'
            raise ConfigurationError(f"{first['msg']}", key=key) from e

    @classmethod
    def from_json(cls, text: str) -> 'RunConfig':
        """Create RunConfig from JSON text."""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"invalid JSON: {e}", key='config') from e
        if not isinstance(data, dict):
            raise ConfigurationError("top level must be an object", key='config')
        return cls.from_dict(data)


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a JSON run configuration file."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigurationError(f"cannot read config {path}: {e}", key='config') from e
    config = RunConfig.from_json(text)
    logger.info(f"Loaded run config from {path}")
    return config
