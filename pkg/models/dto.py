"""
Data Transfer Objects for solver reports and simulation records.
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Literal, Optional
import json
import math

import numpy as np


Terminal = Literal['strip', 'quit', 'truncated']


def _clean(value):
    """JSON-safe float (NaN/inf become None)."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class IterationReport:
    """Outcome of an iterative solve."""
    iterations: int
    final_residual: float
    monotone: bool
    wall_time: float = 0.0
    converged: bool = True

    def to_dict(self, include_timing: bool = True) -> dict:
        data = {
            'iterations': self.iterations,
            'final_residual': self.final_residual,
            'monotone': self.monotone,
            'converged': self.converged,
        }
        if include_timing:
            data['wall_time_s'] = self.wall_time
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'IterationReport':
        """Create IterationReport from dictionary."""
        return cls(
            iterations=int(data['iterations']),
            final_residual=float(data['final_residual']),
            monotone=bool(data['monotone']),
            wall_time=float(data.get('wall_time_s', 0.0)),
            converged=bool(data.get('converged', True)),
        )

    @classmethod
    def from_json(cls, json_str: str) -> 'IterationReport':
        """Create IterationReport from JSON string."""
        return cls.from_dict(json.loads(json_str))

    def __str__(self) -> str:
        state = 'converged' if self.converged else 'UNCONVERGED'
        return (f"IterationReport({state}, iterations={self.iterations}, "
                f"residual={self.final_residual:.3e}, monotone={self.monotone})")


@dataclass
class EpisodeRecord:
    """One simulated game trajectory.

    coin_flips holds one bit per Tug-of-War step (1: Player I won the toss);
    theta2/theta1 hold one bit per step.
    """
    positions: List[int]
    coin_flips: List[int]
    theta2: List[int]
    theta1: List[int]
    bought_turns: int
    payoff: float
    terminal: Terminal
    episode: int = 0

    @property
    def truncated(self) -> bool:
        return self.terminal == 'truncated'

    @property
    def steps(self) -> int:
        return len(self.theta2)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> 'EpisodeRecord':
        """Create EpisodeRecord from dictionary."""
        return cls(
            positions=list(data['positions']),
            coin_flips=list(data.get('coin_flips', [])),
            theta2=list(data.get('theta2', [])),
            theta1=list(data.get('theta1', [])),
            bought_turns=int(data.get('bought_turns', 0)),
            payoff=float(data['payoff']),
            terminal=data.get('terminal', 'strip'),
            episode=int(data.get('episode', 0)),
        )

    @classmethod
    def from_json(cls, json_str: str) -> 'EpisodeRecord':
        """Create EpisodeRecord from one JSON line."""
        return cls.from_dict(json.loads(json_str))

    def __str__(self) -> str:
        return (f"EpisodeRecord(episode={self.episode}, steps={self.steps}, "
                f"terminal={self.terminal}, payoff={self.payoff:.6g})")


@dataclass
class EstimateReport:
    """Monte-Carlo estimate of a game value."""
    mean: float
    stderr: float
    episodes: int
    truncated: int

    def to_dict(self) -> dict:
        return {'mean': self.mean, 'stderr': self.stderr,
                'episodes': self.episodes, 'truncated': self.truncated}

    @classmethod
    def from_dict(cls, data: dict) -> 'EstimateReport':
        """Create EstimateReport from dictionary."""
        return cls(mean=float(data['mean']), stderr=float(data['stderr']),
                   episodes=int(data['episodes']), truncated=int(data.get('truncated', 0)))

    def __str__(self) -> str:
        return f"EstimateReport(mean={self.mean:.6g} +/- {self.stderr:.2g}, episodes={self.episodes})"


@dataclass
class AuditClass:
    """Increment statistics for one decision class."""
    steps: int
    mean_increment: float
    stderr: float
    flagged: bool


@dataclass
class AuditReport:
    """Empirical one-step increments of the value process per decision class."""
    classes: Dict[str, AuditClass] = field(default_factory=dict)
    overall_mean: float = 0.0
    steps: int = 0

    @property
    def flagged(self) -> List[str]:
        return [name for name, cls in self.classes.items() if cls.flagged]

    def to_dict(self) -> dict:
        return {
            'classes': {name: asdict(cls) for name, cls in self.classes.items()},
            'overall_mean': self.overall_mean,
            'steps': self.steps,
            'flagged': self.flagged,
        }


@dataclass
class FreeBoundary:
    """Free-boundary point cloud: sign-change nodes on both sides of {u > tol_pos}."""
    nodes: np.ndarray
    points: np.ndarray
    zero_side: np.ndarray
    tol_pos: float

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def is_empty(self) -> bool:
        return len(self.nodes) == 0

    @property
    def zero_side_points(self) -> np.ndarray:
        return self.points[self.zero_side]

    def to_dict(self) -> dict:
        return {'points': self.points.tolist(), 'tol_pos': self.tol_pos,
                'zero_side': self.zero_side.astype(bool).tolist()}


@dataclass
class AnalysisReport:
    """Free-boundary metrics. None marks a metric that does not apply."""
    nondeg_min_ratio: Optional[float] = None
    density_min: Optional[float] = None
    porosity_zeta: Optional[float] = None
    lipschitz: Optional[float] = None
    growth_c1: Optional[float] = None
    growth_c2: Optional[float] = None
    hausdorff: Optional[float] = None
    sharp_growth: Optional[float] = None
    fb_points: int = 0
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        data = {k: _clean(v) for k, v in asdict(self).items() if k not in ('fb_points', 'notes')}
        data['fb_points'] = self.fb_points
        data['notes'] = list(self.notes)
        return data


@dataclass
class SweepRow:
    """One row of a p sweep."""
    p: float
    sup_dist: Optional[float]
    lipschitz: Optional[float]
    hausdorff: Optional[float]
    converged: bool = True
    error: Optional[str] = None
    solution: Optional[object] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {'p': self.p, 'sup_dist': _clean(self.sup_dist), 'lipschitz': _clean(self.lipschitz),
                'hausdorff': _clean(self.hausdorff), 'converged': self.converged, 'error': self.error}


@dataclass
class EpsilonStudy:
    """Pairwise sup-distances between solutions for several epsilon."""
    eps: List[float]
    h: List[float]
    distances: List[List[float]]
    reference_errors: Optional[List[float]] = None
    reports: List[IterationReport] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {'eps': self.eps, 'h': self.h, 'distances': self.distances,
                'reference_errors': self.reference_errors,
                'reports': [r.to_dict(include_timing=False) for r in self.reports]}


@dataclass
class PatchSummary:
    """Summary of a patched-function construction."""
    n_components: int
    V_fraction: float
    theta_tol: float
    sup_diff_vs_dpp: Optional[float] = None
    sensitivity: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {'n_components': self.n_components, 'sup_diff_vs_dpp': _clean(self.sup_diff_vs_dpp),
                'V_fraction': self.V_fraction, 'theta_tol': self.theta_tol,
                'sensitivity': dict(self.sensitivity)}
