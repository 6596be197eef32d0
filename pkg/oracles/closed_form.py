"""
Closed-form reference solutions.

Pure formulas with no grid dependence. Radial profiles take points, not
radii: in 1D `x` holds positions, in 2D the last axis holds coordinates.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from models.exceptions import ContractViolation, NoDeadCoreError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def theta_constant(N: int, lambda0: float, p: float) -> float:
    """
    Growth constant ((p-1)/p) * (lambda0/N)^(1/(p-1)).

    Doubles as the non-degeneracy constant C0 of the p-problem.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if lambda0 <= 0:
        raise ValueError(f"lambda0 must be positive, got {lambda0}")
    return ((p - 1.0) / p) * (lambda0 / N) ** (1.0 / (p - 1.0))


@dataclass(frozen=True)
class RadialSpec:
    """Radial dead-core problem on B_R(center) with boundary value kappa."""
    N: int
    R: float
    kappa: float
    lambda0: float
    p: float
    center: Optional[Sequence[float]] = None

    @property
    def theta(self) -> float:
        return theta_constant(self.N, self.lambda0, self.p)

    @property
    def threshold(self) -> float:
        """Width (kappa/Theta)^((p-1)/p) of the positivity annulus."""
        return (self.kappa / self.theta) ** ((self.p - 1.0) / self.p)

    @property
    def r0(self) -> float:
        return self.R - self.threshold

    def check_compatible(self) -> None:
        if not self.R > self.threshold:
            raise NoDeadCoreError(
                f"R={self.R} does not exceed (kappa/Theta)^((p-1)/p)={self.threshold:.6g}: no dead core",
                key='radius',
            )


def _radius(x: ArrayLike, center: Optional[Sequence[float]]) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if center is not None:
        c = np.asarray(center, dtype=float)
        if c.size == 1:
            return np.abs(pts - c[0])
        return np.linalg.norm(pts - c, axis=-1)
    if pts.ndim >= 2:
        return np.linalg.norm(pts, axis=-1)
    return np.abs(pts)


def _maybe_scalar(values: np.ndarray, x: ArrayLike):
    return float(values) if np.ndim(values) == 0 else values


def dead_core_profile(spec: RadialSpec, x: ArrayLike):
    """
    Theta * (|x - x0| - r0)_+^(p/(p-1)).

    Exact for N=1; an approximate reference in 2D.

    Raises:
        NoDeadCoreError: compatibility condition R > (kappa/Theta)^((p-1)/p) fails.
    """
    spec.check_compatible()
    r = _radius(x, spec.center)
    exponent = spec.p / (spec.p - 1.0)
    values = spec.theta * np.maximum(r - spec.r0, 0.0) ** exponent
    return _maybe_scalar(values, x)


def limit_radial_profile(R: float, kappa: float, x: ArrayLike,
                         center: Optional[Sequence[float]] = None):
    """(|x - x0| - (R - kappa))_+, the pointwise p -> infinity limit of the dead-core profile."""
    r0 = R - kappa
    if kappa != 1.0:
        logger.debug(f"limit profile uses r0 = R - kappa = {r0:g} (kappa={kappa:g})")
    if r0 < 0:
        logger.warning(f"kappa={kappa} exceeds R={R}: profile is positive on the whole ball")
    r = _radius(x, center)
    return _maybe_scalar(np.maximum(r - r0, 0.0), x)


def gradient_constraint_1d(x: float, extend: bool = False) -> float:
    """
    Solution on (-1, 4) with data 1 at -1 and -1 at 4: -x on (-1, 0], -x/4 on [0, 4).

    Args:
        x: Position.
        extend: Evaluate the same two pieces outside [-1, 4] (boundary strips).

    Raises:
        ContractViolation: x outside [-1, 4] while extend is False.
    """
    if not extend and not -1.0 <= x <= 4.0:
        raise ContractViolation(f"x={x} outside [-1, 4]")
    return -x if x <= 0 else -x / 4.0


def circle_intersection_fraction(center_distance: ArrayLike, rho: float, radius: float):
    """
    Fraction of the disk B_rho(x0) lying outside B_radius(0), |x0| = center_distance.

    Uses the exact lens area of two intersecting circles.
    """
    d = np.asarray(center_distance, dtype=float)
    small = np.pi * min(rho, radius) ** 2
    with np.errstate(invalid='ignore', divide='ignore'):
        c1 = np.clip((d ** 2 + rho ** 2 - radius ** 2) / (2 * d * rho), -1.0, 1.0)
        c2 = np.clip((d ** 2 + radius ** 2 - rho ** 2) / (2 * d * radius), -1.0, 1.0)
        kite = np.clip((-d + rho + radius) * (d + rho - radius) * (d - rho + radius) * (d + rho + radius), 0.0, None)
        lens = rho ** 2 * np.arccos(c1) + radius ** 2 * np.arccos(c2) - 0.5 * np.sqrt(kite)
    overlap = np.where(d >= rho + radius, 0.0, np.where(d <= abs(radius - rho), small, lens))
    return _maybe_scalar(1.0 - overlap / (np.pi * rho ** 2), center_distance)
