"""Covariate distributions used for standardization and variance partitioning.

All expectations over covariates are finite sums over an equally weighted
quadrature grid: a fixed grid for intervals, exact enumeration for discrete
levels, and the supplied point cloud for spatial polygons. Uniformity is the
default stance; the distribution is a modeling statement (which locations
matter equally), not an estimate of the sampling process.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ValidationError

DEFAULT_GRID_SIZE = 1000

__all__ = ["UniformInterval", "UniformLevels", "PointCloud", "CovariateDistribution"]


@dataclass(frozen=True)
class UniformInterval:
    """Uniform on [lower, upper]; quadrature is an inclusive equally spaced grid.

    Mean and sd are the analytic continuous-uniform moments, so linear-effect
    standardization does not depend on the grid size.
    """

    lower: float
    upper: float
    n_grid: int = DEFAULT_GRID_SIZE

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ValidationError(f"empty interval [{self.lower}, {self.upper}]")
        if self.n_grid < 2:
            raise ValidationError("need at least 2 quadrature points")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lower, self.upper, self.n_grid)

    def mean(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def sd(self) -> float:
        return (self.upper - self.lower) / np.sqrt(12.0)


@dataclass(frozen=True)
class UniformLevels:
    """Uniform over the integer levels 1..n_levels (exact enumeration)."""

    n_levels: int

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValidationError(f"need >= 1 level, got {self.n_levels}")

    def grid(self) -> np.ndarray:
        return np.arange(1, self.n_levels + 1, dtype=float)

    def mean(self) -> float:
        return 0.5 * (self.n_levels + 1)

    def sd(self) -> float:
        return float(np.sqrt((self.n_levels**2 - 1) / 12.0))


@dataclass(frozen=True)
class PointCloud:
    """Uniform over a finite cloud of planar points (polygon stand-in)."""

    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValidationError(f"point cloud must be a nonempty (Q, 2) array, got {pts.shape}")
        object.__setattr__(self, "points", pts)

    def grid(self) -> np.ndarray:
        return self.points


CovariateDistribution = UniformInterval | UniformLevels | PointCloud
