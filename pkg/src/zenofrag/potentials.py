"""Analytic one-dimensional potential forms used for channel diagonals and
channel-channel couplings.

All forms decay to a finite tail value at large R so a channel's declared
asymptotic energy is added separately by the model layer.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .grids import RadialGrid


@dataclass(frozen=True)
class MorseWell:
    """D (1 - exp(-a (r - r0)))^2 - D: minimum -depth at r_eq, asymptote 0."""

    depth: float
    steepness: float
    r_eq: float

    def __post_init__(self):
        if self.depth <= 0.0:
            raise ValueError("Morse depth must be positive")
        if self.steepness <= 0.0:
            raise ValueError("Morse steepness must be positive")

    def sample(self, r: np.ndarray) -> np.ndarray:
        u = 1.0 - np.exp(-self.steepness * (np.asarray(r, dtype=float) - self.r_eq))
        return self.depth * u * u - self.depth

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        return self.sample(grid.points)


@dataclass(frozen=True)
class ExpRepulsive:
    """A exp(-b r) + tail: repulsive wall decaying to a constant."""

    amplitude: float
    steepness: float
    tail: float = 0.0

    def __post_init__(self):
        if self.amplitude <= 0.0:
            raise ValueError("repulsive amplitude must be positive")
        if self.steepness < 0.0:
            raise ValueError("repulsive steepness must be non-negative")

    def sample(self, r: np.ndarray) -> np.ndarray:
        return self.amplitude * np.exp(-self.steepness * np.asarray(r, dtype=float)) + self.tail

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        return self.sample(grid.points)


@dataclass(frozen=True)
class GaussianBump:
    """height * exp(-(r - center)^2 / (2 width^2)): localized hill or coupling."""

    height: float
    center: float
    width: float

    def __post_init__(self):
        if self.width <= 0.0:
            raise ValueError("Gaussian width must be positive")

    def sample(self, r: np.ndarray) -> np.ndarray:
        dr = np.asarray(r, dtype=float) - self.center
        return self.height * np.exp(-(dr * dr) / (2.0 * self.width**2))

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        return self.sample(grid.points)


@dataclass(frozen=True, eq=False)
class Tabulated:
    """Pointwise values on a specific grid; no analytic form."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise ValueError("tabulated potential contains non-finite values")
        object.__setattr__(self, "values", values)

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        if self.values.shape != (grid.n_points,):
            raise ValueError(
                f"tabulated potential has {self.values.shape[0]} points, "
                f"grid has {grid.n_points}"
            )
        return self.values


@dataclass(frozen=True)
class SumPotential:
    """Pointwise sum of other potential forms (e.g. well plus barrier)."""

    terms: tuple

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ValueError("SumPotential needs at least one term")

    def sample(self, r: np.ndarray) -> np.ndarray:
        total = self.terms[0].sample(r)
        for term in self.terms[1:]:
            total = total + term.sample(r)
        return total

    def on_grid(self, grid: RadialGrid) -> np.ndarray:
        total = self.terms[0].on_grid(grid)
        for term in self.terms[1:]:
            total = total + term.on_grid(grid)
        return total


Potential = Union[MorseWell, ExpRepulsive, GaussianBump, Tabulated, SumPotential]


def load_tabulated(path) -> Tabulated:
    """Read a two-column text file (coordinate bohr, value hartree).

    The coordinate column is checked for uniform ascending spacing; values are
    interpolated onto the caller's grid via Tabulated.on_grid only when the
    point count matches, so files must be produced for the target grid.
    """
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (coordinate, value)")
    coords = data[:, 0]
    if not np.all(np.diff(coords) > 0):
        raise ValueError(f"{path}: coordinate column must be strictly ascending")
    return Tabulated(values=data[:, 1])
