"""Uniform radial grids and Fourier-grid numerics.

Wavefunctions are plain complex numpy arrays sampled on a :class:`RadialGrid`;
norms and inner products carry the grid spacing, so ``sum(|psi|^2) * spacing``
is the probability content of a channel.

FFT convention (fixed for reproducibility): unnormalized forward transform,
(1/N)-scaled inverse (numpy's default), momentum ordering
``[0 .. N/2-1, -N/2 .. -1] * 2*pi / (N * spacing)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import circulant, eigh


class GridEdgeWarning(UserWarning):
    """Amplitude at the grid boundary exceeds the documented 1e-8 tolerance."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid of n_points (power of two, >= 8) spanning [r_min, r_max].

    Both endpoints are grid points, so spacing = (r_max - r_min) / (n_points - 1).
    The discrete Fourier machinery treats the grid as periodic with period
    n_points * spacing.
    """

    n_points: int
    r_min: float
    r_max: float

    def __post_init__(self):
        if self.n_points < 8 or not _is_power_of_two(int(self.n_points)):
            raise ValueError(
                f"n_points must be a power of two >= 8, got {self.n_points}"
            )
        if not self.r_max > self.r_min:
            raise ValueError(f"r_max ({self.r_max}) must exceed r_min ({self.r_min})")

    @property
    def spacing(self) -> float:
        return (self.r_max - self.r_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n_points)

    @cached_property
    def momenta(self) -> np.ndarray:
        """FFT-ordered momentum grid: [0..N/2-1, -N/2..-1] * 2*pi/(N*spacing)."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, d=self.spacing)


def build_grid(n_points: int, r_min: float, r_max: float) -> RadialGrid:
    """Construct a RadialGrid, rejecting invalid shapes with an explanation."""
    return RadialGrid(n_points, r_min, r_max)


def norm(values: np.ndarray, grid: RadialGrid) -> float:
    """Grid-weighted L2 norm, sqrt(sum |psi_i|^2 * spacing)."""
    return float(np.sqrt(np.sum(np.abs(values) ** 2) * grid.spacing))


def inner(bra: np.ndarray, ket: np.ndarray, grid: RadialGrid) -> complex:
    """Grid-weighted inner product <bra|ket> (bra is conjugated)."""
    return complex(np.vdot(bra, ket) * grid.spacing)


def apply_kinetic(values: np.ndarray, grid: RadialGrid, mass: float) -> np.ndarray:
    """Apply T = p^2/(2m) spectrally: FFT, multiply by k^2/(2m), inverse FFT."""
    if values.shape[-1] != grid.n_points:
        raise ValueError(
            f"field length {values.shape[-1]} does not match grid ({grid.n_points})"
        )
    if mass <= 0.0:
        raise ValueError("mass must be positive")
    t_k = grid.momenta**2 / (2.0 * mass)
    return np.fft.ifft(t_k * np.fft.fft(values, axis=-1), axis=-1)


def kinetic_matrix(grid: RadialGrid, mass: float) -> np.ndarray:
    """Dense real-symmetric kinetic matrix equivalent to apply_kinetic.

    The spectral operator F^-1 diag(k^2/2m) F is circulant; its first column
    is the inverse FFT of the momentum-space multiplier.
    """
    t_k = grid.momenta**2 / (2.0 * mass)
    col = np.fft.ifft(t_k)
    matrix = circulant(col.real)
    # the analytic operator is symmetric; remove the ~1e-18 fft round-off
    matrix += matrix.T
    matrix *= 0.5
    return matrix


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Bound-state eigensystem on a grid.

    energies are ascending (hartree); states has one grid-normalized,
    real-valued row per state with the largest-magnitude lobe positive.
    """

    energies: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        if self.states.shape[0] != self.energies.shape[0]:
            raise ValueError("state count does not match energy count")


def fgh_eigensolve(
    grid: RadialGrid, potential_values: np.ndarray, mass: float, k: int
) -> EigenSolution:
    """Lowest k eigenpairs of -(1/2m) d^2/dr^2 + V(r) by dense Fourier-grid
    diagonalization.

    Parameters
    ----------
    grid : RadialGrid
    potential_values : array of V on the grid points (hartree), finite.
    mass : particle mass (electron masses), positive.
    k : number of eigenpairs, 1 <= k <= n_points.

    Returns
    -------
    EigenSolution with <phi_i|phi_j> = delta_ij to 1e-10 under the grid-weighted
    inner product, and each state's maximum-magnitude lobe positive.
    """
    potential_values = np.asarray(potential_values, dtype=float)
    if potential_values.shape != (grid.n_points,):
        raise ValueError("potential_values must match the grid point count")
    if not np.all(np.isfinite(potential_values)):
        raise ValueError("potential_values contain non-finite entries")
    if mass <= 0.0:
        raise ValueError("mass must be positive")
    if not 1 <= k <= grid.n_points:
        raise ValueError(f"k must be in [1, {grid.n_points}], got {k}")

    hamiltonian = kinetic_matrix(grid, mass)
    idx = np.diag_indices_from(hamiltonian)
    hamiltonian[idx] += potential_values

    energies, vectors = eigh(hamiltonian, subset_by_index=(0, k - 1))
    states = vectors.T / np.sqrt(grid.spacing)
    for state in states:
        peak = np.argmax(np.abs(state))
        if state[peak] < 0.0:
            state *= -1.0
    return EigenSolution(energies=energies, states=states)


def gaussian_packet(
    grid: RadialGrid, center: float, width: float, momentum: float = 0.0
) -> np.ndarray:
    """Normalized Gaussian wavepacket exp(-(r-c)^2/(4 w^2) + i p r).

    width is the position-space standard deviation of |psi|^2.  The result is
    renormalized on the grid so its norm is 1 to 1e-10.  If the amplitude at
    either grid edge exceeds 1e-8 a GridEdgeWarning is issued.
    """
    if not grid.r_min < center < grid.r_max:
        raise ValueError(f"center {center} outside grid ({grid.r_min}, {grid.r_max})")
    if width <= 0.0:
        raise ValueError("width must be positive")
    r = grid.points
    values = np.exp(-((r - center) ** 2) / (4.0 * width**2) + 1j * momentum * r)
    values /= norm(values, grid)
    edge = max(abs(values[0]), abs(values[-1]))
    if edge > 1e-8:
        warnings.warn(
            f"packet amplitude {edge:.2e} at grid edge exceeds 1e-8; "
            "enlarge the box or narrow the packet",
            GridEdgeWarning,
            stacklevel=2,
        )
    return values
