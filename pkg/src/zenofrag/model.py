"""Surrogate coupled-channel Hamiltonians.

Three system kinds are provided:

* ``vp_ladder`` — a ladder of vibrational channels over the dissociation
  coordinate R.  Each channel carries the same van der Waals well shifted by
  the corresponding level of a fast diatomic Morse oscillator; adjacent
  channels are coupled by c exp(-b R).
* ``ep_three_state`` — the ladder augmented with repulsive electronic
  channels (labels like "2g", "C") lying open below the initial channel and
  coupled to it by Gaussian coupling functions.
* ``metastable_1d`` — a single channel with an inner wall and a finite
  Gaussian barrier; its pocket states tunnel out.  Used for propagator and
  decay-analysis validation.

Only R is gridded; the fast coordinate enters through the channel asymptotes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .grids import RadialGrid, fgh_eigensolve
from .potentials import (ExpRepulsive, GaussianBump, MorseWell, Potential,
                         SumPotential)
from .propagate import FluxLedger, WavePacket

VIBRATIONAL = "vibrational"
ELECTRONIC = "electronic"


def morse_levels(depth: float, steepness: float, mass: float) -> np.ndarray:
    """Bound-level energies of a Morse oscillator, measured from the well
    minimum: E_n = w_e (n + 1/2) - (w_e^2 / 4D) (n + 1/2)^2 with
    w_e = a sqrt(2D/m).  Levels exist for n <= floor(sqrt(2 m D)/a - 1/2);
    returns an empty array when the well holds none.
    """
    if depth <= 0.0 or steepness <= 0.0 or mass <= 0.0:
        raise ValueError("depth, steepness and mass must all be positive")
    omega = steepness * math.sqrt(2.0 * depth / mass)
    n_max = math.floor(math.sqrt(2.0 * mass * depth) / steepness - 0.5)
    if n_max < 0:
        return np.empty(0)
    n = np.arange(n_max + 1) + 0.5
    return omega * n - (omega * omega / (4.0 * depth)) * n * n


@dataclass(frozen=True)
class ChannelSpec:
    label: str
    kind: str
    asymptotic_energy: float
    potential: Potential

    def __post_init__(self):
        if self.kind not in (VIBRATIONAL, ELECTRONIC):
            raise ValueError(f"unknown channel kind {self.kind!r}")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Immutable Hamiltonian blueprint: channels, couplings and masses.

    couplings is a tuple of (label_a, label_b, potential) with label pairs in
    channel-index order; the potential matrix is symmetric by construction.
    """

    grid: RadialGrid
    reduced_mass: float
    channels: tuple[ChannelSpec, ...]
    couplings: tuple[tuple[str, str, Potential], ...]
    initial_channel: str
    wall_clip: float | None = 2.0

    def __post_init__(self):
        if self.reduced_mass <= 0.0:
            raise ValueError("reduced_mass must be positive")
        labels = [ch.label for ch in self.channels]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate channel labels in {labels}")
        if self.initial_channel not in labels:
            raise ValueError(f"initial channel {self.initial_channel!r} not defined")
        seen = {}
        for a, b, pot in self.couplings:
            if a not in labels or b not in labels:
                raise ValueError(f"coupling ({a}, {b}) references unknown channel")
            if a == b:
                raise ValueError(f"self-coupling on channel {a!r}")
            key = tuple(sorted((labels.index(a), labels.index(b))))
            if key in seen and seen[key] is not pot:
                raise ValueError(f"conflicting couplings for pair ({a}, {b})")
            seen[key] = pot

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(ch.label for ch in self.channels)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(ch.kind for ch in self.channels)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    def channel_index(self, label: str) -> int:
        return self.labels.index(label)

    def channel(self, label: str) -> ChannelSpec:
        return self.channels[self.channel_index(label)]

    def coupling_potential(self, label_a: str, label_b: str) -> Potential | None:
        want = {label_a, label_b}
        for a, b, pot in self.couplings:
            if {a, b} == want:
                return pot
        return None

    @cached_property
    def diagonal_values(self) -> np.ndarray:
        """(n_channels, n_points): channel potential plus asymptote.

        Values are capped at wall_clip (hartree): repulsive walls far above
        every dynamical energy scale are numerically equivalent, and the cap
        keeps the grid Hamiltonian's spectrum inside the resolvable range.
        """
        values = np.array(
            [ch.potential.on_grid(self.grid) + ch.asymptotic_energy for ch in self.channels]
        )
        if self.wall_clip is not None:
            np.minimum(values, self.wall_clip, out=values)
        return values

    def coupling_values(self, label_a: str, label_b: str) -> np.ndarray:
        """Coupling potential between two channels on the grid (zero when the
        pair is uncoupled), magnitude-capped at wall_clip like the diagonal."""
        pot = self.coupling_potential(label_a, label_b)
        if pot is None:
            return np.zeros(self.grid.n_points)
        values = pot.on_grid(self.grid)
        if self.wall_clip is not None:
            values = np.clip(values, -self.wall_clip, self.wall_clip)
        return values

    @cached_property
    def potential_matrix(self) -> np.ndarray:
        """(n_points, n_channels, n_channels) symmetric potential matrix."""
        n = self.n_channels
        mat = np.zeros((self.grid.n_points, n, n))
        for c, diag in enumerate(self.diagonal_values):
            mat[:, c, c] = diag
        idx = {label: i for i, label in enumerate(self.labels)}
        for a, b, _pot in self.couplings:
            values = self.coupling_values(a, b)
            i, j = idx[a], idx[b]
            mat[:, i, j] = values
            mat[:, j, i] = values
        return mat

    def coupling_matrix_at(self, grid_index: int) -> np.ndarray:
        """Dense symmetric channel matrix at one grid point (hartree)."""
        if not 0 <= grid_index < self.grid.n_points:
            raise IndexError(f"grid index {grid_index} out of range")
        return self.potential_matrix[grid_index].copy()


@dataclass(frozen=True)
class VibLadderParams:
    """Parameters of the vibrational-ladder surrogate.

    The fast diatomic mode enters only through its Morse levels; v_top names
    the initially populated vibrational quantum number and n_channels how many
    rungs (v_top, v_top-1, ...) are retained.  An optional Gaussian barrier on
    the van der Waals well puts a shape resonance into the open channels'
    continua, which structures the final-state spectral density.
    """

    fast_depth: float
    fast_steepness: float
    fast_mass: float
    vdw_depth: float
    vdw_steepness: float
    vdw_r_eq: float
    n_channels: int
    v_top: int
    coupling_strength: float
    coupling_range: float
    barrier_height: float = 0.0
    barrier_center: float = 0.0
    barrier_width: float = 1.0

    def __post_init__(self):
        if self.n_channels < 2:
            raise ValueError("vp_ladder needs at least 2 channels")
        if self.coupling_strength < 0.0:
            raise ValueError("coupling strength must be non-negative")
        if self.v_top + 1 < self.n_channels:
            raise ValueError("v_top too small for the requested channel count")
        if self.barrier_height < 0.0:
            raise ValueError("barrier height must be non-negative")


@dataclass(frozen=True)
class ElectronicChannelParams:
    """One repulsive electronic channel and its coupling to the initial channel.

    asymptote_offset is relative to the initial channel's asymptote; negative
    values leave the channel open at the quasibound energy.
    """

    label: str
    repulsive_amplitude: float
    repulsive_range: float
    asymptote_offset: float
    coupling_height: float
    coupling_center: float
    coupling_width: float


@dataclass(frozen=True)
class EpThreeStateParams:
    ladder: VibLadderParams
    electronic: tuple[ElectronicChannelParams, ...]

    def __post_init__(self):
        if len(self.electronic) < 1:
            raise ValueError("ep_three_state needs at least one electronic channel")


@dataclass(frozen=True)
class MetastableParams:
    """Inner exponential wall plus a Gaussian barrier; pocket states between
    them sit above the outer asymptote (zero) and decay by tunneling."""

    wall_amplitude: float
    wall_range: float
    barrier_height: float
    barrier_center: float
    barrier_width: float

    def __post_init__(self):
        if self.barrier_height <= 0.0:
            raise ValueError("barrier height must be positive")


def _interior_confinement(values: np.ndarray, asymptote: float):
    """Effective binding potential and threshold for quasibound-state search.

    The binding pocket is taken as the first local minimum behind the inner
    wall.  If an interior maximum (a barrier) rises above both the pocket and
    the grid tail, the potential is continued outward as a plateau at the
    barrier top and the threshold is the barrier top; otherwise the potential
    is used as-is and the threshold is the channel asymptote.
    """
    interior = np.nonzero(
        (values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])
    )[0]
    i_min = int(interior[0]) + 1 if len(interior) else int(np.argmin(values))
    tail = values[i_min:]
    i_peak = i_min + int(np.argmax(tail))
    barrier_top = values[i_peak]
    if (i_peak < len(values) - 1
            and barrier_top > values[-1] + 1e-12
            and barrier_top > values[i_min] + 1e-12):
        effective = values.copy()
        effective[i_peak:] = barrier_top
        return effective, float(barrier_top)
    return values, float(asymptote)


def _bound_levels(system_grid: RadialGrid, values: np.ndarray, mass: float,
                  asymptote: float, k: int) -> np.ndarray:
    effective, threshold = _interior_confinement(values, asymptote)
    solution = fgh_eigensolve(system_grid, effective, mass, k)
    return solution.energies[solution.energies < threshold]


def build_vp_ladder(params: VibLadderParams, grid: RadialGrid,
                    reduced_mass: float) -> SystemSpec:
    levels = morse_levels(params.fast_depth, params.fast_steepness, params.fast_mass)
    if len(levels) <= params.v_top:
        raise ValueError(
            f"fast Morse well holds {len(levels)} levels; v_top={params.v_top} "
            "is not bound"
        )
    well: Potential = MorseWell(params.vdw_depth, params.vdw_steepness, params.vdw_r_eq)
    if params.barrier_height > 0.0:
        well = SumPotential(
            (well, GaussianBump(params.barrier_height, params.barrier_center,
                                params.barrier_width))
        )
    channels = []
    for j in range(params.n_channels):
        v = params.v_top - j
        channels.append(
            ChannelSpec(
                label=f"v{v}",
                kind=VIBRATIONAL,
                asymptotic_energy=float(levels[v]),
                potential=well,
            )
        )
    coupling = ExpRepulsive(params.coupling_strength, params.coupling_range) \
        if params.coupling_strength > 0.0 else None
    couplings = []
    if coupling is not None:
        for j in range(params.n_channels - 1):
            couplings.append((channels[j].label, channels[j + 1].label, coupling))
    system = SystemSpec(
        grid=grid,
        reduced_mass=reduced_mass,
        channels=tuple(channels),
        couplings=tuple(couplings),
        initial_channel=channels[0].label,
    )
    _require_bound_initial(system)
    return system


def build_ep_three_state(params: EpThreeStateParams, grid: RadialGrid,
                         reduced_mass: float) -> SystemSpec:
    ladder = build_vp_ladder(params.ladder, grid, reduced_mass)
    initial = ladder.channel(ladder.initial_channel)
    channels = list(ladder.channels)
    couplings = list(ladder.couplings)
    for ep in params.electronic:
        channels.append(
            ChannelSpec(
                label=ep.label,
                kind=ELECTRONIC,
                asymptotic_energy=initial.asymptotic_energy + ep.asymptote_offset,
                potential=ExpRepulsive(ep.repulsive_amplitude, ep.repulsive_range),
            )
        )
        couplings.append(
            (
                ladder.initial_channel,
                ep.label,
                GaussianBump(ep.coupling_height, ep.coupling_center, ep.coupling_width),
            )
        )
    system = SystemSpec(
        grid=grid,
        reduced_mass=reduced_mass,
        channels=tuple(channels),
        couplings=tuple(couplings),
        initial_channel=ladder.initial_channel,
    )
    _require_bound_initial(system)
    return system


def build_metastable(params: MetastableParams, grid: RadialGrid,
                     reduced_mass: float) -> SystemSpec:
    wall = ExpRepulsive(params.wall_amplitude, params.wall_range)
    barrier = GaussianBump(params.barrier_height, params.barrier_center,
                           params.barrier_width)
    channel = ChannelSpec(
        label="well",
        kind=VIBRATIONAL,
        asymptotic_energy=0.0,
        potential=SumPotential((wall, barrier)),
    )
    system = SystemSpec(
        grid=grid,
        reduced_mass=reduced_mass,
        channels=(channel,),
        couplings=(),
        initial_channel="well",
    )
    _require_bound_initial(system)
    return system


_BUILDERS = {
    "vp_ladder": build_vp_ladder,
    "ep_three_state": build_ep_three_state,
    "metastable_1d": build_metastable,
}


def build_system(kind: str, params, grid: RadialGrid, reduced_mass: float) -> SystemSpec:
    """Construct a SystemSpec of the given kind; rejects parameter sets whose
    initial channel holds no bound (or barrier-confined) state."""
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ValueError(
            f"unknown system kind {kind!r}; expected one of {sorted(_BUILDERS)}"
        ) from None
    return builder(params, grid, reduced_mass)


def _require_bound_initial(system: SystemSpec) -> None:
    channel = system.channel(system.initial_channel)
    values = system.diagonal_values[system.channel_index(system.initial_channel)]
    levels = _bound_levels(system.grid, values, system.reduced_mass,
                           channel.asymptotic_energy, k=1)
    if len(levels) == 0:
        raise ValueError(
            f"initial channel {channel.label!r} supports no bound state below "
            f"its confinement threshold (asymptote {channel.asymptotic_energy:.6g})"
        )


def initial_quasibound_state(system: SystemSpec, level_index: int = 0) -> WavePacket:
    """Quasibound initial state: the selected eigenstate of the uncoupled
    initial channel, placed in that channel with unit norm.

    For channels with an interior barrier, the binding potential is continued
    as a plateau from the barrier top and levels below the barrier top count
    as (quasi)bound.
    """
    if level_index < 0:
        raise ValueError("level_index must be non-negative")
    idx = system.channel_index(system.initial_channel)
    channel = system.channels[idx]
    values = system.diagonal_values[idx]
    effective, threshold = _interior_confinement(values, channel.asymptotic_energy)
    solution = fgh_eigensolve(system.grid, effective, system.reduced_mass,
                              k=level_index + 1)
    energy = solution.energies[level_index]
    if energy >= threshold:
        n_bound = int(np.sum(solution.energies < threshold))
        raise ValueError(
            f"level {level_index} of channel {channel.label!r} is unbound: "
            f"E = {energy:.6g} >= threshold {threshold:.6g} "
            f"(channel asymptote {channel.asymptotic_energy:.6g}, "
            f"{n_bound} bound levels available)"
        )
    psi = np.zeros((system.n_channels, system.grid.n_points), dtype=complex)
    psi[idx] = solution.states[level_index]
    return WavePacket(
        grid=system.grid,
        labels=system.labels,
        kinds=system.kinds,
        psi=psi,
        time=0.0,
        ledger=FluxLedger.zeros(system.labels),
    )
