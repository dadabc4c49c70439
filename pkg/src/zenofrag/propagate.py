"""Coupled-channel split-operator propagation with absorbing boundaries.

One step advances exp(-i V dt/2) exp(-i T dt) exp(-i V dt/2): the potential
half steps apply the per-point matrix exponential of the channel coupling
matrix (via batched symmetric diagonalization), the kinetic step is a
momentum-space phase.  The complex absorbing potential (CAP) is applied as a
separate damping factor after each step and the removed norm is booked per
channel, so live norm + absorbed + depleted stays at 1 to round-off.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np

from .grids import RadialGrid


class PropagationError(RuntimeError):
    """Raised when the propagated field stops being finite."""


@dataclass
class FluxLedger:
    """Per-channel probability removed by the CAP (absorbed) and by
    measurements (depleted).  Entries only ever grow."""

    absorbed: dict[str, float]
    depleted: dict[str, float]

    @classmethod
    def zeros(cls, labels) -> "FluxLedger":
        return cls(
            absorbed={label: 0.0 for label in labels},
            depleted={label: 0.0 for label in labels},
        )

    def copy(self) -> "FluxLedger":
        return FluxLedger(absorbed=dict(self.absorbed), depleted=dict(self.depleted))

    def total(self) -> float:
        return sum(self.absorbed.values()) + sum(self.depleted.values())


@dataclass
class WavePacket:
    """Multi-channel complex field on a grid, with a time stamp and the flux
    ledger of everything removed from it so far."""

    grid: RadialGrid
    labels: tuple[str, ...]
    kinds: tuple[str, ...]
    psi: np.ndarray
    time: float = 0.0
    ledger: FluxLedger = None

    def __post_init__(self):
        # contiguous layout keeps numpy reductions bit-reproducible across copies
        self.psi = np.ascontiguousarray(self.psi, dtype=complex)
        if self.psi.shape != (len(self.labels), self.grid.n_points):
            raise ValueError(
                f"psi shape {self.psi.shape} does not match "
                f"({len(self.labels)}, {self.grid.n_points})"
            )
        if len(self.kinds) != len(self.labels):
            raise ValueError("kinds and labels length mismatch")
        if self.ledger is None:
            self.ledger = FluxLedger.zeros(self.labels)

    def channel_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.psi) ** 2, axis=1) * self.grid.spacing

    def norm(self) -> float:
        return float(np.sum(np.abs(self.psi) ** 2) * self.grid.spacing)

    def populations(self) -> dict[str, float]:
        return dict(zip(self.labels, self.channel_norms().tolist()))

    def accounted_total(self) -> float:
        return self.norm() + self.ledger.total()

    def copy(self) -> "WavePacket":
        return WavePacket(
            grid=self.grid,
            labels=self.labels,
            kinds=self.kinds,
            psi=self.psi.copy(),
            time=self.time,
            ledger=self.ledger.copy(),
        )


def channel_populations(wp: WavePacket) -> dict[str, float]:
    """p_alpha = ||psi_alpha||^2 * spacing for each channel."""
    return wp.populations()


@dataclass(frozen=True)
class CapConfig:
    """Monomial absorbing potential: strength * ((R - r_start)/(r_max - r_start))^order
    for R beyond r_start, zero elsewhere."""

    r_start: float
    strength: float
    order: int = 3

    def __post_init__(self):
        if self.strength < 0.0:
            raise ValueError("CAP strength must be non-negative")
        if self.order < 1:
            raise ValueError("CAP order must be >= 1")


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    t_end: float
    cap: Optional[CapConfig] = None
    sample_stride: int = 1

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must cover at least one step")
        if self.sample_stride < 1:
            raise ValueError("sample_stride must be >= 1")


def cap_profile(grid: RadialGrid, cap: Optional[CapConfig]) -> np.ndarray:
    if cap is None or cap.strength == 0.0:
        return np.zeros(grid.n_points)
    if not grid.r_min < cap.r_start < grid.r_max:
        raise ValueError(
            f"CAP start {cap.r_start} must lie inside ({grid.r_min}, {grid.r_max})"
        )
    r = grid.points
    ramp = np.clip((r - cap.r_start) / (grid.r_max - cap.r_start), 0.0, None)
    return cap.strength * ramp**cap.order


class SplitOperatorPropagator:
    """Cached per-(system, dt, cap) propagation kernels."""

    def __init__(self, system, dt: float, cap: Optional[CapConfig] = None):
        self.system = system
        self.dt = float(dt)
        self.cap = cap
        grid = system.grid
        vmat = system.potential_matrix
        evals, evecs = np.linalg.eigh(vmat)
        phase = np.exp(-0.5j * self.dt * evals)
        # U exp(-i L dt/2) U^T, batched over grid points
        self._half_v = np.einsum("rij,rj,rkj->rik", evecs, phase, evecs)
        self._kin_phase = np.exp(-1j * self.dt * grid.momenta**2 /
                                 (2.0 * system.reduced_mass))
        gamma = cap_profile(grid, cap)
        self._cap_factor = np.exp(-gamma * self.dt) if np.any(gamma > 0.0) else None
        self._spacing = grid.spacing

    def step_inplace(self, psi: np.ndarray, absorbed: np.ndarray) -> np.ndarray:
        """One split-operator step; CAP losses are accumulated into absorbed
        (one entry per channel).  Returns the advanced array."""
        psi = np.einsum("rij,jr->ir", self._half_v, psi)
        psi = np.fft.ifft(self._kin_phase * np.fft.fft(psi, axis=1), axis=1)
        psi = np.einsum("rij,jr->ir", self._half_v, psi)
        if self._cap_factor is not None:
            before = np.einsum("cr,cr->c", psi.real, psi.real)
            before += np.einsum("cr,cr->c", psi.imag, psi.imag)
            psi *= self._cap_factor
            after = np.einsum("cr,cr->c", psi.real, psi.real)
            after += np.einsum("cr,cr->c", psi.imag, psi.imag)
            absorbed += (before - after) * self._spacing
        return psi

    def apply_hamiltonian(self, psi: np.ndarray) -> np.ndarray:
        return apply_hamiltonian(psi, self.system)


@lru_cache(maxsize=8)
def _cached_propagator(system, dt: float, cap: Optional[CapConfig]):
    return SplitOperatorPropagator(system, dt, cap)


def apply_hamiltonian(psi: np.ndarray, system) -> np.ndarray:
    """H psi = T psi + V(R) psi with the full channel coupling matrix."""
    grid = system.grid
    t_k = grid.momenta**2 / (2.0 * system.reduced_mass)
    out = np.fft.ifft(t_k * np.fft.fft(psi, axis=1), axis=1)
    out += np.einsum("rij,jr->ir", system.potential_matrix, psi)
    return out


def energy_expectation(wp: WavePacket, system) -> float:
    """<psi|H|psi> / <psi|psi> (hartree)."""
    h_psi = apply_hamiltonian(wp.psi, system)
    num = np.vdot(wp.psi, h_psi).real * wp.grid.spacing
    den = wp.norm()
    if den == 0.0:
        raise ValueError("cannot take the energy of a null packet")
    return float(num / den)


def split_operator_step(wp: WavePacket, system, dt: float,
                        cap: Optional[CapConfig] = None) -> WavePacket:
    """Advance a wavepacket by one step; pure (returns a new packet)."""
    prop = _cached_propagator(system, float(dt), cap)
    absorbed = np.zeros(len(wp.labels))
    psi = prop.step_inplace(wp.psi.copy(), absorbed)
    if not np.all(np.isfinite(psi)):
        raise PropagationError("non-finite amplitudes after one step")
    out = wp.copy()
    out.psi = psi
    out.time = wp.time + dt
    for i, label in enumerate(wp.labels):
        out.ledger.absorbed[label] += float(absorbed[i])
    return out


@dataclass
class Trajectory:
    """Sampled history of one propagation run."""

    times: np.ndarray
    survival_amps: np.ndarray
    populations: np.ndarray
    absorbed: np.ndarray
    depleted: np.ndarray
    labels: tuple[str, ...]
    psi0: WavePacket
    final: WavePacket
    n_measurements: int = 0
    extras: dict = field(default_factory=dict)

    def live_norms(self) -> np.ndarray:
        return self.populations.sum(axis=1)

    def accounted_totals(self) -> np.ndarray:
        return (self.populations.sum(axis=1) + self.absorbed.sum(axis=1)
                + self.depleted.sum(axis=1))


def write_checkpoint(wp: WavePacket, path, seed: Optional[int] = None,
                     measurement_index: Optional[int] = None) -> Path:
    """Save a packet: one JSON header line (grid, channels, time, ledger and
    the measurement stream state) followed by raw little-endian float64
    amplitudes, interleaved (re, im) per grid point, channel by channel."""
    header = {
        "grid": {"n_points": wp.grid.n_points, "r_min": wp.grid.r_min,
                 "r_max": wp.grid.r_max},
        "labels": list(wp.labels),
        "kinds": list(wp.kinds),
        "time": wp.time,
        "ledger": {"absorbed": wp.ledger.absorbed, "depleted": wp.ledger.depleted},
        "seed_state": {"seed": seed, "measurement_index": measurement_index},
    }
    interleaved = np.empty((len(wp.labels), wp.grid.n_points, 2))
    interleaved[:, :, 0] = wp.psi.real
    interleaved[:, :, 1] = wp.psi.imag
    path = Path(path)
    with open(path, "wb") as handle:
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        handle.write(interleaved.astype("<f8").tobytes())
    return path


def read_checkpoint(path) -> tuple[WavePacket, dict]:
    """Load a checkpoint written by write_checkpoint; returns the packet and
    the stored measurement stream state."""
    with open(path, "rb") as handle:
        header = json.loads(handle.readline().decode("utf-8"))
        raw = handle.read()
    grid = RadialGrid(**header["grid"])
    labels = tuple(header["labels"])
    data = np.frombuffer(raw, dtype="<f8").reshape(len(labels), grid.n_points, 2)
    psi = data[:, :, 0] + 1j * data[:, :, 1]
    ledger = FluxLedger(absorbed=dict(header["ledger"]["absorbed"]),
                        depleted=dict(header["ledger"]["depleted"]))
    wp = WavePacket(grid=grid, labels=labels, kinds=tuple(header["kinds"]),
                    psi=psi, time=float(header["time"]), ledger=ledger)
    return wp, header["seed_state"]


def _steps_per_interval(tau: float, dt: float) -> int:
    ratio = tau / dt
    steps = int(round(ratio))
    if steps < 1 or abs(ratio - steps) > 1e-9 * max(1.0, abs(ratio)):
        raise ValueError(
            f"measurement interval tau = {tau} is not an integer multiple "
            f"of dt = {dt} (ratio {ratio})"
        )
    return steps


def evolve(wp0: WavePacket, system, config: PropagatorConfig,
           schedule=None, observers: Optional[Mapping[str, Callable]] = None) -> Trajectory:
    """Propagate wp0 under the system Hamiltonian with optional repeated
    measurements.

    Measurements are applied immediately after the step that lands on
    t = n*tau; observers are sampled every config.sample_stride steps (plus
    the initial and final instants).  Runs are deterministic given the
    schedule seed.
    """
    from . import measure as _measure  # local import: measure builds on this module

    n_steps = int(round(config.t_end / config.dt))
    if n_steps < 1:
        raise ValueError("t_end shorter than one step")
    prop = _cached_propagator(system, config.dt, config.cap)

    steps_per_tau = None
    measurer = None
    if schedule is not None:
        steps_per_tau = _steps_per_interval(schedule.tau, config.dt)
        measurer = _measure.compile_schedule(schedule, wp0, system)

    labels = wp0.labels
    n_chan = len(labels)
    psi = wp0.psi.copy()
    psi0 = wp0.psi.copy()
    spacing = wp0.grid.spacing
    absorbed = np.array([wp0.ledger.absorbed[l] for l in labels], dtype=float)
    depleted = np.array([wp0.ledger.depleted[l] for l in labels], dtype=float)

    times = []
    amps = []
    pops = []
    abs_snap = []
    dep_snap = []
    extra_names = list(observers) if observers else []
    extras = {name: [] for name in extra_names}

    def record(t: float):
        times.append(t)
        amps.append(np.vdot(psi0, psi) * spacing)
        pops.append((np.abs(psi) ** 2).sum(axis=1) * spacing)
        abs_snap.append(absorbed.copy())
        dep_snap.append(depleted.copy())
        for name in extra_names:
            extras[name].append(observers[name](psi, t))

    record(wp0.time)
    n_meas = 0
    for step in range(1, n_steps + 1):
        psi = prop.step_inplace(psi, absorbed)
        if not np.all(np.isfinite(psi)):
            raise PropagationError(f"non-finite amplitudes at step {step}")
        if steps_per_tau is not None and step % steps_per_tau == 0:
            measurer(psi, depleted, n_meas)
            n_meas += 1
        if step % config.sample_stride == 0 or step == n_steps:
            record(wp0.time + step * config.dt)

    ledger = FluxLedger(
        absorbed=dict(zip(labels, absorbed.tolist())),
        depleted=dict(zip(labels, depleted.tolist())),
    )
    final = WavePacket(grid=wp0.grid, labels=labels, kinds=wp0.kinds, psi=psi,
                       time=wp0.time + n_steps * config.dt, ledger=ledger)
    return Trajectory(
        times=np.array(times),
        survival_amps=np.array(amps),
        populations=np.array(pops).reshape(len(times), n_chan),
        absorbed=np.array(abs_snap).reshape(len(times), n_chan),
        depleted=np.array(dep_snap).reshape(len(times), n_chan),
        labels=labels,
        psi0=wp0.copy(),
        final=final,
        n_measurements=n_meas,
        extras={name: np.array(vals) for name, vals in extras.items()},
    )
