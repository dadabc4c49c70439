"""Instantaneous repeated-measurement models.

Two measurement kinds are implemented, applied at intervals tau during a
propagation:

* depletion — projective removal.  ``remove_targets`` zeroes the target
  channels and books the removed norm as depleted; ``keep_initial_projection``
  replaces the component within the initial channel's manifold (channels of
  the same kind) by <psi0|psi> psi0 and books the discarded norm, leaving the
  other channels untouched.
* randomization — every grid point of every target channel is multiplied by
  exp(i theta) with theta drawn uniformly on [0, 2pi), independently per
  point.  Channel norms are preserved; only coherence with the rest of the
  packet is destroyed.

Random phases come from numpy's Philox counter-based generator (4x64, 10
rounds) with key = (seed, 0) and counter = (0, 0, measurement_index,
channel_index), so every (seed, measurement, channel) substream is
independent, platform-stable, and reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagate import WavePacket

DEPLETION = "depletion"
RANDOMIZATION = "randomization"
REMOVE_TARGETS = "remove_targets"
KEEP_INITIAL_PROJECTION = "keep_initial_projection"


@dataclass(frozen=True)
class MeasurementSchedule:
    """What to measure, how, and how often.

    tau is the measurement interval (atomic time).  targets name the measured
    channels for remove_targets and randomization; keep_initial_projection
    derives its manifold from the initial state instead and ignores targets.
    """

    kind: str
    tau: float
    mode: str = REMOVE_TARGETS
    targets: tuple[str, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (DEPLETION, RANDOMIZATION):
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if self.mode not in (REMOVE_TARGETS, KEEP_INITIAL_PROJECTION):
            raise ValueError(f"unknown depletion mode {self.mode!r}")
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")
        needs_targets = self.kind == RANDOMIZATION or (
            self.kind == DEPLETION and self.mode == REMOVE_TARGETS
        )
        if needs_targets and not self.targets:
            raise ValueError(f"{self.kind}/{self.mode} requires target channels")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


def phase_draw(seed: int, measurement_index: int, channel_index: int,
               n: int) -> np.ndarray:
    """Uniform [0, 2pi) phases for one (measurement, channel) substream."""
    bitgen = np.random.Philox(
        key=np.array([seed, 0], dtype=np.uint64),
        counter=np.array([0, 0, measurement_index, channel_index], dtype=np.uint64),
    )
    return np.random.Generator(bitgen).random(n) * (2.0 * np.pi)


def _target_indices(labels, targets) -> list[int]:
    indices = []
    for label in targets:
        if label not in labels:
            raise ValueError(f"unknown target channel {label!r}")
        indices.append(labels.index(label))
    return indices


def _manifold_indices(initial_state: WavePacket) -> tuple[list[int], int]:
    """Channels sharing the initial channel's kind, plus the initial index."""
    norms = initial_state.channel_norms()
    init_idx = int(np.argmax(norms))
    kind = initial_state.kinds[init_idx]
    manifold = [i for i, k in enumerate(initial_state.kinds) if k == kind]
    return manifold, init_idx


def _deplete_remove(psi: np.ndarray, depleted: np.ndarray, indices,
                    spacing: float) -> None:
    for i in indices:
        removed = float(np.sum(np.abs(psi[i]) ** 2)) * spacing
        psi[i] = 0.0
        depleted[i] += removed


def _deplete_project(psi: np.ndarray, depleted: np.ndarray, psi0: np.ndarray,
                     manifold, spacing: float) -> None:
    # psi0 lives entirely inside the manifold, so the full overlap equals the
    # manifold-restricted one.
    amp = np.vdot(psi0, psi) * spacing
    for i in manifold:
        before = float(np.sum(np.abs(psi[i]) ** 2)) * spacing
        psi[i] = amp * psi0[i]
        after = float(np.sum(np.abs(psi[i]) ** 2)) * spacing
        depleted[i] += before - after


def _randomize(psi: np.ndarray, indices, seed: int,
               measurement_index: int) -> None:
    n = psi.shape[1]
    for i in indices:
        theta = phase_draw(seed, measurement_index, i, n)
        psi[i] *= np.exp(1j * theta)


def compile_schedule(schedule: MeasurementSchedule, initial_state: WavePacket,
                     system=None):
    """Bind a schedule to a packet layout; returns f(psi, depleted, index)."""
    labels = initial_state.labels
    spacing = initial_state.grid.spacing
    if schedule.kind == RANDOMIZATION:
        indices = _target_indices(labels, schedule.targets)
        seed = schedule.seed

        def apply(psi, depleted, index):
            _randomize(psi, indices, seed, index)

        return apply
    if schedule.mode == REMOVE_TARGETS:
        indices = _target_indices(labels, schedule.targets)

        def apply(psi, depleted, index):
            _deplete_remove(psi, depleted, indices, spacing)

        return apply
    manifold, _ = _manifold_indices(initial_state)
    psi0 = initial_state.psi.copy()

    def apply(psi, depleted, index):
        _deplete_project(psi, depleted, psi0, manifold, spacing)

    return apply


def apply_depletion(wp: WavePacket, schedule: MeasurementSchedule,
                    initial_state: WavePacket | None = None) -> WavePacket:
    """One depletion measurement; returns a new packet with the removed norm
    booked into ledger.depleted per channel."""
    if schedule.kind != DEPLETION:
        raise ValueError("schedule kind is not depletion")
    out = wp.copy()
    depleted = np.zeros(len(wp.labels))
    if schedule.mode == REMOVE_TARGETS:
        indices = _target_indices(wp.labels, schedule.targets)
        _deplete_remove(out.psi, depleted, indices, wp.grid.spacing)
    else:
        if initial_state is None:
            raise ValueError("keep_initial_projection requires the t=0 state")
        manifold, _ = _manifold_indices(initial_state)
        _deplete_project(out.psi, depleted, initial_state.psi, manifold,
                         wp.grid.spacing)
    for i, label in enumerate(wp.labels):
        out.ledger.depleted[label] += float(depleted[i])
    return out


def apply_randomization(wp: WavePacket, schedule: MeasurementSchedule,
                        measurement_index: int = 0) -> WavePacket:
    """One randomization measurement; channel norms are preserved and the
    ledger is untouched."""
    if schedule.kind != RANDOMIZATION:
        raise ValueError("schedule kind is not randomization")
    out = wp.copy()
    indices = _target_indices(wp.labels, schedule.targets)
    _randomize(out.psi, indices, schedule.seed, measurement_index)
    return out
