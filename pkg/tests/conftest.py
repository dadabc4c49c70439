import json

import numpy as np
import pytest

from zenofrag import (
    ChannelSpec,
    RadialGrid,
    SystemSpec,
    Tabulated,
    WavePacket,
    gaussian_packet,
    initial_quasibound_state,
)
from zenofrag.config import parse_config
from zenofrag.potentials import ExpRepulsive


def preset_config(name, **overrides):
    document = {"system": {"preset": name}}
    document.update(overrides)
    return parse_config(json.dumps(document))


@pytest.fixture(scope="session")
def vp2_config():
    return preset_config("vp2_default")


@pytest.fixture(scope="session")
def vp2_system(vp2_config):
    return vp2_config.build_system()


@pytest.fixture(scope="session")
def vp2_psi0(vp2_system):
    return initial_quasibound_state(vp2_system)


@pytest.fixture(scope="session")
def ep3_config():
    return preset_config("ep3_default")


@pytest.fixture(scope="session")
def ep3_system(ep3_config):
    return ep3_config.build_system()


def free_particle_system(n=1024, r_min=0.0, r_max=40.0, mass=2000.0):
    grid = RadialGrid(n, r_min, r_max)
    channel = ChannelSpec("a", "vibrational", 0.0, Tabulated(np.zeros(n)))
    return SystemSpec(grid=grid, reduced_mass=mass, channels=(channel,),
                      couplings=(), initial_channel="a")


def rabi_system(n=256, g=1e-3, mass=1e15):
    grid = RadialGrid(n, 0.0, 20.0)
    zero = Tabulated(np.zeros(n))
    channels = (ChannelSpec("one", "vibrational", 0.0, zero),
                ChannelSpec("two", "vibrational", 0.0, zero))
    coupling = (("one", "two", ExpRepulsive(g, 0.0)),)
    return SystemSpec(grid=grid, reduced_mass=mass, channels=channels,
                      couplings=coupling, initial_channel="one")


def packet_in_channel(system, channel=0, center=10.0, width=1.0, momentum=0.0):
    n_chan = system.n_channels
    psi = np.zeros((n_chan, system.grid.n_points), dtype=complex)
    psi[channel] = gaussian_packet(system.grid, center, width, momentum)
    return WavePacket(grid=system.grid, labels=system.labels,
                      kinds=system.kinds, psi=psi)
