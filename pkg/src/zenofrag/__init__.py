"""zenofrag: measurement-controlled fragmentation dynamics.

Coupled-channel wave-packet propagation on radial grids, repeated-measurement
models (population depletion and phase randomization), and the analysis stack
that turns survival curves into decay widths, spectral densities, and
branching ratios.
"""

__version__ = "0.1.0"

from .analysis import (
    BranchingFit,
    DecayFit,
    DecaySeries,
    SpectralDensity,
    ZenoDiagnostics,
    coupling_second_moment,
    default_fit_window,
    enhancement_factor,
    fit_branching,
    fit_exponential,
    kk_rate,
    measurement_kernel,
    spectral_density,
    survival_series,
    yield_series,
    zeno_diagnostics,
)
from .grids import (
    EigenSolution,
    GridEdgeWarning,
    RadialGrid,
    apply_kinetic,
    build_grid,
    fgh_eigensolve,
    gaussian_packet,
    inner,
    norm,
)
from .measure import (
    MeasurementSchedule,
    apply_depletion,
    apply_randomization,
    phase_draw,
)
from .model import (
    ChannelSpec,
    ElectronicChannelParams,
    EpThreeStateParams,
    MetastableParams,
    SystemSpec,
    VibLadderParams,
    build_system,
    initial_quasibound_state,
    morse_levels,
)
from .potentials import (ExpRepulsive, GaussianBump, MorseWell, SumPotential,
                         Tabulated, load_tabulated)
from .propagate import (
    CapConfig,
    FluxLedger,
    PropagationError,
    PropagatorConfig,
    SplitOperatorPropagator,
    Trajectory,
    WavePacket,
    channel_populations,
    energy_expectation,
    evolve,
    read_checkpoint,
    split_operator_step,
    write_checkpoint,
)
from .units import (
    AMU_TO_ME,
    ANGSTROM_TO_BOHR,
    CM1_TO_HARTREE,
    FS_TO_AU,
    LIFETIME_PS_CM1,
    lifetime_ps_from_gamma_cm1,
)
