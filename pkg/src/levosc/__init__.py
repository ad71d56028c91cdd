"""Simulation and estimation toolkit for a levitated micro-oscillator."""

__version__ = "0.1.0"

from .constants import G_STD, HBAR, HELIUM_MASS, K_B, MU_B, MU_P  # noqa: E402
from .physics import (  # noqa: E402
    Environment,
    OscillatorMode,
    Sphere,
    SpinMechanicsSetup,
    accel_noise_density,
    coherence_criterion,
    cooperativity,
    detectable_mass_threshold,
    force_noise_density,
    gas_damping,
    mass_of,
    mean_gas_speed,
    spin_coupling,
    spin_force,
    thermal_amplitude_sq,
    thermal_decoherence,
    zero_point_motion,
)
from .timeseries import TimeSeries  # noqa: E402
from .lockin import Quadratures, lockin_demodulate  # noqa: E402
from .langevin import (  # noqa: E402
    FeedbackConfig,
    ProtocolTimeout,
    SimConfig,
    SimulationError,
    cold_damp,
    measure,
    run_protocol,
    simulate,
)
from .estimation import (  # noqa: E402
    DecayFit,
    EnvelopeSeries,
    EstimationError,
    diameter_from_damping,
    energy_autocorrelation,
    envelope,
    fit_decay,
    psd_linewidth,
)
from .isolation import (  # noqa: E402
    CRYOSTAT_STAGES,
    IsolationStage,
    chain_isolation_db,
    residual_vibration_psd,
    stage_isolation_db,
)
from .scenario import ConfigError, Scenario, load_scenario  # noqa: E402
