"""
Noise budget of a levitated force sensor
========================================

Thermal force and acceleration noise versus particle mass, the vibration
isolation of the cryostat suspension, and the spin-mechanics figures of
merit for a smaller particle on a stiffer mode.
"""

import math

import numpy as np

from levosc import (
    CRYOSTAT_STAGES,
    Environment,
    OscillatorMode,
    Sphere,
    SpinMechanicsSetup,
    accel_noise_density,
    chain_isolation_db,
    diameter_from_damping,
    force_noise_density,
    gas_damping,
    stage_isolation_db,
)
from levosc.cli import spin_report
from levosc.physics import SPIN_MOMENTS, detectable_mass_threshold, spin_force

gamma = 2 * math.pi * 0.59e-6

# force and acceleration noise along the mass axis
print("mass [kg]   sqrt S_FF [N/rtHz] 3 K / 10 mK    sqrt S_aa [g/rtHz] 3 K")
for mass in np.logspace(-15, -6, 4):
    hot = force_noise_density(mass, gamma, 3.0).asd
    cold = force_noise_density(mass, gamma, 0.01).asd
    print(f"{mass:9.1e}   {hot:.2e} / {cold:.2e}          {accel_noise_density(mass, gamma, 3.0).asd_g:.2e}")

for species in ("electron", "proton"):
    F = spin_force(1e4, SPIN_MOMENTS[species])
    m_star = detectable_mass_threshold(1e4, SPIN_MOMENTS[species], gamma, 3.0)
    print(f"single {species} spin at 1e4 T/m: F = {F:.3g} N, resolvable in 1 s below m = {m_star:.2g} kg")

# residual gas damping and the size it implies
env = Environment(3.0, 2e-4)
g_he = gas_damping(Sphere(9.8e-6), env)
print(f"helium damping at 2e-4 Pa: {g_he:.3g} 1/s -> diameter {diameter_from_damping(g_he, env, 1100) * 1e6:.2f} um")

# suspension
for i, st in enumerate(CRYOSTAT_STAGES, 1):
    print(f"stage {i}: {st.load_mass} kg on a {st.char_frequency} Hz spring -> "
          f"{stage_isolation_db(st, 8.0):.1f} dB at 8 Hz")
print(f"total: {chain_isolation_db(CRYOSTAT_STAGES, 8.0):.1f} dB")

# spin mechanics with a 1e-16 kg particle on a 100 Hz mode at 10 mK
setup = SpinMechanicsSetup(1e4, OscillatorMode.from_linewidth(100.0, 0.59e-6), 1e-16, 0.01)
for key, value in spin_report(setup):
    print(f"  {key:28s} {value:.4g}" if isinstance(value, float) else f"  {key:28s} {value}")
