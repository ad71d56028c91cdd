"""Domain types and closed-form calculators for a levitated micro-oscillator.

Conventions
-----------
* ``gamma`` is always the angular energy-damping rate in 1/s, i.e. the
  coefficient of the velocity term in ``x'' + gamma x' + w0^2 x + eps x^3 = F/m``.
  Human-facing numbers are quoted as ``gamma / 2pi`` in Hz.
* Power spectral densities are one-sided (integrate over f >= 0 in Hz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .constants import G_STD, HBAR, HELIUM_MASS, K_B, MU_B, MU_P, TWO_PI

DEFAULT_DENSITY = 1100.0  # kg/m^3, reproduces 540 pg at 9.8 um
DEFAULT_T2 = 1.0  # s


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValueError(msg)


@dataclass(frozen=True)
class Sphere:
    diameter: float
    density: float = DEFAULT_DENSITY

    def __post_init__(self):
        _require(self.diameter > 0, f"diameter must be > 0, got {self.diameter!r}")
        _require(self.density > 0, f"density must be > 0, got {self.density!r}")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    @property
    def mass(self) -> float:
        return mass_of(self)


@dataclass(frozen=True)
class OscillatorMode:
    """One trap mode treated as an independent 1D oscillator.

    Parameters
    ----------
    f0 : float
        Resonance frequency in Hz.
    gamma : float
        Angular energy-damping rate in 1/s.
    duffing_epsilon : float
        Cubic stiffness per unit mass, 1/(m^2 s^2).
    """

    f0: float
    gamma: float = 0.0
    duffing_epsilon: float = 0.0

    def __post_init__(self):
        _require(self.f0 > 0, f"f0 must be > 0, got {self.f0!r}")
        _require(self.gamma >= 0, f"gamma must be >= 0, got {self.gamma!r}")

    @classmethod
    def from_linewidth(cls, f0: float, gamma_over_2pi: float, duffing_epsilon: float = 0.0):
        """Build a mode from ``gamma/2pi`` in Hz, the form quoted in tables."""
        return cls(f0, TWO_PI * gamma_over_2pi, duffing_epsilon)

    @property
    def omega0(self) -> float:
        return TWO_PI * self.f0

    @property
    def gamma_over_2pi(self) -> float:
        return self.gamma / TWO_PI

    @property
    def Q(self) -> float:
        if self.gamma == 0:
            return math.inf
        return self.omega0 / self.gamma

    @property
    def ringdown_time(self) -> float:
        """Energy e-folding time 1/gamma in s."""
        if self.gamma == 0:
            return math.inf
        return 1.0 / self.gamma


@dataclass(frozen=True)
class Environment:
    temperature: float
    gas_pressure: float = 0.0
    gas_molecular_mass: float = HELIUM_MASS

    def __post_init__(self):
        _require(self.temperature >= 0, f"temperature must be >= 0, got {self.temperature!r}")
        _require(self.gas_pressure >= 0, f"gas_pressure must be >= 0, got {self.gas_pressure!r}")
        _require(self.gas_molecular_mass > 0, "gas_molecular_mass must be > 0")


@dataclass(frozen=True)
class SpinMechanicsSetup:
    magnetic_gradient: float
    mode: OscillatorMode
    mass: float
    temperature: float
    spin_moment: float = MU_B
    spin_T2: float = DEFAULT_T2

    def __post_init__(self):
        # zero G or T2 are allowed as limiting cases of the figures of merit
        _require(self.magnetic_gradient >= 0, "magnetic_gradient must be >= 0")
        _require(self.spin_moment > 0, "spin_moment must be > 0")
        _require(self.spin_T2 >= 0, "spin_T2 must be >= 0")
        _require(self.mass > 0, "mass must be > 0")
        _require(self.temperature > 0, "temperature must be > 0")


class NoiseDensity(NamedTuple):
    psd: float
    asd: float


class AccelNoiseDensity(NamedTuple):
    psd: float
    asd: float
    asd_g: float


class CoherenceCriterion(NamedTuple):
    omega0_Q_over_2pi: float
    kT_over_2pi_hbar: float
    satisfied: bool


class ThermalDecoherence(NamedTuple):
    n_bar: float
    gamma_th: float


class SpinCoupling(NamedTuple):
    lam: float
    lambda_over_2pi: float


def mass_of(sphere: Sphere) -> float:
    return sphere.density * (math.pi / 6.0) * sphere.diameter**3


def force_noise_density(mass: float, gamma: float, T: float) -> NoiseDensity:
    """Thermal force noise, one-sided: ``S_FF = 4 m gamma k_B T`` in N^2/Hz."""
    _require(mass > 0 and gamma >= 0 and T >= 0, "need mass > 0, gamma >= 0, T >= 0")
    s = 4.0 * mass * gamma * K_B * T
    return NoiseDensity(s, math.sqrt(s))


def accel_noise_density(mass: float, gamma: float, T: float) -> AccelNoiseDensity:
    """One-sided acceleration noise ``S_aa = 4 gamma k_B T / m``.

    ``asd_g`` is the amplitude density in units of g = 9.8 m/s^2 per sqrt(Hz).
    """
    _require(mass > 0 and gamma >= 0 and T >= 0, "need mass > 0, gamma >= 0, T >= 0")
    s = 4.0 * gamma * K_B * T / mass
    asd = math.sqrt(s)
    return AccelNoiseDensity(s, asd, asd / G_STD)


def mean_gas_speed(env: Environment) -> float:
    """Maxwell-Boltzmann mean speed sqrt(8 k_B T / (pi m_gas))."""
    _require(env.temperature > 0, "mean gas speed needs temperature > 0")
    return math.sqrt(8.0 * K_B * env.temperature / (math.pi * env.gas_molecular_mass))


def gas_damping(sphere: Sphere, env: Environment) -> float:
    """Free-molecular gas damping rate ``(16/pi) P / (v R rho)`` in 1/s."""
    v = mean_gas_speed(env)
    return (16.0 / math.pi) * env.gas_pressure / (v * sphere.radius * sphere.density)


def thermal_amplitude_sq(mass: float, f0: float, T: float) -> float:
    """Equipartition variance <x^2> = k_B T / (m w0^2) in m^2."""
    return K_B * T / (mass * (TWO_PI * f0) ** 2)


def coherence_criterion(mode: OscillatorMode, T: float) -> CoherenceCriterion:
    _require(mode.gamma > 0, "coherence criterion needs gamma > 0")
    _require(T >= 0, "T must be >= 0")
    lhs = mode.omega0**2 / mode.gamma
    rhs = K_B * T / HBAR
    return CoherenceCriterion(lhs / TWO_PI, rhs / TWO_PI, bool(lhs > rhs))


def thermal_decoherence(mode: OscillatorMode, T: float) -> ThermalDecoherence:
    _require(T > 0, "T must be > 0")
    n_bar = K_B * T / (HBAR * mode.omega0)
    return ThermalDecoherence(n_bar, n_bar * mode.gamma)


def zero_point_motion(mass: float, f0: float) -> float:
    _require(mass > 0 and f0 > 0, "need mass > 0 and f0 > 0")
    return math.sqrt(HBAR / (mass * TWO_PI * f0))


def spin_coupling(setup: SpinMechanicsSetup) -> SpinCoupling:
    x_zp = zero_point_motion(setup.mass, setup.mode.f0)
    lam = setup.magnetic_gradient * x_zp * setup.spin_moment / HBAR
    return SpinCoupling(lam, lam / TWO_PI)


def cooperativity(setup: SpinMechanicsSetup) -> float:
    _require(setup.mode.gamma > 0, "cooperativity needs gamma > 0 (finite Q)")
    lam = spin_coupling(setup).lam
    return lam**2 * setup.spin_T2 * setup.mode.Q * HBAR / (K_B * setup.temperature)


def spin_force(G: float, moment: float = MU_B) -> float:
    """Force on a single spin moment in a field gradient, G * moment."""
    _require(G > 0 and moment > 0, "need G > 0 and moment > 0")
    return G * moment


def detectable_mass_threshold(G: float, moment: float, gamma: float, T: float) -> float:
    """Mass below which sqrt(S_FF) drops under the single-spin force.

    Direct inversion of ``sqrt(4 m gamma k_B T) = G * moment`` with a 1 Hz
    bandwidth and unit SNR.
    """
    _require(gamma > 0 and T > 0, "need gamma > 0 and T > 0")
    return spin_force(G, moment) ** 2 / (4.0 * gamma * K_B * T)


SPIN_MOMENTS = {"electron": MU_B, "proton": MU_P}
