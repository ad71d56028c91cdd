import math

import pytest
import scipy.constants as sc
from hypothesis import given, settings
from hypothesis import strategies as st

from levosc import constants
from levosc.physics import (
    SPIN_MOMENTS,
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

GAMMA_1 = 2 * math.pi * 0.59e-6  # 3.707e-6 1/s


def test_constants_match_codata():
    assert constants.K_B == sc.k
    assert constants.HBAR == pytest.approx(sc.hbar, rel=1e-9)  # scipy derives it from h, we store the rounded value
    assert constants.MU_B == pytest.approx(sc.physical_constants["Bohr magneton"][0], rel=1e-12)
    assert constants.MU_P == pytest.approx(sc.physical_constants["proton mag. mom."][0], rel=1e-12)
    assert constants.AMU == pytest.approx(sc.physical_constants["atomic mass constant"][0], rel=1e-12)
    assert constants.G_STD == 9.8


def test_sphere_mass():
    m = mass_of(Sphere(9.8e-6, 1100))
    assert m == pytest.approx(5.421e-13, rel=1e-3)
    assert Sphere(9.8e-6).mass == m
    with pytest.raises(ValueError):
        Sphere(-1e-6)
    with pytest.raises(ValueError):
        Sphere(1e-6, 0)


def test_mode_q_and_ringdown_time():
    m = OscillatorMode.from_linewidth(11.7, 0.59e-6)
    assert m.Q == pytest.approx(1.983e7, rel=1e-3)
    assert m.ringdown_time == pytest.approx(2.698e5, rel=1e-3)
    assert OscillatorMode(1.0).Q == math.inf
    with pytest.raises(ValueError):
        OscillatorMode(0.0)
    with pytest.raises(ValueError):
        OscillatorMode(1.0, -1.0)


def test_force_noise_mode1():
    m = mass_of(Sphere(9.8e-6))
    nd = force_noise_density(m, GAMMA_1, 3.0)
    assert nd.asd == pytest.approx(1.824e-20, rel=2e-3)
    assert nd.psd == pytest.approx(nd.asd**2)
    assert force_noise_density(m, 0.0, 3.0).psd == 0.0


def test_force_noise_temperature_scaling():
    a = force_noise_density(1e-12, 1e-3, 3.0).asd
    b = force_noise_density(1e-12, 1e-3, 0.01).asd
    assert a / b == pytest.approx(math.sqrt(300))


def test_accel_noise_anchor():
    a = accel_noise_density(1e-9, GAMMA_1, 3.0)
    assert a.asd_g == pytest.approx(8.0e-11, rel=0.01)
    assert a.asd_g < 1e-10
    assert a.asd == pytest.approx(a.asd_g * 9.8)


def test_gas_damping_helium():
    env = Environment(3.0, 2e-4)
    assert mean_gas_speed(env) == pytest.approx(125.97, rel=1e-4)
    assert gas_damping(Sphere(9.8e-6), env) == pytest.approx(1.50e-3, rel=5e-3)
    assert gas_damping(Sphere(9.8e-6), Environment(3.0, 0.0)) == 0.0


def test_environment_validation():
    with pytest.raises(ValueError):
        Environment(-1.0)
    with pytest.raises(ValueError):
        Environment(3.0, -1.0)
    with pytest.raises(ValueError):
        mean_gas_speed(Environment(0.0, 1e-4))


def test_thermal_amplitude_mode1():
    m = mass_of(Sphere(9.8e-6))
    assert thermal_amplitude_sq(m, 11.7, 3.0) == pytest.approx(1.414e-14, rel=1e-3)


def test_coherence_criterion_projected_device():
    c = coherence_criterion(OscillatorMode(100.0, GAMMA_1), 0.01)
    assert c.omega0_Q_over_2pi == pytest.approx(1.7e10, rel=0.01)
    assert c.kT_over_2pi_hbar == pytest.approx(2.08e8, rel=0.01)
    assert c.satisfied


def test_thermal_decoherence():
    mode = OscillatorMode(100.0, GAMMA_1)
    th = thermal_decoherence(mode, 0.01)
    assert th.n_bar == pytest.approx(2.084e6, rel=1e-3)
    assert th.gamma_th == pytest.approx(7.72, rel=1e-3)
    th2 = thermal_decoherence(mode, 0.02)
    assert th2.n_bar == pytest.approx(2 * th.n_bar)
    assert th2.gamma_th == pytest.approx(2 * th.gamma_th)


def test_zero_point_motion():
    assert zero_point_motion(1e-16, 100.0) == pytest.approx(4.10e-11, rel=1e-3)
    assert zero_point_motion(5.42e-13, 11.7) == pytest.approx(1.62e-12, rel=1e-2)
    assert zero_point_motion(4e-16, 100.0) == pytest.approx(0.5 * zero_point_motion(1e-16, 100.0))


def _setup(**kw):
    base = dict(magnetic_gradient=1e4, mode=OscillatorMode(100.0, GAMMA_1), mass=1e-16, temperature=0.01)
    base.update(kw)
    return SpinMechanicsSetup(**base)


def test_spin_coupling_and_cooperativity():
    s = _setup()
    lam = spin_coupling(s)
    assert lam.lambda_over_2pi == pytest.approx(5.73e3, rel=2e-3)
    assert lam.lam == pytest.approx(3.60e4, rel=2e-3)
    assert cooperativity(s) == pytest.approx(1.68e8, rel=5e-3)
    assert spin_coupling(_setup(magnetic_gradient=0.0)).lam == 0.0
    assert cooperativity(_setup(spin_T2=0.0)) == 0.0
    assert cooperativity(_setup(temperature=0.02)) == pytest.approx(0.5 * cooperativity(s))
    ratio = spin_coupling(_setup(spin_moment=SPIN_MOMENTS["proton"])).lam / lam.lam
    assert ratio == pytest.approx(1.521e-3, rel=1e-3)


def test_spin_force_and_thresholds():
    assert spin_force(1e4) == pytest.approx(9.274e-20, rel=1e-4)
    assert spin_force(1e4, SPIN_MOMENTS["proton"]) == pytest.approx(1.4106e-22, rel=1e-4)
    m_e = detectable_mass_threshold(1e4, SPIN_MOMENTS["electron"], GAMMA_1, 3.0)
    m_p = detectable_mass_threshold(1e4, SPIN_MOMENTS["proton"], GAMMA_1, 3.0)
    assert m_e == pytest.approx(1.40e-11, rel=5e-3)
    assert m_p * 1e3 == pytest.approx(3.24e-14, rel=5e-3)  # grams
    with pytest.raises(ValueError):
        spin_force(0.0)


def test_spin_setup_validation():
    with pytest.raises(ValueError):
        _setup(mass=0.0)
    with pytest.raises(ValueError):
        _setup(temperature=0.0)


# -- properties -----------------------------------------------------------------

pos = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False, allow_infinity=False)


@given(d=st.floats(1e-7, 1e-4), p1=st.floats(1e-8, 1.0), p2=st.floats(1e-8, 1.0), T=pos)
def test_gas_damping_monotone_in_pressure(d, p1, p2, T):
    lo, hi = sorted((p1, p2))
    g_lo = gas_damping(Sphere(d), Environment(T, lo))
    g_hi = gas_damping(Sphere(d), Environment(T, hi))
    assert g_lo <= g_hi
    assert g_hi / g_lo == pytest.approx(hi / lo, rel=1e-9)


@given(d1=st.floats(1e-7, 1e-4), d2=st.floats(1e-7, 1e-4))
def test_gas_damping_decreases_with_size(d1, d2):
    env = Environment(3.0, 1e-4)
    small, big = sorted((d1, d2))
    assert gas_damping(Sphere(big), env) <= gas_damping(Sphere(small), env)


@given(f0=st.floats(0.1, 1e4), g=st.floats(1e-9, 1e2))
def test_q_times_linewidth_is_f0(f0, g):
    mode = OscillatorMode.from_linewidth(f0, g)
    assert mode.Q * mode.gamma_over_2pi == pytest.approx(f0, rel=1e-12)


@settings(max_examples=50)
@given(G=st.floats(1.0, 1e6), g=st.floats(1e-9, 1.0), T=st.floats(1e-3, 300.0),
       species=st.sampled_from(sorted(SPIN_MOMENTS)))
def test_threshold_round_trip(G, g, T, species):
    moment = SPIN_MOMENTS[species]
    m = detectable_mass_threshold(G, moment, g, T)
    assert force_noise_density(m, g, T).psd == pytest.approx(spin_force(G, moment) ** 2, rel=1e-9)


@settings(max_examples=50)
@given(f0=st.floats(1.0, 1e3), g=st.floats(1e-8, 1e-2), T=st.floats(1e-3, 10.0), a=st.floats(0.1, 10.0))
def test_coherence_depends_only_on_ratio(f0, g, T, a):
    base = coherence_criterion(OscillatorMode(f0, g), T)
    scaled = coherence_criterion(OscillatorMode(f0, g / a), T * a)
    ratio = base.omega0_Q_over_2pi / base.kT_over_2pi_hbar
    if abs(ratio - 1.0) > 1e-6:
        assert base.satisfied == scaled.satisfied
    assert scaled.omega0_Q_over_2pi / scaled.kT_over_2pi_hbar == pytest.approx(ratio, rel=1e-9)


@given(d=st.floats(1e-7, 1e-4), r1=st.floats(100.0, 2e4), r2=st.floats(100.0, 2e4),
       T1=st.floats(0.1, 300.0), T2=st.floats(0.1, 300.0))
def test_gas_damping_decreases_with_density_and_gas_speed(d, r1, r2, T1, T2):
    env = Environment(3.0, 1e-4)
    lo, hi = sorted((r1, r2))
    if hi > lo:
        assert gas_damping(Sphere(d, hi), env) < gas_damping(Sphere(d, lo), env)
    # mean speed grows with temperature at fixed pressure
    cold, warm = sorted((T1, T2))
    if warm > cold:
        assert mean_gas_speed(Environment(warm, 1e-4)) > mean_gas_speed(Environment(cold, 1e-4))
        assert gas_damping(Sphere(d), Environment(warm, 1e-4)) < gas_damping(Sphere(d), Environment(cold, 1e-4))


def _exponent(fn, x, k=2.0):
    return math.log(fn(k * x) / fn(x)) / math.log(k)


# units audit: every output scales with its inputs as its dimensions require
@pytest.mark.parametrize("fn,x,power", [
    # sqrt S_FF [N/rtHz] = sqrt(4 m gamma k_B T): kg^1/2 s^-1/2 J^1/2
    (lambda m: force_noise_density(m, 1e-3, 3.0).asd, 1e-12, 0.5),
    (lambda g: force_noise_density(1e-12, g, 3.0).asd, 1e-3, 0.5),
    (lambda T: force_noise_density(1e-12, 1e-3, T).asd, 3.0, 0.5),
    # sqrt S_aa = sqrt S_FF / m
    (lambda m: accel_noise_density(m, 1e-3, 3.0).asd, 1e-12, -0.5),
    # <x^2> = k_B T / (m w0^2)
    (lambda m: thermal_amplitude_sq(m, 10.0, 3.0), 1e-12, -1.0),
    (lambda f: thermal_amplitude_sq(1e-12, f, 3.0), 10.0, -2.0),
    # x_zpl = sqrt(hbar / (m w0))
    (lambda m: zero_point_motion(m, 100.0), 1e-16, -0.5),
    (lambda f: zero_point_motion(1e-16, f), 100.0, -0.5),
    # F = G mu
    (lambda G: spin_force(G), 1e4, 1.0),
    # m* = (G mu)^2 / (4 gamma k_B T)
    (lambda G: detectable_mass_threshold(G, SPIN_MOMENTS["electron"], 1e-3, 3.0), 1e4, 2.0),
    (lambda g: detectable_mass_threshold(1e4, SPIN_MOMENTS["electron"], g, 3.0), 1e-3, -1.0),
    # gamma_gas ~ P / (v R rho), v ~ sqrt(T)
    (lambda P: gas_damping(Sphere(1e-5), Environment(3.0, P)), 1e-4, 1.0),
    (lambda d: gas_damping(Sphere(d), Environment(3.0, 1e-4)), 1e-5, -1.0),
    (lambda T: gas_damping(Sphere(1e-5), Environment(T, 1e-4)), 3.0, -0.5),
    # n_bar = k_B T / (hbar w0)
    (lambda T: thermal_decoherence(OscillatorMode(100.0, 1e-3), T).n_bar, 0.01, 1.0),
    (lambda f: thermal_decoherence(OscillatorMode(f, 1e-3), 0.01).n_bar, 100.0, -1.0),
])
def test_units_audit_scaling(fn, x, power):
    assert _exponent(fn, x) == pytest.approx(power, abs=1e-9)


def test_threshold_scales_inversely_with_gamma():
    m1 = detectable_mass_threshold(1e4, SPIN_MOMENTS["electron"], GAMMA_1, 3.0)
    m4 = detectable_mass_threshold(1e4, SPIN_MOMENTS["electron"], 4 * GAMMA_1, 3.0)
    assert m1 / m4 == pytest.approx(4.0, rel=1e-12)
