"""Fixed-step stochastic integration of a single trap mode.

The simulated equation of motion is

    m x'' + m gamma x' + m w0^2 x + m eps x^3 = F_th(t) + F_ext(t) + F_fb(t)

where ``F_th`` is white with one-sided PSD ``4 m gamma k_B T`` and ``F_ext``
is an optional white force (residual vibration).  Each step draws one normal
deviate per force sample with variance ``S_total / (2 dt)``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, replace
from typing import NamedTuple

import numpy as np

from . import _kernel
from .constants import K_B, TWO_PI
from .physics import OscillatorMode, thermal_amplitude_sq
from .timeseries import TimeSeries

RESOLUTION_LIMIT = 0.1  # max w0 * dt
DEFAULT_STEPS_PER_PERIOD = 200
_CHUNK = 1 << 20

FEEDBACK_MODES = {"off": _kernel.FB_OFF, "cool": _kernel.FB_COOL, "excite": _kernel.FB_EXCITE}


class SimulationError(RuntimeError):
    pass


class ProtocolTimeout(SimulationError):
    pass


@dataclass(frozen=True)
class SimConfig:
    mode: OscillatorMode
    mass: float
    temperature: float
    duration: float
    dt: float | None = None
    rng_seed: int = 0
    initial_position: float = 0.0
    initial_velocity: float = 0.0
    extra_force_psd: float = 0.0
    measurement_noise_std: float = 0.0
    output_stride: int = 1

    def __post_init__(self):
        if self.dt is None:
            object.__setattr__(self, "dt", 1.0 / (DEFAULT_STEPS_PER_PERIOD * self.mode.f0))
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if self.mode.omega0 * self.dt >= RESOLUTION_LIMIT:
            raise ValueError(
                f"dt={self.dt:.6g} s under-resolves f0={self.mode.f0} Hz: "
                f"w0*dt={self.mode.omega0 * self.dt:.4g} must be < {RESOLUTION_LIMIT}"
            )
        if self.duration < self.dt:
            raise ValueError("duration must be >= dt")
        if self.mass <= 0:
            raise ValueError("mass must be > 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.extra_force_psd < 0 or self.measurement_noise_std < 0:
            raise ValueError("noise levels must be >= 0")
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ValueError("output_stride must be a positive integer")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must fit in an unsigned 64-bit integer")

    @property
    def thermal_force_psd(self) -> float:
        return 4.0 * self.mass * self.mode.gamma * K_B * self.temperature

    @property
    def x_rms(self) -> float:
        """Equipartition RMS displacement sqrt(k_B T / (m w0^2))."""
        return math.sqrt(thermal_amplitude_sq(self.mass, self.mode.f0, self.temperature))

    def n_steps(self) -> int:
        n_out = max(1, int(round(self.duration / (self.dt * self.output_stride))))
        return n_out * self.output_stride

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, separators=(",", ":"), default=repr)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FeedbackConfig:
    """Lock-in based feedback through the coil.

    ``gain`` is in N per (m/s) of estimated velocity for ``mode="cool"`` and
    is the drive amplitude in N for ``mode="excite"``.
    """

    carrier_f: float
    mode: str = "off"
    gain: float = 0.0
    lockin_bandwidth: float = 0.1
    phase_offset: float = 0.0
    coil_force_limit: float = math.inf

    def __post_init__(self):
        if self.mode not in FEEDBACK_MODES:
            raise ValueError(f"feedback mode must be one of {sorted(FEEDBACK_MODES)}, got {self.mode!r}")
        if not 0 < self.lockin_bandwidth < self.carrier_f / 2:
            raise ValueError("lockin_bandwidth must be > 0 and well below carrier_f")
        if self.gain < 0:
            raise ValueError("gain must be >= 0")
        if not self.coil_force_limit > 0:
            raise ValueError("coil_force_limit must be > 0")


class _Integrator:
    """Carries integrator and lock-in state across chunks and phases."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.rng = np.random.default_rng(int(config.rng_seed))
        self.state = np.array([config.initial_position, config.initial_velocity], dtype=np.float64)
        self.lockin = np.zeros(4)
        self.k = 0
        m = config.mode
        dt = config.dt
        s_total = config.thermal_force_psd + config.extra_force_psd
        self._noise_scale = math.sqrt(s_total / (2.0 * dt)) * dt / config.mass
        # stiffness pre-warped so the discrete Verlet oscillator rings at exactly f0
        omega_sq = 2.0 * (1.0 - math.cos(m.omega0 * dt)) / dt**2
        self._args = (dt, omega_sq, m.duffing_epsilon, math.exp(-m.gamma * dt), 1.0 / config.mass)
        self._zeros = None

    def _normals(self, n):
        if self._noise_scale == 0.0:
            if self._zeros is None or self._zeros.size < n:
                self._zeros = np.zeros(max(n, 1))
            return self._zeros[:n]
        return self.rng.standard_normal(n)

    def run(self, n_steps: int, feedback: FeedbackConfig | None = None, stop_amp: float = 0.0):
        """Advance up to ``n_steps``; returns (recorded samples, steps done, stopped)."""
        cfg = self.config
        stride = int(cfg.output_stride)
        if feedback is None or feedback.mode == "off":
            fb_mode, omega_c, alpha, gain, cos_off, sin_off, limit = _kernel.FB_OFF, 0.0, 0.0, 0.0, 1.0, 0.0, math.inf
            if stop_amp > 0:
                raise ValueError("amplitude stop needs an active lock-in")
        else:
            fb_mode = FEEDBACK_MODES[feedback.mode]
            omega_c = TWO_PI * feedback.carrier_f
            # two RC poles whose cascade is -3 dB at the lock-in bandwidth
            f_pole = feedback.lockin_bandwidth / math.sqrt(math.sqrt(2.0) - 1.0)
            alpha = -math.expm1(-TWO_PI * f_pole * cfg.dt)
            gain = feedback.gain
            cos_off, sin_off = math.cos(feedback.phase_offset), math.sin(feedback.phase_offset)
            limit = feedback.coil_force_limit
        use_meas = fb_mode != _kernel.FB_OFF and cfg.measurement_noise_std > 0
        out = np.empty(n_steps // stride + 1)
        pos = 0
        if self.k % stride == 0:
            out[0] = self.state[0]
            pos = 1
        done_total = 0
        stopped = False
        empty = np.empty(0)
        while done_total < n_steps:
            n = min(_CHUNK, n_steps - done_total)
            normals = self._normals(n)
            meas = self.rng.standard_normal(n) if use_meas else empty
            done, pos, status = _kernel.integrate(
                self.state, self.lockin, self.k, n, *self._args, self._noise_scale, normals, meas,
                cfg.measurement_noise_std, stride, out, pos, fb_mode, omega_c, alpha, gain, cos_off,
                sin_off, limit, stop_amp,
            )
            self.k += done
            done_total += done
            if status == _kernel.STATUS_DIVERGED:
                raise SimulationError(
                    f"integration diverged at step {self.k} (t={self.k * cfg.dt:.6g} s): non-finite state"
                )
            if status == _kernel.STATUS_STOPPED:
                stopped = True
                break
        return out[:pos], done_total, stopped

    @property
    def amplitude(self) -> float:
        x, v = self.state
        return math.hypot(x, v / self.config.mode.omega0)


def simulate(config: SimConfig, feedback: FeedbackConfig | None = None) -> TimeSeries:
    """Integrate ``config`` and return the position trace.

    Samples are taken every ``output_stride`` steps; with the default stride
    of one the trace has ``round(duration/dt) + 1`` samples.
    """
    sim = _Integrator(config)
    samples, _, _ = sim.run(config.n_steps(), feedback)
    meta = {"seed": int(config.rng_seed), "digest": config.digest()}
    return TimeSeries(0.0, config.dt * config.output_stride, samples, meta)


class ProtocolResult(NamedTuple):
    excite_phase: TimeSeries
    ringdown_phase: TimeSeries
    achieved_X0: float
    time_to_target: float
    x_rms: float


def run_protocol(
    config: SimConfig,
    feedback: FeedbackConfig,
    target_factor: float = 10.0,
    max_excite_time: float | None = None,
    ringdown_duration: float | None = None,
) -> ProtocolResult:
    """Excite to ``target_factor`` times the thermal RMS amplitude, then release.

    The drive runs until the in-loop lock-in amplitude reaches the target,
    after which feedback is switched off and the free decay is recorded for
    ``ringdown_duration`` (default ``config.duration``).  The ring-down trace
    has its own time origin at the moment of release.
    """
    if feedback.mode != "excite":
        raise ValueError("run_protocol needs an excite-mode feedback config")
    if config.temperature <= 0:
        raise ValueError("the excitation target is set from thermal motion; temperature must be > 0")
    x_rms = config.x_rms
    target = target_factor * x_rms
    max_excite_time = config.duration if max_excite_time is None else max_excite_time
    ringdown_duration = config.duration if ringdown_duration is None else ringdown_duration
    stride = config.output_stride
    sim = _Integrator(config)
    n_max = stride * max(1, int(round(max_excite_time / (config.dt * stride))))
    excite, done, stopped = sim.run(n_max, feedback, stop_amp=target)
    if not stopped:
        raise ProtocolTimeout(
            f"amplitude target {target:.6g} m not reached within {max_excite_time:.6g} s "
            f"(gain={feedback.gain:.6g} N)"
        )
    t_switch = done * config.dt
    x0 = sim.amplitude
    meta = {"seed": int(config.rng_seed), "digest": config.digest()}
    excite_ts = TimeSeries(0.0, config.dt * stride, excite, dict(meta, phase="excite"))
    # restart the step counter so ring-down samples sit on a stride grid from release
    sim.k = 0
    n_ring = stride * max(1, int(round(ringdown_duration / (config.dt * stride))))
    ring, _, _ = sim.run(n_ring, None)
    ring_ts = TimeSeries(0.0, config.dt * stride, ring, dict(meta, phase="ringdown", t_release=repr(t_switch)))
    return ProtocolResult(excite_ts, ring_ts, x0, t_switch, x_rms)


class ColdDampResult(NamedTuple):
    T_eff: float
    gamma_eff: float
    T_eff_expected: float
    x2_mean: float


def cold_damp(config: SimConfig, feedback: FeedbackConfig, settle_time: float | None = None) -> ColdDampResult:
    """Steady-state mode temperature under velocity feedback.

    The nominal feedback rate is ``gain / mass``; ``T_eff`` is measured from
    the time-averaged true position variance after ``settle_time``
    (default ten effective damping times).
    """
    if feedback.mode != "cool":
        raise ValueError("cold_damp needs a cool-mode feedback config")
    gamma_fb = feedback.gain / config.mass
    gamma_eff = config.mode.gamma + gamma_fb
    if gamma_eff <= 0:
        raise ValueError("cold damping needs gamma + gamma_fb > 0")
    if settle_time is None:
        settle_time = 10.0 / gamma_eff
    needed = settle_time + 10.0 / gamma_eff
    if config.duration < needed:
        raise SimulationError(
            f"duration {config.duration:.6g} s too short to converge: need >= {needed:.6g} s "
            f"(settle {settle_time:.6g} s + 10/gamma_eff)"
        )
    ts = simulate(config, feedback)
    x = ts.samples[ts.t >= settle_time]
    x2 = float(np.mean(x * x))
    omega0 = config.mode.omega0
    T_eff = config.mass * omega0**2 * x2 / K_B
    T_expected = config.temperature * config.mode.gamma / gamma_eff
    return ColdDampResult(T_eff, gamma_eff, T_expected, x2)


def measure(ts: TimeSeries, model: str, **params) -> TimeSeries:
    """Apply a detector model to a true position trace.

    ``model="apd"``: additive white readout noise ``noise_std`` (m) then
    clipping to ``+-clip`` (m).

    ``model="camera"``: each frame (rate ``frame_rate`` Hz) is the mean
    position over an ``exposure`` (s) window starting at the frame time,
    plus optional ``noise_std``.  ``exposure=0`` samples instantaneously.
    """
    rng = np.random.default_rng(int(params.get("rng_seed", 0)))
    noise_std = float(params.get("noise_std", 0.0))
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    meta = dict(ts.metadata, detector=model)
    if model == "apd":
        clip = float(params.get("clip", math.inf))
        if not clip > 0:
            raise ValueError("clip must be > 0")
        y = ts.samples + (noise_std * rng.standard_normal(ts.samples.size) if noise_std > 0 else 0.0)
        return TimeSeries(ts.t0, ts.dt, np.clip(y, -clip, clip), meta)
    if model == "camera":
        frame_rate = float(params["frame_rate"])
        exposure = float(params.get("exposure", 0.0))
        if frame_rate <= 0 or exposure < 0:
            raise ValueError("frame_rate must be > 0 and exposure >= 0")
        interval = 1.0 / frame_rate
        if exposure > interval * (1 + 1e-12):
            raise ValueError(f"exposure {exposure} s exceeds the frame interval {interval} s")
        t = ts.t
        t_end = t[-1] + 0.5 * ts.dt
        n_frames = int(np.floor((t_end - exposure - ts.t0) / interval)) + 1
        if n_frames < 1:
            raise ValueError("trace shorter than one exposure")
        t_frame = ts.t0 + interval * np.arange(n_frames)
        if exposure == 0:
            y = np.interp(t_frame, t, ts.samples)
        else:
            cum = np.concatenate(([0.0], np.cumsum(0.5 * (ts.samples[1:] + ts.samples[:-1]) * ts.dt)))
            y = (np.interp(t_frame + exposure, t, cum) - np.interp(t_frame, t, cum)) / exposure
        if noise_std > 0:
            y = y + noise_std * rng.standard_normal(y.size)
        return TimeSeries(ts.t0, interval, y, meta)
    raise ValueError(f"unknown detector model {model!r}; expected 'apd' or 'camera'")


def with_gamma_scale(config: SimConfig, factor: float) -> SimConfig:
    """Return ``config`` with the mode damping multiplied by ``factor``."""
    return replace(config, mode=replace(config.mode, gamma=config.mode.gamma * factor))
