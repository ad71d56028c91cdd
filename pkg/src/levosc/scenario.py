"""JSON scenario files.

A scenario gathers everything a CLI run needs: particle, trap mode(s),
environment, simulation and feedback settings, analysis options, the
isolation chain and a sensitivity sweep.  Every physical quantity carries
its unit in the field name (``f0_hz``, ``gas_pressure_pa`` ...).  Unknown
fields are rejected so a misspelt unit suffix fails loudly instead of being
silently ignored.

Minimal example::

    {
      "sphere": {"diameter_m": 9.8e-6, "density_kg_m3": 1100},
      "mode": {"label": "mode1", "f0_hz": 11.7, "gamma_over_2pi_hz": 5.9e-7},
      "environment": {"temperature_k": 3.0},
      "simulation": {"duration_s": 100.0}
    }

The run digest is the SHA-256 of the canonical JSON (sorted keys, compact
separators) after command-line overrides are applied.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any

from .constants import HELIUM_MASS, TWO_PI
from .isolation import CRYOSTAT_STAGES, IsolationStage
from .langevin import FeedbackConfig, SimConfig
from .physics import DEFAULT_DENSITY, SPIN_MOMENTS, Environment, OscillatorMode, Sphere, mass_of


class ConfigError(ValueError):
    """Invalid scenario; ``str(err)`` names the offending field."""


SWEEP_AXES = ("mass_kg", "temperature_k", "gamma_over_2pi_hz")

# default sweep: mass axis at 3 K and 10 mK
DEFAULT_SWEEP = {
    "axis": "mass_kg",
    "start": 1e-18,
    "stop": 1e-6,
    "points": 121,
    "scale": "log",
    "temperatures_k": [3.0, 0.01],
    "gamma_over_2pi_hz": 5.9e-7,
    "gradient_t_m": 1e4,
}


class _Section:
    """Typed access to one JSON object, tracking which keys were consumed."""

    def __init__(self, data: Any, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
        self.data = data
        self.path = path
        self._used: set[str] = set()

    def _where(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key) -> bool:
        return key in self.data

    def number(self, key, default=None, *, required=False, positive=False, nonneg=False, integer=False):
        self._used.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                raise ConfigError(f"{self._where(key)}: missing required field")
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{self._where(key)}: expected a number, got {v!r}")
        if integer and (not isinstance(v, int) and not float(v).is_integer()):
            raise ConfigError(f"{self._where(key)}: expected an integer, got {v!r}")
        if not math.isfinite(v):
            raise ConfigError(f"{self._where(key)}: must be finite")
        if positive and not v > 0:
            raise ConfigError(f"{self._where(key)}: must be > 0, got {v!r}")
        if nonneg and v < 0:
            raise ConfigError(f"{self._where(key)}: must be >= 0, got {v!r}")
        return int(v) if integer else float(v)

    def string(self, key, default=None, *, choices=None):
        self._used.add(key)
        v = self.data.get(key, default)
        if v is None:
            return None
        if not isinstance(v, str):
            raise ConfigError(f"{self._where(key)}: expected a string, got {v!r}")
        if choices is not None and v not in choices:
            raise ConfigError(f"{self._where(key)}: must be one of {list(choices)}, got {v!r}")
        return v

    def section(self, key, *, required=False):
        self._used.add(key)
        if key not in self.data or self.data[key] is None:
            if required:
                raise ConfigError(f"{self._where(key)}: missing required section")
            return None
        return _Section(self.data[key], self._where(key))

    def raw(self, key, default=None):
        self._used.add(key)
        return self.data.get(key, default)

    def finish(self):
        extra = sorted(set(self.data) - self._used)
        if extra:
            raise ConfigError(f"{self._where(extra[0])}: unknown field")


@dataclass(frozen=True)
class ModeSpec:
    label: str
    mode: OscillatorMode  # with gamma_scale already applied
    gamma_scale: float


@dataclass(frozen=True)
class Scenario:
    """Validated scenario.  Sections that were absent are ``None``."""

    name: str
    raw: dict
    digest: str
    mass: float | None
    sphere: Sphere | None
    modes: tuple
    environment: Environment
    simulation: dict | None
    feedback: dict | None
    protocol: dict
    analysis: dict
    isolation: dict | None
    sweep: dict | None
    spin: dict | None
    output_dir: str | None

    def mode(self, label: str | None = None) -> ModeSpec:
        if not self.modes:
            raise ConfigError("mode: scenario defines no oscillator mode")
        if label is None:
            return self.modes[0]
        for m in self.modes:
            if m.label == label:
                return m
        raise ConfigError(f"mode: no mode labelled {label!r} (have {[m.label for m in self.modes]})")

    def require_mass(self) -> float:
        if self.mass is None:
            raise ConfigError("sphere.mass_kg: missing required field (or give sphere.diameter_m)")
        return self.mass

    def sim_config(self, label: str | None = None) -> SimConfig:
        if self.simulation is None:
            raise ConfigError("simulation: missing required section")
        spec = self.mode(label)
        s = self.simulation
        try:
            return SimConfig(
                mode=spec.mode,
                mass=self.require_mass(),
                temperature=self.environment.temperature,
                duration=s["duration_s"],
                dt=s["dt_s"],
                rng_seed=s["seed"],
                initial_position=s["initial_position_m"],
                initial_velocity=s["initial_velocity_m_s"],
                extra_force_psd=s["extra_force_psd_n2_hz"],
                measurement_noise_std=s["measurement_noise_m"],
                output_stride=s["output_stride"],
            )
        except ValueError as err:
            raise ConfigError(f"simulation: {err}") from None

    def feedback_config(self, label: str | None = None) -> FeedbackConfig | None:
        if self.feedback is None:
            return None
        fb = self.feedback
        try:
            return FeedbackConfig(
                carrier_f=fb["carrier_hz"] if fb["carrier_hz"] is not None else self.mode(label).mode.f0,
                mode=fb["mode"],
                gain=fb["gain"],
                lockin_bandwidth=fb["lockin_bandwidth_hz"],
                phase_offset=fb["phase_offset_rad"],
                coil_force_limit=fb["coil_force_limit_n"],
            )
        except ValueError as err:
            raise ConfigError(f"feedback: {err}") from None


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


def scenario_digest(data) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()[:16]


def _parse_mode(sec: _Section, gamma_scale: float, index: int) -> ModeSpec:
    label = sec.string("label", f"mode{index + 1}")
    f0 = sec.number("f0_hz", required=True, positive=True)
    g2pi = sec.number("gamma_over_2pi_hz", 0.0, nonneg=True)
    eps = sec.number("duffing_epsilon_per_m2_s2", 0.0)
    sec.finish()
    return ModeSpec(label, OscillatorMode(f0, TWO_PI * g2pi * gamma_scale, eps), gamma_scale)


def parse_scenario(data: dict, name: str = "scenario") -> Scenario:
    """Validate an already-decoded scenario mapping."""
    root = _Section(data, "")
    name = root.string("name", name)
    root.string("description")
    output_dir = root.string("output_dir")
    gamma_scale = root.number("gamma_scale", 1.0, positive=True)

    sphere = None
    mass = None
    ssec = root.section("sphere")
    if ssec is not None:
        if ssec.has("mass_kg") and ssec.has("diameter_m"):
            raise ConfigError("sphere: give either mass_kg or diameter_m, not both")
        if ssec.has("mass_kg"):
            mass = ssec.number("mass_kg", positive=True)
        elif ssec.has("diameter_m"):
            sphere = Sphere(
                ssec.number("diameter_m", positive=True),
                ssec.number("density_kg_m3", DEFAULT_DENSITY, positive=True),
            )
            mass = mass_of(sphere)
        else:
            raise ConfigError("sphere.mass_kg: missing required field (or give sphere.diameter_m)")
        ssec.finish()

    modes = []
    if root.has("mode") and root.has("modes"):
        raise ConfigError("mode: give either 'mode' or 'modes', not both")
    msec = root.section("mode")
    if msec is not None:
        modes.append(_parse_mode(msec, gamma_scale, 0))
    mlist = root.raw("modes")
    if mlist is not None:
        if not isinstance(mlist, list) or not mlist:
            raise ConfigError("modes: expected a non-empty list")
        for i, item in enumerate(mlist):
            modes.append(_parse_mode(_Section(item, f"modes[{i}]"), gamma_scale, i))
    labels = [m.label for m in modes]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"modes: duplicate labels {labels}")

    esec = root.section("environment") or _Section({}, "environment")
    T_env = esec.number("temperature_k", 3.0, nonneg=True)
    P_env = esec.number("gas_pressure_pa", 0.0, nonneg=True)
    m_gas = esec.number("gas_molecular_mass_kg", HELIUM_MASS, positive=True)
    try:
        env = Environment(T_env, P_env, m_gas)
    except ValueError as err:
        raise ConfigError(f"environment: {err}") from None
    esec.finish()

    simulation = None
    sim = root.section("simulation")
    if sim is not None:
        simulation = {
            "duration_s": sim.number("duration_s", required=True, positive=True),
            "dt_s": sim.number("dt_s", positive=True),
            "seed": sim.number("seed", 0, nonneg=True, integer=True),
            "initial_position_m": sim.number("initial_position_m", 0.0),
            "initial_velocity_m_s": sim.number("initial_velocity_m_s", 0.0),
            "extra_force_psd_n2_hz": sim.number("extra_force_psd_n2_hz", 0.0, nonneg=True),
            "measurement_noise_m": sim.number("measurement_noise_m", 0.0, nonneg=True),
            "output_stride": sim.number("output_stride", 1, positive=True, integer=True),
        }
        if simulation["seed"] >= 2**64:
            raise ConfigError("simulation.seed: must fit in an unsigned 64-bit integer")
        sim.finish()

    feedback = None
    fsec = root.section("feedback")
    if fsec is not None:
        mode = fsec.string("mode", "off", choices=("off", "cool", "excite"))
        # gain units depend on the loop: N/(m/s) when cooling, N when exciting
        if fsec.has("gain_n_s_per_m") and fsec.has("gain_n"):
            raise ConfigError("feedback: give either gain_n_s_per_m or gain_n, not both")
        if mode == "excite" and fsec.has("gain_n_s_per_m"):
            raise ConfigError("feedback.gain_n_s_per_m: excite mode takes a drive amplitude gain_n")
        if mode == "cool" and fsec.has("gain_n"):
            raise ConfigError("feedback.gain_n: cool mode takes a velocity gain gain_n_s_per_m")
        gain = fsec.number("gain_n_s_per_m", None, nonneg=True)
        g2 = fsec.number("gain_n", None, nonneg=True)
        feedback = {
            "mode": mode,
            "gain": gain if gain is not None else (g2 if g2 is not None else 0.0),
            "carrier_hz": fsec.number("carrier_hz", None, positive=True),
            "lockin_bandwidth_hz": fsec.number("lockin_bandwidth_hz", 0.1, positive=True),
            "phase_offset_rad": fsec.number("phase_offset_rad", 0.0),
            "coil_force_limit_n": fsec.number("coil_force_limit_n", math.inf, positive=True),
        }
        fsec.finish()

    psec = root.section("protocol") or _Section({}, "protocol")
    protocol = {
        "target_factor": psec.number("target_factor", 10.0, positive=True),
        "max_excite_time_s": psec.number("max_excite_time_s", None, positive=True),
        "ringdown_duration_s": psec.number("ringdown_duration_s", None, positive=True),
    }
    psec.finish()

    asec = root.section("analysis") or _Section({}, "analysis")
    analysis = {
        "method": asec.string("method", "decay", choices=("decay", "psd", "autocorrelation")),
        "lockin_bandwidth_hz": asec.number("lockin_bandwidth_hz", 0.1, positive=True),
        "bin_width_s": asec.number("bin_width_s", None, positive=True),
        "background_m2": asec.number("background_m2", None, nonneg=True),
        "skip_s": asec.number("skip_s", 0.0, nonneg=True),
    }
    asec.finish()

    isolation = None
    isec = root.section("isolation")
    if isec is not None:
        freq = isec.number("frequency_hz", 8.0, positive=True)
        stages_raw = isec.raw("stages")
        if stages_raw is None:
            stages = CRYOSTAT_STAGES
        else:
            if not isinstance(stages_raw, list):
                raise ConfigError("isolation.stages: expected a list")
            if not stages_raw:
                raise ConfigError("isolation.stages: stage list is empty")
            stages = []
            for i, item in enumerate(stages_raw):
                st = _Section(item, f"isolation.stages[{i}]")
                try:
                    stages.append(IsolationStage(
                        st.number("load_mass_kg", required=True, positive=True),
                        st.number("char_frequency_hz", required=True, positive=True),
                        st.number("quality", None, positive=True),
                    ))
                except ValueError as err:
                    if isinstance(err, ConfigError):
                        raise
                    raise ConfigError(f"isolation.stages[{i}]: {err}") from None
                st.finish()
            stages = tuple(stages)
        isolation = {"frequency_hz": freq, "stages": stages}
        isec.finish()

    sweep = None
    wsec = root.section("sweep")
    if wsec is not None:
        d = DEFAULT_SWEEP
        sweep = {
            "axis": wsec.string("axis", d["axis"], choices=SWEEP_AXES),
            "start": wsec.number("start", d["start"], positive=True),
            "stop": wsec.number("stop", d["stop"], positive=True),
            "points": wsec.number("points", d["points"], nonneg=True, integer=True),
            "scale": wsec.string("scale", d["scale"], choices=("log", "linear")),
            "temperatures_k": wsec.raw("temperatures_k", d["temperatures_k"]),
            "mass_kg": wsec.number("mass_kg", None, positive=True),
            "gamma_over_2pi_hz": wsec.number("gamma_over_2pi_hz", d["gamma_over_2pi_hz"], positive=True),
            "gradient_t_m": wsec.number("gradient_t_m", d["gradient_t_m"], positive=True),
        }
        temps = sweep["temperatures_k"]
        if (not isinstance(temps, list) or not temps
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in temps)):
            raise ConfigError("sweep.temperatures_k: expected a non-empty list of positive numbers")
        sweep["temperatures_k"] = [float(v) for v in temps]
        if sweep["points"] < 1 or not sweep["stop"] > sweep["start"]:
            raise ConfigError(
                f"sweep: empty range (start={sweep['start']!r}, stop={sweep['stop']!r}, points={sweep['points']})"
            )
        wsec.finish()

    spin = None
    spsec = root.section("spin")
    if spsec is not None:
        spin = {
            "gradient_t_m": spsec.number("gradient_t_m", 1e4, positive=True),
            "species": spsec.string("species", "electron", choices=tuple(SPIN_MOMENTS)),
            "t2_s": spsec.number("t2_s", 1.0, nonneg=True),
            "temperature_k": spsec.number("temperature_k", 0.01, positive=True),
        }
        spsec.finish()

    root.finish()
    return Scenario(
        name=name, raw=data, digest=scenario_digest(data), mass=mass, sphere=sphere, modes=tuple(modes),
        environment=env, simulation=simulation, feedback=feedback, protocol=protocol, analysis=analysis,
        isolation=isolation, sweep=sweep, spin=spin, output_dir=output_dir,
    )


def bundled_configs() -> list[str]:
    """Names of the scenario files shipped with the package."""
    root = resources.files("levosc") / "configs"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))


def _read_text(path) -> tuple[str, str]:
    p = Path(path)
    if p.exists():
        return p.read_text(encoding="utf-8"), p.stem
    name = str(path)
    if not name.endswith(".cfg"):
        name += ".cfg"
    res = resources.files("levosc") / "configs" / name
    if res.is_file():
        return res.read_text(encoding="utf-8"), Path(name).stem
    raise ConfigError(f"config file not found: {path} (bundled: {', '.join(bundled_configs())})")


def load_scenario(path, seed: int | None = None, scale_gamma: float | None = None) -> Scenario:
    """Read and validate a scenario file.

    ``path`` may also name a bundled config (``mode1_ringdown`` or
    ``mode1_ringdown.cfg``).  ``seed`` and ``scale_gamma`` override the file
    (the latter multiplies ``gamma_scale``) and are folded into the digest.
    """
    text, stem = _read_text(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno}, column {err.colno}: {err.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    data = copy.deepcopy(data)
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed: must fit in an unsigned 64-bit integer")
        # only stochastic runs consume the seed; elsewhere it is just echoed in headers
        if isinstance(data.get("simulation"), dict):
            data["simulation"]["seed"] = int(seed)
    if scale_gamma is not None:
        if not scale_gamma > 0 or not math.isfinite(scale_gamma):
            raise ConfigError(f"--scale-gamma: must be a positive finite number, got {scale_gamma!r}")
        base = data.get("gamma_scale", 1.0)
        if isinstance(base, bool) or not isinstance(base, (int, float)):
            raise ConfigError(f"gamma_scale: expected a number, got {base!r}")
        data["gamma_scale"] = base * scale_gamma
    return parse_scenario(data, stem)
