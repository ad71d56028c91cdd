"""``levosc`` command-line front end.

Subcommands
-----------
simulate     free (or feedback) evolution -> trace.csv, summary.txt
protocol     excite to a target amplitude, release, fit the ring-down
fit          decay / PSD / autocorrelation fit of a trace CSV
sensitivity  force and acceleration noise curves vs mass -> curves.csv
isolation    per-stage and total isolation of the suspension -> isolation.csv
spin         spin-mechanics figures of merit -> spin.txt

Exit codes: 0 success, 2 invalid configuration or input, 3 simulation or
analysis failure.  Wall-clock runtime goes to stderr only so that every
emitted file is byte-identical across reruns.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .constants import G_STD, K_B, TWO_PI
from .estimation import EstimationError, energy_autocorrelation, envelope, fit_decay, psd_linewidth
from .isolation import CRYOSTAT_STAGES, chain_isolation_db, stage_isolation_db
from .langevin import SimulationError, run_protocol, simulate
from .physics import (
    SPIN_MOMENTS,
    Sphere,
    SpinMechanicsSetup,
    accel_noise_density,
    coherence_criterion,
    cooperativity,
    detectable_mass_threshold,
    force_noise_density,
    mass_of,
    spin_coupling,
    spin_force,
    thermal_amplitude_sq,
    thermal_decoherence,
    zero_point_motion,
)
from .report import format_power10, provenance, write_kv, write_table
from .scenario import DEFAULT_SWEEP, ConfigError, Scenario, load_scenario
from .timeseries import TimeSeries

EXIT_OK, EXIT_CONFIG, EXIT_ANALYSIS = 0, 2, 3

# defaults used when no scenario is given (mode 1 of the trapped sphere)
DEFAULT_DIAMETER = 9.8e-6
DEFAULT_F0 = 11.7
DEFAULT_GAMMA_OVER_2PI = 5.9e-7


class AnalysisFailure(RuntimeError):
    pass


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _out_dir(args, sc: Scenario | None) -> Path:
    out = Path(args.out or (sc.output_dir if sc is not None and sc.output_dir else "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args, required: bool) -> Scenario | None:
    if args.config is None:
        if required:
            raise ConfigError("--config is required for this command")
        return None
    return load_scenario(args.config, seed=args.seed, scale_gamma=args.scale_gamma)


def _default_mass(sc: Scenario | None) -> float:
    if sc is not None and sc.mass is not None:
        return sc.mass
    return mass_of(Sphere(DEFAULT_DIAMETER))


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- simulate -------------------------------------------------------------------


def _trace(ts: TimeSeries, sc: Scenario, seed: int, **extra) -> TimeSeries:
    meta = {"seed": seed, "config_digest": sc.digest}
    meta.update(extra)
    return TimeSeries(ts.t0, ts.dt, ts.samples, meta)


def cmd_simulate(args) -> int:
    sc = _load(args, required=True)
    cfg = sc.sim_config(args.mode)
    fb = sc.feedback_config(args.mode)
    if fb is not None and fb.mode == "excite":
        fb = None  # the drive belongs to the protocol command; simulate is free evolution
    label = sc.mode(args.mode).label
    out = _out_dir(args, sc)
    t_start = time.perf_counter()
    ts = simulate(cfg, fb)
    runtime = time.perf_counter() - t_start
    trace_path = out / "trace.csv"
    _trace(ts, sc, cfg.rng_seed, mode=label).to_csv(trace_path)

    x2 = float(np.mean(ts.samples**2))
    x2_th = thermal_amplitude_sq(cfg.mass, cfg.mode.f0, cfg.temperature)
    items = [
        ("scenario", sc.name),
        ("mode", label),
        ("f0_hz", cfg.mode.f0),
        ("gamma_over_2pi_hz", cfg.mode.gamma_over_2pi),
        ("gamma_scale", sc.mode(args.mode).gamma_scale),
        ("duffing_epsilon_per_m2_s2", cfg.mode.duffing_epsilon),
        ("mass_kg", cfg.mass),
        ("temperature_k", cfg.temperature),
        ("dt_s", cfg.dt),
        ("duration_s", cfg.n_steps() * cfg.dt),
        ("n_steps", cfg.n_steps()),
        ("n_samples", len(ts)),
        ("feedback_mode", fb.mode if fb is not None else "off"),
        ("x2_mean_m2", x2),
        ("x2_thermal_m2", x2_th),
        ("x2_ratio", x2 / x2_th if x2_th > 0 else math.nan),
        ("mode_temperature_k", cfg.mass * cfg.mode.omega0**2 * x2 / K_B),
        ("trace_digest", _sha256_file(trace_path)),
    ]
    if fb is not None and fb.mode == "cool":
        gamma_eff = cfg.mode.gamma + fb.gain / cfg.mass
        items.append(("gamma_eff_s-1", gamma_eff))
        items.append(("mode_temperature_expected_k", cfg.temperature * cfg.mode.gamma / gamma_eff))
    write_kv(out / "summary.txt", provenance(sc.digest, cfg.rng_seed), items)
    _log(f"simulate: {len(ts)} samples, <x^2>={x2:.6g} m^2 ({x2 / x2_th if x2_th > 0 else math.nan:.4g} x thermal)")
    _log(f"runtime_s={runtime:.3f}")
    return EXIT_OK


# -- fitting --------------------------------------------------------------------


def _fit_items(method: str, label: str, f0: float, gamma: float, ci: float, extra) -> list:
    g2pi = gamma / TWO_PI
    ci2pi = ci / TWO_PI
    Q = f0 / g2pi if g2pi > 0 else math.inf
    q_ci = Q * ci / gamma if gamma > 0 and math.isfinite(ci) else math.nan
    items = [
        ("method", method),
        ("mode", label),
        ("f0_hz", f0),
        ("gamma_s-1", gamma),
        ("gamma_ci95_s-1", ci),
        ("gamma_over_2pi_hz", g2pi),
        ("gamma_over_2pi_ci95_hz", ci2pi),
        ("Q", Q),
        ("Q_ci95", q_ci),
        ("Q_display", format_power10(Q)),
    ]
    return items + list(extra)


def run_fit(ts: TimeSeries, f0: float, analysis: dict, background_sq: float, label: str, out: Path,
            header) -> tuple[list, str]:
    """Fit ``ts`` and write ``fit_report.txt`` and ``residuals.csv``.

    Returns the report items and a one-line human summary.
    """
    method = analysis["method"]
    bw = analysis["lockin_bandwidth_hz"]
    if analysis.get("skip_s"):
        ts = ts.slice_time(ts.t0 + analysis["skip_s"])
    try:
        if method == "decay":
            bin_width = analysis["bin_width_s"] or max(1.0 / bw, ts.duration / 200.0)
            env = envelope(ts, f0, bw, bin_width)
            fit = fit_decay(env, background_sq=background_sq)
            gamma, ci = fit.gamma_hat, fit.gamma_ci95
            extra = [
                ("X0_sq_m2", fit.X0_sq),
                ("background_m2", background_sq),
                ("reduced_chi2", fit.reduced_chi2),
                ("n_bins_used", fit.n_bins),
                ("n_bins_total", len(env)),
                ("bin_width_s", bin_width),
                ("lockin_bandwidth_hz", bw),
            ]
            used = np.isin(env.bin_centers, fit.t)
            model = fit.model(env.bin_centers)
            rows = [(t, m, s, mo, m - mo, int(u)) for t, m, s, mo, u in
                    zip(env.bin_centers, env.X2_mean, env.X2_stderr, model, used)]
            write_table(out / "residuals.csv", header,
                        ["t_s", "X2_mean_m2", "X2_stderr_m2", "model_m2", "residual_m2", "used"], rows)
        elif method == "psd":
            lw = psd_linewidth(ts, f0)
            gamma, ci = lw.gamma_implied, math.nan
            extra = [("fwhm_angular_rad_s", lw.fwhm_angular), ("f_peak_hz", lw.f_peak),
                     ("n_averages", lw.n_averages)]
            rows = [(f, p, m, p - m) for f, p, m in zip(lw.freqs, lw.psd, lw.model)]
            write_table(out / "residuals.csv", header, ["f_hz", "psd_m2_hz", "model_m2_hz", "residual_m2_hz"], rows)
        else:
            ac = energy_autocorrelation(ts, f0, bandwidth=bw)
            gamma, ci = ac.gamma, math.nan
            lo, hi = ac.fit_range
            extra = [("fit_lag_min_s", lo), ("fit_lag_max_s", hi), ("lockin_bandwidth_hz", bw)]
            sel = (ac.lags >= lo) & (ac.lags <= hi)
            model = ac.amplitude * np.exp(-ac.gamma * ac.lags)
            rows = [(t, r, m, r - m, int(u)) for t, r, m, u in zip(ac.lags, ac.rho, model, sel)]
            write_table(out / "residuals.csv", header, ["lag_s", "rho", "model", "residual", "used"], rows)
    except (EstimationError, ValueError) as err:
        raise AnalysisFailure(f"{method} fit failed: {err}") from err
    items = _fit_items(method, label, f0, gamma, ci, extra)
    items.append(("trace_digest", ts.digest()))
    write_kv(out / "fit_report.txt", header, items)
    d = dict(items)
    ci_txt = f" ± {d['gamma_over_2pi_ci95_hz']:.2g}" if math.isfinite(ci) else ""
    line = (f"{label}: f0 = {f0:.6g} Hz, gamma/2pi = {d['gamma_over_2pi_hz']:.3g}{ci_txt} Hz, "
            f"Q = {d['Q_display']}")
    return items, line


def _thermal_background(sc: Scenario | None, f0: float) -> float:
    """Mean X^2 of thermal motion, 2 k_B T / (m w0^2); 0 without a scenario."""
    if sc is None or sc.mass is None:
        return 0.0
    return 2.0 * thermal_amplitude_sq(sc.mass, f0, sc.environment.temperature)


def cmd_fit(args) -> int:
    sc = _load(args, required=False)
    try:
        ts = TimeSeries.from_csv(Path(args.trace))
    except (OSError, ValueError) as err:
        raise ConfigError(f"{args.trace}: {err}") from None
    if args.f0 is not None:
        f0, label = args.f0, args.mode or "trace"
    elif sc is not None and sc.modes:
        spec = sc.mode(args.mode)
        f0, label = spec.mode.f0, spec.label
    else:
        raise ConfigError("--f0: carrier frequency is required (or give --config with a mode)")
    if not f0 > 0:
        raise ConfigError("--f0: must be > 0")
    analysis = dict(sc.analysis) if sc is not None else {
        "method": "decay", "lockin_bandwidth_hz": 0.1, "bin_width_s": None, "background_m2": None, "skip_s": 0.0}
    if args.method is not None:
        analysis["method"] = args.method
    if args.bandwidth is not None:
        analysis["lockin_bandwidth_hz"] = args.bandwidth
    if args.bin_width is not None:
        analysis["bin_width_s"] = args.bin_width
    if args.background_m2 is not None:
        analysis["background_m2"] = args.background_m2
    for key in ("lockin_bandwidth_hz", "bin_width_s", "background_m2"):
        v = analysis[key]
        if v is not None and (not math.isfinite(v) or v < 0 or (v == 0 and key != "background_m2")):
            raise ConfigError(f"{key}: invalid value {v!r}")
    background = analysis["background_m2"]
    if background is None:
        background = _thermal_background(sc, f0)
    out = _out_dir(args, sc)
    seed = ts.metadata.get("seed", args.seed)
    header = provenance(sc.digest if sc is not None else ts.metadata.get("config_digest"), seed)
    _, line = run_fit(ts, f0, analysis, background, label, out, header)
    print(line)
    return EXIT_OK


# -- protocol -------------------------------------------------------------------


def cmd_protocol(args) -> int:
    sc = _load(args, required=True)
    cfg = sc.sim_config(args.mode)
    fb = sc.feedback_config(args.mode)
    if fb is None or fb.mode != "excite":
        raise ConfigError("feedback.mode: protocol needs an 'excite' feedback section")
    spec = sc.mode(args.mode)
    p = sc.protocol
    out = _out_dir(args, sc)
    t_start = time.perf_counter()
    try:
        res = run_protocol(cfg, fb, target_factor=p["target_factor"], max_excite_time=p["max_excite_time_s"],
                           ringdown_duration=p["ringdown_duration_s"])
    except ValueError as err:
        raise ConfigError(f"protocol: {err}") from None
    runtime = time.perf_counter() - t_start
    header = provenance(sc.digest, cfg.rng_seed)
    _trace(res.excite_phase, sc, cfg.rng_seed, mode=spec.label, phase="excite").to_csv(out / "excite.csv")
    ring = _trace(res.ringdown_phase, sc, cfg.rng_seed, mode=spec.label, phase="ringdown",
                  t_release=repr(res.time_to_target))
    ring.to_csv(out / "ringdown.csv")
    items = [
        ("scenario", sc.name),
        ("mode", spec.label),
        ("f0_hz", cfg.mode.f0),
        ("gamma_over_2pi_hz", cfg.mode.gamma_over_2pi),
        ("gamma_scale", spec.gamma_scale),
        ("x_rms_m", res.x_rms),
        ("target_factor", p["target_factor"]),
        ("achieved_X0_m", res.achieved_X0),
        ("achieved_X0_over_x_rms", res.achieved_X0 / res.x_rms),
        ("time_to_target_s", res.time_to_target),
        ("ringdown_samples", len(res.ringdown_phase)),
        ("excite_digest", _sha256_file(out / "excite.csv")),
        ("ringdown_digest", _sha256_file(out / "ringdown.csv")),
    ]
    write_kv(out / "summary.txt", header, items)
    _log(f"protocol: X0 = {res.achieved_X0 / res.x_rms:.4g} x_rms after {res.time_to_target:.6g} s")
    _log(f"runtime_s={runtime:.3f}")
    background = sc.analysis["background_m2"]
    if background is None:
        background = _thermal_background(sc, cfg.mode.f0)
    _, line = run_fit(ring, cfg.mode.f0, sc.analysis, background, spec.label, out, header)
    print(line)
    return EXIT_OK


# -- sensitivity ----------------------------------------------------------------


def sweep_axis(sweep: dict) -> np.ndarray:
    if sweep["scale"] == "log":
        return np.logspace(math.log10(sweep["start"]), math.log10(sweep["stop"]), sweep["points"])
    return np.linspace(sweep["start"], sweep["stop"], sweep["points"])


def sensitivity_rows(sweep: dict, mass: float) -> list[tuple]:
    """Rows ``(mass, T, gamma/2pi, sqrt S_FF, sqrt S_aa, sqrt S_aa / g, F_e, F_p)``.

    Sorted by the sweep axis, then by temperature, so the order never depends
    on how the points were evaluated.
    """
    axis = sweep_axis(sweep)
    G = sweep["gradient_t_m"]
    f_e = spin_force(G, SPIN_MOMENTS["electron"])
    f_p = spin_force(G, SPIN_MOMENTS["proton"])
    m_fixed = sweep["mass_kg"] if sweep["mass_kg"] is not None else mass
    rows = []
    for v in axis:
        temps = [v] if sweep["axis"] == "temperature_k" else sweep["temperatures_k"]
        for T in sorted(temps):
            m = v if sweep["axis"] == "mass_kg" else m_fixed
            g2pi = v if sweep["axis"] == "gamma_over_2pi_hz" else sweep["gamma_over_2pi_hz"]
            gamma = TWO_PI * g2pi
            sff = force_noise_density(m, gamma, T).asd
            saa = accel_noise_density(m, gamma, T)
            rows.append((float(m), float(T), float(g2pi), sff, saa.asd, saa.asd_g, f_e, f_p))
    key = {"mass_kg": 0, "temperature_k": 1, "gamma_over_2pi_hz": 2}[sweep["axis"]]
    rows.sort(key=lambda r: (r[key], r[1]))
    return rows


def cmd_sensitivity(args) -> int:
    sc = _load(args, required=False)
    sweep = sc.sweep if sc is not None and sc.sweep is not None else None
    if sweep is None:
        sweep = dict(DEFAULT_SWEEP, mass_kg=None)
    if args.scale_gamma is not None:
        sweep = dict(sweep, gamma_over_2pi_hz=sweep["gamma_over_2pi_hz"] * args.scale_gamma)
    rows = sensitivity_rows(sweep, _default_mass(sc))
    out = _out_dir(args, sc)
    header = provenance(sc.digest if sc is not None else None, args.seed, axis=sweep["axis"],
                        gradient_t_m=sweep["gradient_t_m"], g_m_s2=G_STD)
    cols = ["mass_kg", "temperature_k", "gamma_over_2pi_hz", "sqrt_sff_n_per_rthz", "sqrt_saa_m_s2_per_rthz",
            "sqrt_saa_g_per_rthz", "electron_force_n", "proton_force_n"]
    write_table(out / "curves.csv", header, cols, rows)
    _log(f"sensitivity: {len(rows)} rows -> {out / 'curves.csv'}")
    return EXIT_OK


# -- isolation ------------------------------------------------------------------


def cmd_isolation(args) -> int:
    sc = _load(args, required=False)
    if sc is not None and sc.isolation is not None:
        stages, f = sc.isolation["stages"], sc.isolation["frequency_hz"]
    else:
        stages, f = CRYOSTAT_STAGES, 8.0
    try:
        per_stage = [stage_isolation_db(s, f) for s in stages]
        total = chain_isolation_db(stages, f)
    except ValueError as err:
        raise ConfigError(f"isolation: {err}") from None
    # an undamped stage has infinite quality
    rows = [(i + 1, s.load_mass, s.char_frequency, math.inf if s.quality is None else s.quality, db)
            for i, (s, db) in enumerate(zip(stages, per_stage))]
    rows.append(("total", math.nan, math.nan, math.nan, total))
    out = _out_dir(args, sc)
    header = provenance(sc.digest if sc is not None else None, args.seed, frequency_hz=f)
    write_table(out / "isolation.csv", header,
                ["stage", "load_mass_kg", "char_frequency_hz", "quality", "isolation_db"], rows)
    for r in rows:
        print(f"stage {r[0]}: {r[-1]:.1f} dB")
    return EXIT_OK


# -- spin -----------------------------------------------------------------------


def spin_report(setup: SpinMechanicsSetup) -> list:
    mode = setup.mode
    T = setup.temperature
    coh = coherence_criterion(mode, T)
    th = thermal_decoherence(mode, T)
    lam = spin_coupling(setup)
    G = setup.magnetic_gradient
    return [
        ("mass_kg", setup.mass),
        ("f0_hz", mode.f0),
        ("gamma_over_2pi_hz", mode.gamma_over_2pi),
        ("Q", mode.Q),
        ("temperature_k", T),
        ("gradient_t_m", G),
        ("spin_moment_j_t", setup.spin_moment),
        ("t2_s", setup.spin_T2),
        ("x_zpl_m", zero_point_motion(setup.mass, mode.f0)),
        ("lambda_over_2pi_hz", lam.lambda_over_2pi),
        ("n_bar", th.n_bar),
        ("gamma_th_over_2pi_hz", th.gamma_th / TWO_PI),
        ("cooperativity", cooperativity(setup)),
        ("omega0_Q_over_2pi_hz", coh.omega0_Q_over_2pi),
        ("kT_over_2pi_hbar_hz", coh.kT_over_2pi_hbar),
        ("criterion_satisfied", coh.satisfied),
        ("spin_force_n", spin_force(G, setup.spin_moment)),
        ("threshold_mass_electron_kg", detectable_mass_threshold(G, SPIN_MOMENTS["electron"], mode.gamma, T)),
        ("threshold_mass_proton_kg", detectable_mass_threshold(G, SPIN_MOMENTS["proton"], mode.gamma, T)),
    ]


def cmd_spin(args) -> int:
    sc = _load(args, required=False)
    if sc is None:
        sc = load_scenario("spin", seed=args.seed, scale_gamma=args.scale_gamma)
    if sc.spin is None:
        raise ConfigError("spin: missing required section")
    spin = sc.spin
    mode = sc.mode(args.mode).mode
    try:
        setup = SpinMechanicsSetup(spin["gradient_t_m"], mode, sc.require_mass(), spin["temperature_k"],
                                   SPIN_MOMENTS[spin["species"]], spin["t2_s"])
        items = [("species", spin["species"])] + spin_report(setup)
    except ValueError as err:
        raise ConfigError(f"spin: {err}") from None
    out = _out_dir(args, sc)
    write_kv(out / "spin.txt", provenance(sc.digest, args.seed), items)
    d = dict(items)
    print(f"lambda/2pi = {d['lambda_over_2pi_hz']:.3g} Hz, C = {format_power10(d['cooperativity'])}, "
          f"criterion {'satisfied' if d['criterion_satisfied'] else 'NOT satisfied'}")
    return EXIT_OK


# -- entry point ----------------------------------------------------------------


def _seed(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON file or bundled config name")
    common.add_argument("--seed", type=_seed, help="RNG seed (overrides simulation.seed)")
    common.add_argument("--out", help="output directory (default: scenario output_dir or .)")
    common.add_argument("--scale-gamma", type=float, dest="scale_gamma",
                        help="multiply the mode damping by this factor")

    p = argparse.ArgumentParser(prog="levosc", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"levosc {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate a mode, write trace.csv and summary.txt")
    s.add_argument("--mode", help="mode label (default: first mode)")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("protocol", parents=[common], help="excite, release and fit the ring-down")
    s.add_argument("--mode", help="mode label (default: first mode)")
    s.set_defaults(func=cmd_protocol)

    s = sub.add_parser("fit", parents=[common], help="fit a trace CSV")
    s.add_argument("trace", help="trace CSV (t,x columns)")
    s.add_argument("--f0", type=float, help="carrier frequency in Hz (default: scenario mode)")
    s.add_argument("--mode", help="mode label")
    s.add_argument("--method", choices=("decay", "psd", "autocorrelation"))
    s.add_argument("--bandwidth", type=float, help="lock-in bandwidth in Hz")
    s.add_argument("--bin-width", type=float, dest="bin_width", help="envelope bin width in s")
    s.add_argument("--background-m2", type=float, dest="background_m2",
                   help="thermal background mean X^2 in m^2 (default: from scenario, else 0)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("sensitivity", parents=[common], help="noise curves vs mass -> curves.csv")
    s.set_defaults(func=cmd_sensitivity)
    s = sub.add_parser("isolation", parents=[common], help="suspension isolation table")
    s.set_defaults(func=cmd_isolation)
    s = sub.add_parser("spin", parents=[common], help="spin-mechanics figures of merit")
    s.add_argument("--mode", help="mode label")
    s.set_defaults(func=cmd_spin)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"levosc {args.command}: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (AnalysisFailure, EstimationError, SimulationError) as err:
        print(f"levosc {args.command}: {err}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
