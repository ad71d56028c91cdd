"""
Quality factor from a ring-down
===============================

Drive the 11.7 Hz mode of a 9.8 um sphere to 30x its thermal amplitude,
switch the drive off and fit the decay of the lock-in energy X^2.

The real damping (gamma/2pi = 0.59 uHz, a 75 hour energy decay time) is
scaled up 1000x so the ring-down fits in a few minutes of simulated time.
The estimator only sees gamma relative to the bin width and record length,
so nothing else changes.
"""

import math

import numpy as np

from levosc import OscillatorMode, envelope, fit_decay, run_protocol
from levosc.report import format_power10
from levosc.scenario import load_scenario

sc = load_scenario("mode1_ringdown")
cfg, fb = sc.sim_config(), sc.feedback_config()
print(f"mode: f0 = {cfg.mode.f0} Hz, injected gamma/2pi = {cfg.mode.gamma_over_2pi:.3g} Hz")
print(f"thermal amplitude x_rms = {cfg.x_rms:.3g} m")

# excite -> release -> free decay
res = run_protocol(cfg, fb, target_factor=30, max_excite_time=3000.0, ringdown_duration=1600.0)
print(f"reached X0 = {res.achieved_X0 / res.x_rms:.1f} x_rms after {res.time_to_target:.0f} s of drive")

# X^2 averaged in 10 s bins through a 0.1 Hz lock-in
env = envelope(res.ringdown_phase, cfg.mode.f0, bandwidth=0.1, bin_width=10.0)
fit = fit_decay(env, background_sq=2 * res.x_rms**2)
print(f"fitted gamma/2pi = {fit.gamma_over_2pi:.4g} +- {fit.gamma_ci95 / (2 * math.pi):.2g} Hz "
      f"(reduced chi2 {fit.reduced_chi2:.2f}, {fit.n_bins} bins)")
print(f"Q = f0 / (gamma/2pi) = {format_power10(cfg.mode.f0 / fit.gamma_over_2pi)}")

# a crude look at the decay: X^2 every 200 s against the model
for t, y, m in zip(env.bin_centers[::20], env.X2_mean[::20], fit.model(env.bin_centers[::20])):
    print(f"  t = {t:6.0f} s   X^2 = {y:.3e}   model = {m:.3e}")

# the same arithmetic at the unscaled damping
for f0, g2pi in [(11.7, 0.59e-6), (8.4, 2.6e-6), (8.7, 2.6e-6)]:
    mode = OscillatorMode.from_linewidth(f0, g2pi)
    print(f"f0 = {f0} Hz, gamma/2pi = {g2pi:.2g} Hz -> Q = {format_power10(mode.Q)}, "
          f"1/gamma = {mode.ringdown_time / 3600:.1f} h")
