"""
Cold damping
============

Velocity feedback adds a damping rate gamma_fb without adding noise, so the
mode temperature drops to T gamma / (gamma + gamma_fb).  The feedback force
is derived in the loop from a lock-in estimate of the oscillator velocity.
"""

import math

import numpy as np

from levosc import FeedbackConfig, OscillatorMode, SimConfig, Sphere, cold_damp, mass_of

f0 = 11.7
m = mass_of(Sphere(9.8e-6))
gamma = 2 * math.pi * 0.59e-3

for factor in (0, 1, 4, 9):
    fb = FeedbackConfig(f0, "cool", gain=factor * gamma * m, lockin_bandwidth=1.0)
    T = []
    for seed in range(10):
        cfg = SimConfig(OscillatorMode(f0, gamma), m, 3.0, 2.0e4, dt=1e-3, rng_seed=seed, output_stride=16)
        T.append(cold_damp(cfg, fb).T_eff)
    expected = 3.0 / (1 + factor)
    print(f"gamma_fb = {factor} gamma: T_eff = {np.mean(T):.3f} +- {np.std(T) / math.sqrt(10):.3f} K "
          f"(expected {expected:.3f} K)")
