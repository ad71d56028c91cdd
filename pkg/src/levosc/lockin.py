"""Offline digital lock-in: mix to baseband and zero-phase low-pass."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy import signal

from .timeseries import TimeSeries


class Quadratures(NamedTuple):
    t: np.ndarray
    I: np.ndarray
    Q: np.ndarray
    X: np.ndarray
    phi: np.ndarray


def lockin_demodulate(ts: TimeSeries, carrier_f: float, bandwidth: float, order: int = 4) -> Quadratures:
    """Demodulate ``ts`` at ``carrier_f``.

    With ``x(t) = X cos(2 pi f t + phi)`` this returns ``I = X cos(phi)``,
    ``Q = X sin(phi)``, amplitude ``X = hypot(I, Q)`` and phase
    ``phi = atan2(Q, I)``, all low-passed to ``bandwidth`` (Hz) with a
    forward-backward Butterworth filter so the envelope carries no group delay.
    """
    if not 0 < bandwidth < carrier_f / 2:
        raise ValueError(f"bandwidth must be in (0, carrier_f/2), got {bandwidth} for carrier {carrier_f}")
    if carrier_f >= ts.fs / 2:
        raise ValueError(f"carrier {carrier_f} Hz is above Nyquist ({ts.fs / 2} Hz)")
    if ts.duration < 3.0 / bandwidth:
        raise ValueError(
            f"series too short for lock-in: {ts.duration:.6g} s < 3/bandwidth = {3.0 / bandwidth:.6g} s"
        )
    t = ts.t
    ph = 2 * np.pi * carrier_f * t
    sos = signal.butter(order, bandwidth, fs=ts.fs, output="sos")
    I = signal.sosfiltfilt(sos, 2.0 * ts.samples * np.cos(ph))
    Q = signal.sosfiltfilt(sos, -2.0 * ts.samples * np.sin(ph))
    return Quadratures(t, I, Q, np.hypot(I, Q), np.arctan2(Q, I))
