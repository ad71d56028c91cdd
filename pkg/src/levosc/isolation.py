"""Cascaded spring-mass vibration isolation.

Each stage is a base-excited second-order isolator.  Stages are treated as
independent (no mass loading between them), so chain isolation in dB is the
sum of the per-stage values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class IsolationStage:
    load_mass: float
    char_frequency: float
    quality: float | None = None  # None -> undamped

    def __post_init__(self):
        if not self.load_mass > 0:
            raise ValueError("load_mass must be > 0")
        if not self.char_frequency > 0:
            raise ValueError("char_frequency must be > 0")
        if self.quality is not None and not self.quality > 0:
            raise ValueError("quality must be > 0 when given")


# three-stage suspension, vertical resonances
CRYOSTAT_STAGES = (
    IsolationStage(7.0, 1.4),
    IsolationStage(1.6, 2.5),
    IsolationStage(0.08, 4.6),
)


def transmissibility(stage: IsolationStage, f) -> np.ndarray:
    """Amplitude transmissibility |H(f)| from floor to load."""
    r = np.asarray(f, dtype=float) / stage.char_frequency
    if stage.quality is None:
        with np.errstate(divide="ignore"):
            return 1.0 / np.abs(1.0 - r**2)
    zr2 = (r / stage.quality) ** 2  # (2 zeta r)^2 with zeta = 1/(2Q)
    return np.sqrt((1.0 + zr2) / ((1.0 - r**2) ** 2 + zr2))


def stage_isolation_db(stage: IsolationStage, f: float) -> float:
    """Isolation 20 log10(1/|H|) at ``f`` in dB.

    The undamped form ``20 log10((f/f_c)^2 - 1)`` is only meaningful above
    the stage resonance; give the stage a ``quality`` to evaluate near or
    below it.
    """
    if f <= 0:
        raise ValueError("frequency must be > 0")
    if stage.quality is None and f <= stage.char_frequency:
        raise ValueError(
            f"f={f} Hz is not above the stage resonance {stage.char_frequency} Hz; "
            "the undamped model diverges there, set a finite quality to use the damped formula"
        )
    return float(-20.0 * math.log10(transmissibility(stage, f)))


def chain_isolation_db(stages: Sequence[IsolationStage], f: float) -> float:
    if len(stages) == 0:
        raise ValueError("isolation chain needs at least one stage")
    return float(sum(stage_isolation_db(s, f) for s in stages))


def residual_vibration_psd(stages: Sequence[IsolationStage], floor_psd: float, f: float, mass: float) -> float:
    """Force PSD (N^2/Hz) on ``mass`` from floor acceleration PSD ``floor_psd``.

    The floor PSD in (m/s^2)^2/Hz is attenuated by the chain power ratio
    ``10^(-dB/10)`` and converted through ``F = m a``.
    """
    if floor_psd < 0:
        raise ValueError("floor_psd must be >= 0")
    if mass <= 0:
        raise ValueError("mass must be > 0")
    if floor_psd == 0:
        return 0.0
    ratio = 10.0 ** (-chain_isolation_db(stages, f) / 10.0)
    return mass**2 * floor_psd * ratio
