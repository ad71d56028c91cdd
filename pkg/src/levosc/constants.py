"""Physical constants (CODATA 2018, SI units).

Values are frozen here rather than pulled from ``scipy.constants`` so that
golden outputs do not move when scipy updates its CODATA release.

=========  ======================  ===========
name       value                   unit
=========  ======================  ===========
K_B        1.380649e-23            J/K
HBAR       1.054571817e-34         J s
MU_B       9.2740100783e-24        J/T
MU_P       1.41060679736e-26       J/T
G_STD      9.8                     m/s^2
AMU        1.66053906660e-27       kg
=========  ======================  ===========
"""

import math

K_B = 1.380649e-23
HBAR = 1.054571817e-34
MU_B = 9.2740100783e-24
MU_P = 1.41060679736e-26
# rounded value used for the g-normalised acceleration axis
G_STD = 9.8
AMU = 1.66053906660e-27

HELIUM_MASS = 4.0026 * AMU

TWO_PI = 2.0 * math.pi

__all__ = ["K_B", "HBAR", "MU_B", "MU_P", "G_STD", "AMU", "HELIUM_MASS", "TWO_PI"]
