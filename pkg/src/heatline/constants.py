"""Physical constants (CODATA, via scipy) used at the SI boundary.

Only the oscillator and ion-platform code work in SI units. Internally an
energy E is stored as the angular frequency E/hbar in rad/s, so hbar = 1 and
inverse temperatures are in s/rad.
"""

from __future__ import annotations

import math

from scipy import constants as _c

HBAR = _c.hbar  # J s
K_B = _c.k  # J / K
ATOMIC_MASS = _c.atomic_mass  # kg

CA40_MASS = 39.962590863 * ATOMIC_MASS  # kg
TWO_PI = 2.0 * _c.pi


def beta_from_temperature(temperature: float) -> float:
    """Inverse temperature in s/rad for energies expressed as angular frequencies."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    return HBAR / (K_B * temperature)


def temperature_for_occupation(mode_frequency: float, mean_occupation: float) -> float:
    """Temperature (K) at which a mode of angular frequency ``mode_frequency`` has
    Bose occupation ``mean_occupation``."""
    return HBAR * mode_frequency / (K_B * math.log1p(1.0 / mean_occupation))
