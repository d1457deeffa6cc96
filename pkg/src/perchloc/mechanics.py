"""Static bending stress of a branch under a perched drone."""

from __future__ import annotations

import math
from dataclasses import dataclass

G = 9.81
DEFAULT_MOR_MPA = 27.0
DEFAULT_SAFETY_FACTOR = 2.0
DEFAULT_LEVER_M = 2.0


@dataclass(frozen=True)
class LoadCase:
    """Cantilevered circular branch with a point load at ``lever_m``."""

    mass_kg: float
    lever_m: float
    radius_m: float

    def __post_init__(self):
        if not self.radius_m > 0:
            raise ValueError(f"radius must be positive, got {self.radius_m}")
        if self.lever_m < 0 or self.mass_kg < 0:
            raise ValueError("mass and lever arm must be non-negative")

    @property
    def force_n(self) -> float:
        return self.mass_kg * G

    @property
    def moment_nm(self) -> float:
        return self.force_n * self.lever_m

    @property
    def second_moment_m4(self) -> float:
        return math.pi * self.radius_m**4 / 4.0

    @property
    def sigma_max_pa(self) -> float:
        return self.moment_nm * self.radius_m / self.second_moment_m4


def bending_stress(mass_kg: float, lever_m: float, radius_m: float) -> float:
    """Peak bending stress in MPa, ``4 m g L / (pi r^3)``."""
    if not radius_m > 0:
        raise ValueError(f"radius must be positive, got {radius_m}")
    if mass_kg < 0 or lever_m < 0:
        raise ValueError("mass and lever arm must be non-negative")
    return 4.0 * mass_kg * G * lever_m / (math.pi * radius_m**3) / 1e6


def stress_check(
    sigma_mpa: float,
    mor_mpa: float = DEFAULT_MOR_MPA,
    safety_factor: float = DEFAULT_SAFETY_FACTOR,
) -> bool:
    """True when the stress stays below the modulus of rupture over the safety factor."""
    if sigma_mpa < 0 or mor_mpa < 0:
        raise ValueError("stress and modulus of rupture must be non-negative")
    if safety_factor <= 0:
        raise ValueError("safety factor must be positive")
    return sigma_mpa < mor_mpa / safety_factor
