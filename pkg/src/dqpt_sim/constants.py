"""Physical constants in the units used throughout the package.

Every internal frequency is angular (rad/s) with hbar = 1 in the dynamics.
Magnetic fields enter in Gauss and are converted through the gyromagnetic
ratios below.
"""

from dataclasses import dataclass

import numpy as np
from scipy import constants as _codata

TWO_PI = 2.0 * np.pi

#: Gauss per Tesla.
GAUSS_PER_TESLA = 1.0e4


@dataclass(frozen=True)
class PhysicalConstants:
    """Gyromagnetic ratios, zero-field splitting and the dipolar constant.

    ``gamma_e`` and ``gamma_n`` are in rad s^-1 G^-1, ``D`` in rad/s.
    ``mu0_hbar_factor`` is mu0*hbar/(4*pi) in SI (J m^3 ... / T^2 style units)
    so that ``mu0_hbar_factor * gamma_a * gamma_b / r**3`` is an angular
    frequency when the gammas are given in rad s^-1 T^-1.
    """

    gamma_e: float = TWO_PI * 2.8e6
    gamma_n: float = TWO_PI * 1.07e3
    D: float = TWO_PI * 2.87e9
    mu0_hbar_factor: float = _codata.mu_0 * _codata.hbar / (4.0 * np.pi)

    @property
    def gamma_e_si(self) -> float:
        return self.gamma_e * GAUSS_PER_TESLA

    @property
    def gamma_n_si(self) -> float:
        return self.gamma_n * GAUSS_PER_TESLA


DEFAULT_CONSTANTS = PhysicalConstants()
