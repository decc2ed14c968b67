"""Laser calibration and the validity check of the renormalized model."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DegenerateDipoleError, RangeError
from .spectrum import EigenSolution

# eigenbasis indices of |0+>, |0->, |3+> (strict parity alternation)
GROUND = 0
EXCITED = 1
UPPER = 6

WORKING_INTENSITY_RATIO = 0.35 * math.pi


@dataclass(frozen=True)
class DriveParams:
    """Dimensionless drive and three-level couplings.

    ``omega3`` is measured from the midpoint of the lower doublet, so the
    doublet sits at ``-Delta0/2`` and ``+Delta0/2``.
    """

    lam: float
    omega_L: float
    Omega12: float
    Omega23: float
    Delta0: float
    omega3: float

    def __post_init__(self):
        if not self.omega_L > 0:
            raise ConfigError("omega_L must be positive")
        if self.Omega12 < 0 or self.Omega23 < 0:
            raise ConfigError("Rabi couplings must be non-negative")
        if not self.Delta0 > 0:
            raise ConfigError("Delta0 must be positive")

    @property
    def intensity_ratio(self) -> float:
        return self.Omega12 / self.omega_L


@dataclass(frozen=True)
class ValidityReport:
    ratio_delta: float
    ratio_omega23: float
    ratio_omega12: float
    bound: float
    in_strong_field: bool
    satisfied: bool
    margin: float


def calibrate(s: EigenSolution, intensity_ratio: float = WORKING_INTENSITY_RATIO) -> DriveParams:
    """Tune the laser to the 0- <-> 3+ transition at the given ``Omega12/omega_L``.

    The upper coupling uses ``|<0-|X|3+>|``; its sign is a phase choice for
    ``|3+>`` and does not affect any population.
    """
    if s.n_levels <= UPPER:
        raise RangeError(f"calibration needs at least {UPPER + 1} levels, have {s.n_levels}")
    expected = [1 if k % 2 == 0 else -1 for k in range(UPPER + 1)]
    if list(s.parities[: UPPER + 1]) != expected:
        raise RangeError("lowest levels do not alternate in parity; level naming is ambiguous")
    if intensity_ratio < 0:
        raise ConfigError("intensity_ratio must be non-negative")

    e = s.energies
    mu12 = abs(float(s.dipole[GROUND, EXCITED]))
    mu23 = abs(float(s.dipole[EXCITED, UPPER]))
    if mu12 < 1e-12:
        raise DegenerateDipoleError(f"ground-doublet dipole {mu12:.3e} is too small")

    omega_L = float(e[UPPER] - e[EXCITED])
    lam = intensity_ratio * omega_L / mu12
    return DriveParams(
        lam=lam,
        omega_L=omega_L,
        Omega12=intensity_ratio * omega_L,
        Omega23=lam * mu23,
        Delta0=float(e[EXCITED] - e[GROUND]),
        omega3=float(e[UPPER] - (e[GROUND] + e[EXCITED]) / 2),
    )


def validity(d: DriveParams, margin: float = 0.25) -> ValidityReport:
    """Compare ``Delta0/omega_L`` and ``Omega23/omega_L`` with ``sqrt(Omega12/omega_L)``."""
    if not d.Omega12 > 0:
        raise ConfigError("validity report needs a non-zero drive")
    r12 = d.Omega12 / d.omega_L
    rd = d.Delta0 / d.omega_L
    r23 = d.Omega23 / d.omega_L
    bound = math.sqrt(r12)
    return ValidityReport(
        ratio_delta=rd,
        ratio_omega23=r23,
        ratio_omega12=r12,
        bound=bound,
        in_strong_field=r12 >= 1.0,
        satisfied=(rd < margin * bound) and (r23 < margin * bound),
        margin=margin,
    )
