"""Nonperturbative coherent population trapping in a driven quartic double well."""
from .analytic import ThreeLevelParams, bessel_j, renormalize
from .drive import DriveParams, calibrate, validity
from .spectrum import BasisConfig, EigenSolution, PotentialParams, solve
from .tdse import TimeGrid, evolve, prepare_level

__all__ = [
    "BasisConfig",
    "DriveParams",
    "EigenSolution",
    "PotentialParams",
    "ThreeLevelParams",
    "TimeGrid",
    "bessel_j",
    "calibrate",
    "evolve",
    "prepare_level",
    "renormalize",
    "solve",
    "validity",
]
__version__ = "0.1.0"
