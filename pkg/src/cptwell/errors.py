"""Exception hierarchy.

Configuration problems derive from :class:`ConfigError`; anything detected
while computing (bad basis, integrator tolerance, corrupted state) derives
from :class:`NumericalError`.  The CLI maps the two families to distinct
exit codes.
"""


class CptError(Exception):
    """Base class for all package errors."""


class ConfigError(CptError, ValueError):
    """Invalid parameters or configuration."""


class RangeError(ConfigError, IndexError):
    """Level or doublet index outside the retained set."""


class LevelNameError(ConfigError, KeyError):
    """Unrecognised level label."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ShapeError(ConfigError):
    """Arrays that should be aligned are not."""


class NumericalError(CptError, RuntimeError):
    """A numerical procedure failed or left its tolerance."""


class BasisInadequacyError(NumericalError):
    """Expansion basis too small to resolve the requested states."""


class DegenerateDipoleError(NumericalError):
    """Ground-doublet dipole too small to calibrate the field strength."""


class StepSizeError(NumericalError):
    """Integrator invariant drifted past tolerance; use a smaller step."""


class StateCorruptionError(NumericalError):
    """A density matrix violates Hermiticity, trace or population bounds."""
