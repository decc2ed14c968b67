"""Closed-form three-level model in the renormalized frame.

Levels ``|1>, |2>, |3>`` are ``|0+>, |0->, |3+>``.  After the unitary

    U(tau) = exp[-i phi(tau) (s12 + s21) + i s33 tau],  phi = (Omega12/omega_L) sin tau,

the slow dynamics is a rotating-wave three-level problem with a
Bessel-dressed splitting ``Delta0R`` and Rabi frequency ``Omega23R``.
State ``|1'>`` decouples entirely, which is the trapping mechanism.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .drive import DriveParams
from .errors import ConfigError, RangeError
from .tdse import PopulationTrace, TimeGrid, integrate

_SERIES_MAX_X = 12.0
_MAX_ORDER = 8
_MAX_X = 50.0


def _bessel_series(n: int, x: float) -> float:
    half = x / 2
    term = half**n / math.factorial(n)
    total = term
    q = -half * half
    m = 0
    while True:
        m += 1
        term *= q / (m * (n + m))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-300) and m > 2:
            return total
        if m > 200:
            return total


def _bessel_miller(n: int, x: float) -> float:
    # downward recurrence normalised with J0 + 2*sum J_2k = 1
    start = 2 * ((max(n, int(abs(x))) + 16 + int(math.sqrt(40 * max(n, abs(x))))) // 2)
    j_next, j = 0.0, 1e-30
    norm = 0.0
    result = 0.0
    for k in range(start, 0, -1):
        j_prev = (2 * k / x) * j - j_next
        j_next, j = j, j_prev
        if abs(j) > 1e250:
            j *= 1e-250
            j_next *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if k - 1 == n:
            result = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2 * j
    norm += j
    if n == 0:
        result = j
    return result / norm


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind ``J_n(x)`` for ``0 <= n <= 8``, ``|x| <= 50``.

    Uses the ascending series up to ``|x| = 12`` and Miller's backward
    recurrence beyond.
    """
    if not (isinstance(n, (int, np.integer)) and 0 <= n <= _MAX_ORDER):
        raise RangeError(f"Bessel order must be an integer in [0, {_MAX_ORDER}], got {n}")
    x = float(x)
    if not abs(x) <= _MAX_X:
        raise RangeError(f"|x| must not exceed {_MAX_X}, got {x}")
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    sign = -1.0 if (x < 0 and n % 2) else 1.0
    ax = abs(x)
    value = _bessel_series(n, ax) if ax <= _SERIES_MAX_X else _bessel_miller(n, ax)
    return sign * value


@dataclass(frozen=True)
class ThreeLevelParams:
    """Renormalized parameters; ``omega_L`` and ``omega3`` are kept for the phases."""

    Delta0R: float
    Omega23R: float
    deltaR: float
    OmegaR: float
    Lambda0: float
    Lambda2: float
    phi_amplitude: float
    omega_L: float
    omega3: float


def renormalize(d: DriveParams) -> ThreeLevelParams:
    r = d.Omega12 / d.omega_L
    lam0 = bessel_j(0, 2 * r)
    lam2 = bessel_j(2, 2 * r)
    delta0r = d.Delta0 * lam0
    # 2 J1(r)/r, taken from its series where the quotient would underflow
    j1_ratio = 1 - r * r / 8 if r < 1e-6 else 2 * bessel_j(1, r) / r
    omega23r = d.Omega23 * j1_ratio
    deltar = d.omega3 - delta0r / 2 - d.omega_L
    return ThreeLevelParams(
        Delta0R=delta0r,
        Omega23R=omega23r,
        deltaR=deltar,
        OmegaR=math.hypot(omega23r, deltar),
        Lambda0=lam0,
        Lambda2=lam2,
        phi_amplitude=r,
        omega_L=d.omega_L,
        omega3=d.omega3,
    )


class AmplitudeTriple(NamedTuple):
    c1: complex | np.ndarray
    c2: complex | np.ndarray
    c3: complex | np.ndarray

    @property
    def populations(self) -> np.ndarray:
        """Array of shape ``(3, ...)``."""
        return np.abs(np.array([self.c1, self.c2, self.c3])) ** 2


def _as_triple(initial) -> AmplitudeTriple:
    c = np.asarray(tuple(initial), dtype=complex)
    if c.shape != (3,):
        raise ConfigError("initial amplitudes must be a triple")
    n = np.linalg.norm(c)
    if abs(n - 1) > 1e-10:
        raise ConfigError(f"initial amplitudes not normalized (norm {n:.12f})")
    return AmplitudeTriple(*c)


def primed_amplitudes(p: ThreeLevelParams, initial, tau) -> AmplitudeTriple:
    """Amplitudes on the renormalized states ``|i'(tau)>`` at phase time ``tau``.

    ``initial`` gives the amplitudes at ``tau = 0``, where the frame
    transformation is the identity.  ``tau`` may be an array.
    """
    c10, c20, c30 = _as_triple(initial)
    tau = np.asarray(tau, dtype=float)
    w = p.omega_L
    a = p.OmegaR * tau / (2 * w)
    cos_a = np.cos(a)
    # sin(a)/OmegaR without the removable singularity at OmegaR = 0
    sin_over = (tau / (2 * w)) * np.sinc(a / np.pi)

    c1 = c10 * np.exp(1j * p.Delta0R * tau / (2 * w))
    c2 = (c20 * cos_a + 1j * (c20 * p.deltaR + c30 * p.Omega23R) * sin_over) * np.exp(
        -1j * (p.deltaR + p.Delta0R) * tau / (2 * w)
    )
    c3 = (c30 * cos_a - 1j * (c30 * p.deltaR - c20 * p.Omega23R) * sin_over) * np.exp(
        1j * (p.deltaR - 2 * (p.omega3 - w)) * tau / (2 * w)
    )
    return AmplitudeTriple(c1, c2, c3)


def frame_angle(p: ThreeLevelParams, tau):
    return p.phi_amplitude * np.sin(tau)


def lab_amplitudes(primed: AmplitudeTriple, tau, p: ThreeLevelParams) -> AmplitudeTriple:
    """Undo the frame transformation."""
    phi = frame_angle(p, np.asarray(tau, dtype=float))
    c, s = np.cos(phi), np.sin(phi)
    c1p, c2p, c3p = primed
    return AmplitudeTriple(
        c1p * c + 1j * c2p * s,
        c2p * c + 1j * c1p * s,
        c3p * np.exp(-1j * np.asarray(tau)),
    )


def propagate_lab(p: ThreeLevelParams, initial, tau) -> AmplitudeTriple:
    return lab_amplitudes(primed_amplitudes(p, initial, tau), tau, p)


def _detuning_weight(p: ThreeLevelParams) -> float:
    if p.OmegaR == 0.0:
        return 1.0
    return (p.deltaR / p.OmegaR) ** 2


def population_difference_W(p: ThreeLevelParams, tau):
    """``rho33 - (rho11 + rho22)`` after preparation in ``|2>``."""
    a = p.OmegaR * np.asarray(tau, dtype=float) / p.omega_L
    return -np.cos(a) - 2 * _detuning_weight(p) * np.sin(a / 2) ** 2


def doublet_population_excited_prep(p: ThreeLevelParams, tau):
    """``rho11 + rho22`` after preparation in ``|2>``."""
    a = p.OmegaR * np.asarray(tau, dtype=float) / (2 * p.omega_L)
    return np.cos(a) ** 2 + _detuning_weight(p) * np.sin(a) ** 2


def ground_prep_populations(p: ThreeLevelParams, tau) -> np.ndarray:
    """``(rho11, rho22, rho33)`` after preparation in ``|1>``; shape ``(3, ...)``."""
    rho22 = np.sin(frame_angle(p, np.asarray(tau, dtype=float))) ** 2
    return np.array([1 - rho22, rho22, np.zeros_like(rho22)])


def transfer_period(p: ThreeLevelParams) -> float:
    """Phase-time period of the slow doublet <-> upper-level exchange."""
    if p.OmegaR == 0.0:
        return math.inf
    return 2 * math.pi * p.omega_L / p.OmegaR


def three_level_system(d: DriveParams) -> tuple[np.ndarray, np.ndarray]:
    """Energies and dipole coupling of the bare three-level Hamiltonian.

    ``H = diag(-Delta0/2, Delta0/2, omega3) - cos(tau) * coupling``.
    """
    energies = np.array([-d.Delta0 / 2, d.Delta0 / 2, d.omega3])
    coupling = np.array(
        [
            [0.0, d.Omega12, 0.0],
            [d.Omega12, 0.0, d.Omega23],
            [0.0, d.Omega23, 0.0],
        ]
    )
    return energies, coupling


def integrate_three_level(d: DriveParams, initial, grid: TimeGrid = TimeGrid(), stride: int = 20) -> PopulationTrace:
    """Numerical integration of the bare three-level model (no frame, no RWA)."""
    energies, coupling = three_level_system(d)
    return integrate(energies, coupling, d.omega_L, np.asarray(initial, dtype=complex), grid, stride)
