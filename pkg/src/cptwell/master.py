"""Dissipative dynamics of the renormalized three-level model.

The upper level decays into ``|2>`` at rate ``Gamma``.  In the primed frame the
populations and coherences obey linear equations with Bessel-weighted decay
branching (``Lambda0``) and nonsecular couplings between a coherence and its
conjugate (``Lambda2``).  The ``rho'33`` equation follows from trace
conservation.

All rates are in units of ``omega_L`` and derivatives are per unit phase time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .analytic import ThreeLevelParams
from .errors import ConfigError, ShapeError, StateCorruptionError, StepSizeError
from .tdse import TimeGrid

log = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-10
TRACE_TOL = 1e-8
POSITIVITY_WARN = -1e-6


@dataclass(frozen=True)
class DensityMatrixPrimed:
    rho: np.ndarray

    def __post_init__(self):
        r = np.array(self.rho, dtype=complex)
        if r.shape != (3, 3):
            raise ShapeError(f"density matrix must be 3x3, got {r.shape}")
        r.setflags(write=False)
        object.__setattr__(self, "rho", r)
        check_density(r)

    @classmethod
    def pure(cls, index: int) -> "DensityMatrixPrimed":
        r = np.zeros((3, 3), dtype=complex)
        r[index, index] = 1.0
        return cls(r)

    @classmethod
    def from_amplitudes(cls, amps) -> "DensityMatrixPrimed":
        a = np.asarray(amps, dtype=complex)
        return cls(np.outer(a, a.conj()))

    @property
    def populations(self) -> np.ndarray:
        return self.rho.diagonal().real.copy()


def check_density(rho: np.ndarray) -> None:
    """Raise :class:`StateCorruptionError` unless ``rho`` is a valid state."""
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITICITY_TOL:
        raise StateCorruptionError(f"density matrix not Hermitian (deviation {herm:.2e})")
    tr = np.trace(rho).real
    if abs(tr - 1) > TRACE_TOL:
        raise StateCorruptionError(f"density matrix trace is {tr:.12f}")
    diag = rho.diagonal().real
    if diag.min() < -TRACE_TOL or diag.max() > 1 + TRACE_TOL:
        raise StateCorruptionError(f"populations out of range: {diag}")


@dataclass(frozen=True)
class DecayParams:
    gamma: float = 0.01
    Lambda0: float = 1.0
    Lambda2: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ConfigError("gamma must be non-negative")
        if abs(self.Lambda0) > 1 or abs(self.Lambda2) > 1:
            raise ConfigError("|Lambda0| and |Lambda2| must not exceed 1")

    @classmethod
    def from_params(cls, p: ThreeLevelParams, gamma: float = 0.01) -> "DecayParams":
        return cls(gamma=gamma, Lambda0=p.Lambda0, Lambda2=p.Lambda2)


def _rhs(rho, p: ThreeLevelParams, dec: DecayParams, nonsecular: bool, printed_rabi: bool):
    # Every entry is read from rho itself (rho31 rather than conj(rho13)),
    # which keeps the map complex-linear in the nine entries.
    w = p.omega_L
    d0 = p.Delta0R / w
    dr = p.deltaR / w
    om = p.Omega23R / w
    if not printed_rabi:
        om /= 2
    g = dec.gamma
    l0 = dec.Lambda0
    l2 = dec.Lambda2 if nonsecular else 0.0

    r11, r12, r13 = rho[0, 0], rho[0, 1], rho[0, 2]
    r21, r22, r23 = rho[1, 0], rho[1, 1], rho[1, 2]
    r31, r32, r33 = rho[2, 0], rho[2, 1], rho[2, 2]

    d11 = 0.5 * g * (1 - l0) * r33
    d22 = 1j * om * (r32 - r23) + 0.5 * g * (1 + l0) * r33
    d33 = -1j * om * (r32 - r23) - g * r33
    d12 = 1j * d0 * r12 - 1j * om * r13
    d21 = -1j * d0 * r21 + 1j * om * r31
    d13 = 1j * (dr + d0) * r13 - 1j * om * r12 - 0.5 * g * (r13 - 0.5 * l2 * r31)
    d31 = -1j * (dr + d0) * r31 + 1j * om * r21 - 0.5 * g * (r31 - 0.5 * l2 * r13)
    d23 = 1j * dr * r23 - 1j * om * (r22 - r33) - 0.5 * g * (r23 - 0.5 * l2 * r32)
    d32 = -1j * dr * r32 + 1j * om * (r22 - r33) - 0.5 * g * (r32 - 0.5 * l2 * r23)
    return np.array([[d11, d12, d13], [d21, d22, d23], [d31, d32, d33]], dtype=complex)


def master_rhs(
    rho,
    p: ThreeLevelParams,
    dec: DecayParams,
    *,
    nonsecular: bool = True,
    printed_rabi: bool = False,
) -> np.ndarray:
    """Time derivative ``d rho'/d tau`` for a valid primed density matrix.

    The coherent terms use ``Omega23R/2``, matching the renormalized
    Hamiltonian so that ``gamma = 0`` reproduces the closed-form unitary
    dynamics.  ``printed_rabi=True`` uses ``Omega23R`` instead.  Setting
    ``nonsecular=False`` drops the ``Lambda2`` cross terms.
    """
    r = rho.rho if isinstance(rho, DensityMatrixPrimed) else np.asarray(rho, dtype=complex)
    if r.shape != (3, 3):
        raise ShapeError(f"density matrix must be 3x3, got {r.shape}")
    check_density(r)
    return _rhs(r, p, dec, nonsecular, printed_rabi)


def liouvillian(
    p: ThreeLevelParams,
    dec: DecayParams,
    *,
    nonsecular: bool = True,
    printed_rabi: bool = False,
) -> np.ndarray:
    """9x9 generator acting on row-major flattened density matrices."""
    cols = []
    for k in range(9):
        e = np.zeros(9, dtype=complex)
        e[k] = 1.0
        cols.append(_rhs(e.reshape(3, 3), p, dec, nonsecular, printed_rabi).ravel())
    return np.array(cols).T


@dataclass(frozen=True)
class MasterTrace:
    """Sampled primed density matrices, shape ``(n_samples, 3, 3)``."""

    taus: np.ndarray
    rho: np.ndarray
    steady_tau: float | None
    horizon: float
    final_rate: float
    min_eigenvalue: float
    trace_drift: float

    @property
    def populations(self) -> np.ndarray:
        return self.rho.diagonal(axis1=1, axis2=2).real

    @property
    def final(self) -> np.ndarray:
        return self.rho[-1]


def evolve_master(
    initial: DensityMatrixPrimed,
    p: ThreeLevelParams,
    dec: DecayParams,
    g: TimeGrid,
    stride: int = 20,
    *,
    steady_tol: float = 1e-10,
    stop_at_steady: bool = True,
    nonsecular: bool = True,
    printed_rabi: bool = False,
) -> MasterTrace:
    """Fixed-step fourth-order Runge-Kutta integration of the master equation.

    For this autonomous linear system an RK4 step is the Taylor polynomial
    of degree four in ``h L``, so the step matrix is formed once.  The run
    stops when ``max|d rho/d tau| < steady_tol`` if ``stop_at_steady``.
    """
    if stride < 1:
        raise ConfigError("stride must be at least 1")
    lv = liouvillian(p, dec, nonsecular=nonsecular, printed_rabi=printed_rabi)
    h = g.step
    hl = h * lv
    step = np.eye(9, dtype=complex)
    term = np.eye(9, dtype=complex)
    for k in range(1, 5):
        term = term @ hl / k
        step = step + term

    vec = initial.rho.ravel().copy()
    taus = [g.tau_start]
    samples = [vec.copy()]
    steady_tau = None
    rate = float(np.max(np.abs(lv @ vec)))
    n = g.n_steps
    for k in range(n):
        vec = step @ vec
        tau = g.tau_start + (k + 1) * h
        last = k + 1 == n
        if (k + 1) % stride == 0 or last:
            rate = float(np.max(np.abs(lv @ vec)))
            if steady_tau is None and rate < steady_tol:
                steady_tau = tau
            taus.append(tau)
            samples.append(vec.copy())
            if steady_tau is not None and stop_at_steady:
                break

    rho = np.array(samples).reshape(-1, 3, 3)
    trace_drift = float(np.max(np.abs(np.trace(rho, axis1=1, axis2=2) - 1)))
    if trace_drift > TRACE_TOL:
        raise StepSizeError(f"trace drift {trace_drift:.2e} exceeds {TRACE_TOL:.0e}; reduce dtau")
    herm = float(np.max(np.abs(rho - rho.conj().transpose(0, 2, 1))))
    if herm > HERMITICITY_TOL:
        raise StepSizeError(f"Hermiticity lost ({herm:.2e}); reduce dtau")
    min_eig = float(np.linalg.eigvalsh((rho + rho.conj().transpose(0, 2, 1)) / 2).min())
    if min_eig < POSITIVITY_WARN:
        log.warning("density matrix lost positivity: smallest eigenvalue %.3e", min_eig)
    return MasterTrace(
        taus=np.array(taus),
        rho=rho,
        steady_tau=steady_tau,
        horizon=g.tau_end,
        final_rate=rate,
        min_eigenvalue=min_eig,
        trace_drift=trace_drift,
    )


def lab_populations_from_primed(rho_series, p: ThreeLevelParams, taus) -> np.ndarray:
    """Lab-frame populations ``(n_samples, 3)`` from primed density matrices.

    With ``phi = (Omega12/omega_L) sin tau``::

        rho11 = cos^2 phi rho'11 + sin^2 phi rho'22 + sin 2phi Im rho'12
        rho22 = sin^2 phi rho'11 + cos^2 phi rho'22 - sin 2phi Im rho'12
        rho33 = rho'33
    """
    rho = np.asarray(rho_series, dtype=complex)
    taus = np.asarray(taus, dtype=float)
    if rho.ndim != 3 or rho.shape[1:] != (3, 3) or rho.shape[0] != taus.shape[0]:
        raise ShapeError(f"density series {rho.shape} does not match {taus.shape[0]} times")
    phi = p.phi_amplitude * np.sin(taus)
    c2, s2, s2phi = np.cos(phi) ** 2, np.sin(phi) ** 2, np.sin(2 * phi)
    r11 = rho[:, 0, 0].real
    r22 = rho[:, 1, 1].real
    im12 = rho[:, 0, 1].imag
    out = np.empty((len(taus), 3))
    out[:, 0] = c2 * r11 + s2 * r22 + s2phi * im12
    out[:, 1] = s2 * r11 + c2 * r22 - s2phi * im12
    out[:, 2] = rho[:, 2, 2].real
    if np.max(np.abs(out.sum(axis=1) - 1)) > TRACE_TOL:
        raise StateCorruptionError("lab populations do not sum to one")
    return out


def fluorescence(trace_or_rho33, gamma: float):
    """Photon emission rate proxy ``gamma * rho33``."""
    return gamma * np.asarray(trace_or_rho33)


def approach_rate(taus, rho11, window: float = 0.5) -> float:
    """Exponential rate of ``1 - rho11`` fitted over the last ``window`` fraction."""
    taus = np.asarray(taus)
    dev = 1 - np.asarray(rho11)
    start = int(len(taus) * (1 - window))
    t, y = taus[start:], dev[start:]
    mask = y > 1e-13
    if mask.sum() < 3:
        raise ConfigError("not enough late-time samples above round-off to fit a rate")
    slope = np.polyfit(t[mask], np.log(y[mask]), 1)[0]
    return -float(slope)

