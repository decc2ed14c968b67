"""Driven time-dependent Schroedinger equation in the field-free eigenbasis.

In phase time ``tau = omega_L t`` the state obeys

    i d psi/d tau = (1/omega_L) [diag(E) - C cos(tau)] psi,

with ``C = lam * X`` for the double well.  Steps use the fourth-order Magnus
propagator on the two Gauss-Legendre nodes; each step is an exact unitary, so
the norm is conserved to rounding and any drift signals a real problem.
Because the drive is ``2 pi``-periodic, when a whole number of steps fits in a
period the step propagators repeat and are computed only once.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .drive import EXCITED, GROUND, UPPER, DriveParams
from .errors import ConfigError, LevelNameError, RangeError, StepSizeError
from .spectrum import EigenSolution

TWO_PI = 2 * math.pi
DEFAULT_DTAU = TWO_PI / 200
DEFAULT_TAU_END = 400 * math.pi
NORM_TOL = 1e-8

_GAUSS = math.sqrt(3) / 6


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid in phase time.

    ``dtau`` is rounded down so that a whole number of steps spans the window.
    Coarser than ``2 pi/200`` is refused unless ``allow_coarse`` is set.
    """

    tau_start: float = 0.0
    tau_end: float = DEFAULT_TAU_END
    dtau: float = DEFAULT_DTAU
    allow_coarse: bool = False

    def __post_init__(self):
        if not self.tau_end > self.tau_start:
            raise ConfigError("tau_end must exceed tau_start")
        if not self.dtau > 0:
            raise ConfigError("dtau must be positive")
        if self.dtau > DEFAULT_DTAU * (1 + 1e-12) and not self.allow_coarse:
            raise ConfigError(f"dtau={self.dtau:.4g} exceeds 2*pi/200; pass allow_coarse to override")

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil((self.tau_end - self.tau_start) / self.dtau - 1e-9))

    @property
    def step(self) -> float:
        return (self.tau_end - self.tau_start) / self.n_steps


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class PopulationTrace:
    """Sampled populations; column ``j`` belongs to eigenlevel ``levels[j]``."""

    taus: np.ndarray
    populations: np.ndarray
    levels: tuple[int, ...]
    final_state: np.ndarray
    norm_drift: float

    def level(self, index: int) -> np.ndarray:
        try:
            return self.populations[:, self.levels.index(index)]
        except ValueError:
            raise RangeError(f"level {index} was not propagated") from None

    @property
    def doublet_total(self) -> np.ndarray:
        return self.level(GROUND) + self.level(EXCITED)


_NAMED = {"0+": GROUND, "0-": EXCITED, "3+": UPPER}
_TERM = re.compile(r"([+-]?)\s*(\d+[+-](?!\d)|\d+)")


def level_index(label: str | int) -> int:
    """Eigenlevel index for ``"n+"``/``"n-"`` doublet labels or a raw index."""
    if isinstance(label, (int, np.integer)):
        return int(label)
    text = str(label).strip()
    if text in _NAMED:
        return _NAMED[text]
    m = re.fullmatch(r"(\d+)([+-])", text)
    if m:
        return 2 * int(m.group(1)) + (0 if m.group(2) == "+" else 1)
    if text.isdigit():
        return int(text)
    raise LevelNameError(f"unknown level label {label!r}")


def parse_superposition(label: str) -> list[tuple[int, float]]:
    """Split ``"(0+ + 0-)/sqrt2"``-style labels into ``(index, sign)`` terms.

    Terms must be separated by whitespace; the overall normalisation written
    in the label is ignored and the result is renormalised by the caller.
    """
    text = str(label).strip()
    text = re.sub(r"/\s*(√|sqrt)\s*\(?\s*\d+\s*\)?\s*$", "", text).strip()
    if text.startswith("(") and text.endswith(")"):
        text = text[1:-1]
    terms = []
    pos = 0
    while pos < len(text):
        m = _TERM.match(text, pos)
        if not m or m.end() == pos or (terms and not m.group(1)):
            raise LevelNameError(f"cannot parse state {label!r}")
        sign = -1.0 if m.group(1) == "-" else 1.0
        terms.append((level_index(m.group(2)), sign))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    if not terms:
        raise LevelNameError(f"empty state label {label!r}")
    return terms


def prepare_level(s: EigenSolution, label: str | int) -> StateVector:
    """Unit vector (or equal-weight superposition) over the retained levels."""
    if isinstance(label, (int, np.integer)):
        terms = [(int(label), 1.0)]
    else:
        terms = parse_superposition(label)
    amps = np.zeros(s.n_levels, dtype=complex)
    for k, sign in terms:
        if not 0 <= k < s.n_levels:
            raise RangeError(f"level {k} not among the {s.n_levels} retained levels")
        amps[k] += sign
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise LevelNameError(f"state {label!r} has zero norm")
    return StateVector(amps / norm)


def select_levels(n_levels: int, available: int) -> tuple[int, ...]:
    """Levels propagated for a given truncation.

    ``3`` means the subspace {0+, 0-, 3+}; larger counts keep the lowest
    ``n_levels`` eigenstates, which must include 3+.
    """
    if n_levels > available:
        raise RangeError(f"n_levels={n_levels} exceeds the {available} available levels")
    if n_levels == 3:
        return (GROUND, EXCITED, UPPER)
    if n_levels <= UPPER:
        raise RangeError("n_levels must be 3 or at least 7 so that 3+ is included")
    return tuple(range(n_levels))


def _magnus_generator(energies, coupling, omega_L, tau, h):
    t1 = tau + (0.5 - _GAUSS) * h
    t2 = tau + (0.5 + _GAUSS) * h
    h1 = (np.diag(energies) - math.cos(t1) * coupling) / omega_L
    h2 = (np.diag(energies) - math.cos(t2) * coupling) / omega_L
    return 0.5 * h * (h1 + h2) - 1j * (math.sqrt(3) / 12) * h * h * (h2 @ h1 - h1 @ h2)


def _expm_hermitian(g):
    w, v = np.linalg.eigh(g)
    return (v * np.exp(-1j * w)) @ v.conj().T


def propagate(
    energies: np.ndarray,
    coupling: np.ndarray,
    omega_L: float,
    psi0: np.ndarray,
    tau_start: float,
    h: float,
    n_steps: int,
    stride: int = 1,
):
    """Advance ``psi0`` by ``n_steps`` of size ``h`` (which may be negative).

    Returns ``(taus, states)`` sampled every ``stride`` steps, always
    including the first and last points.
    """
    energies = np.asarray(energies, dtype=float)
    coupling = np.asarray(coupling, dtype=float)
    psi = np.array(psi0, dtype=complex)
    if stride < 1:
        raise ConfigError("stride must be at least 1")

    per_cycle = TWO_PI / abs(h)
    offset = tau_start / h
    periodic = (
        abs(per_cycle - round(per_cycle)) < 1e-9 * per_cycle
        and abs(offset - round(offset)) < 1e-9 * max(1.0, abs(offset))
        and round(per_cycle) <= 100_000
    )
    cache: dict[int, np.ndarray] = {}

    def step_unitary(k):
        if periodic:
            key = (round(offset) + k) % round(per_cycle)
            u = cache.get(key)
            if u is None:
                u = _expm_hermitian(_magnus_generator(energies, coupling, omega_L, key * h, h))
                cache[key] = u
            return u
        return _expm_hermitian(_magnus_generator(energies, coupling, omega_L, tau_start + k * h, h))

    taus = [tau_start]
    states = [psi.copy()]
    for k in range(n_steps):
        psi = step_unitary(k) @ psi
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            taus.append(tau_start + (k + 1) * h)
            states.append(psi.copy())
    return np.array(taus), np.array(states)


def integrate(
    energies: np.ndarray,
    coupling: np.ndarray,
    omega_L: float,
    psi0: np.ndarray,
    grid: TimeGrid,
    stride: int = 20,
    levels: Sequence[int] | None = None,
    norm_tol: float = NORM_TOL,
) -> PopulationTrace:
    """Integrate ``diag(energies) - coupling cos(tau)`` and record populations."""
    psi0 = np.asarray(psi0, dtype=complex)
    n0 = np.linalg.norm(psi0)
    if abs(n0 - 1) > norm_tol:
        raise ConfigError(f"initial state is not normalized (norm {n0:.12f})")
    taus, states = propagate(
        energies, coupling, omega_L, psi0, grid.tau_start, grid.step, grid.n_steps, stride
    )
    pops = np.abs(states) ** 2
    drift = float(np.max(np.abs(pops.sum(axis=1) - n0**2)))
    if drift > norm_tol:
        raise StepSizeError(
            f"norm drift {drift:.2e} exceeds {norm_tol:.0e}; reduce dtau"
        )
    return PopulationTrace(
        taus=taus,
        populations=pops,
        levels=tuple(levels) if levels is not None else tuple(range(len(psi0))),
        final_state=states[-1],
        norm_drift=drift,
    )


def evolve(
    s: EigenSolution,
    d: DriveParams,
    initial: StateVector,
    g: TimeGrid = TimeGrid(),
    n_levels: int = 20,
    stride: int = 20,
) -> PopulationTrace:
    """Exact driven dynamics of the double well truncated to ``n_levels``."""
    levels = select_levels(n_levels, s.n_levels)
    idx = np.array(levels)
    amps = np.asarray(initial.amplitudes)
    if amps.shape != (s.n_levels,):
        raise ConfigError(f"initial state has {amps.size} amplitudes, expected {s.n_levels}")
    outside = np.delete(np.abs(amps) ** 2, idx).sum()
    if outside > 1e-12:
        raise RangeError("initial state has weight outside the propagated levels")
    coupling = d.lam * s.dipole[np.ix_(idx, idx)]
    return integrate(s.energies[idx], coupling, d.omega_L, amps[idx], g, stride, levels)
