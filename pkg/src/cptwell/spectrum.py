"""Field-free symmetric quartic double well.

The scaled potential is ``V(X) = -X**2/4 + X**4/(64*alpha)``, with minima at
``X = +-sqrt(8*alpha)``, depth ``-alpha`` and unit curvature there.  The
Hamiltonian is expanded in harmonic-oscillator eigenfunctions centred at the
barrier; position powers are built from ladder operators on a padded basis so
that every retained matrix element is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BasisInadequacyError, ConfigError, NumericalError, RangeError

PARITY_LEAKAGE_TOL = 1e-8
MIN_BASIS = 16


@dataclass(frozen=True)
class PotentialParams:
    alpha: float = 1.735

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")

    def potential(self, x):
        x = np.asarray(x, dtype=float)
        return -x**2 / 4 + x**4 / (64 * self.alpha)

    @property
    def well_minima(self) -> tuple[float, float]:
        xm = math.sqrt(8 * self.alpha)
        return -xm, xm


@dataclass(frozen=True)
class BasisConfig:
    n_basis: int = 120
    basis_frequency: float = 1.0

    def __post_init__(self):
        if self.n_basis <= 0 or not self.basis_frequency > 0:
            raise ConfigError(
                f"n_basis and basis_frequency must be positive "
                f"(got {self.n_basis}, {self.basis_frequency})"
            )
        if self.n_basis < MIN_BASIS:
            raise BasisInadequacyError(
                f"n_basis={self.n_basis} is below the minimum of {MIN_BASIS}"
            )


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class EigenSolution:
    """Lowest eigenpairs of the field-free Hamiltonian.

    ``vectors`` holds expansion coefficients column-wise; ``dipole`` is
    ``<i|X|j>`` between retained levels with the sign convention applied.
    """

    energies: np.ndarray
    parities: np.ndarray
    dipole: np.ndarray
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("energies", "parities", "dipole", "vectors"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n_levels(self) -> int:
        return len(self.energies)


def ladder_operators(n: int) -> np.ndarray:
    """Annihilation operator on an ``n``-dimensional oscillator basis."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def position_matrices(b: BasisConfig, pad: int = 4) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``X``, ``X**2`` and ``X**4`` on the first ``n_basis`` functions.

    Powers are formed on a basis ``pad`` functions larger and then cut, which
    makes them exact (not products of truncated matrices).
    """
    n = b.n_basis + pad
    a = ladder_operators(n)
    x = (a + a.T) / math.sqrt(2 * b.basis_frequency)
    x2 = x @ x
    x4 = x2 @ x2
    m = b.n_basis
    return x[:m, :m], x2[:m, :m], x4[:m, :m]


def build_hamiltonian(p: PotentialParams = PotentialParams(), b: BasisConfig = BasisConfig()) -> np.ndarray:
    """Matrix of ``P**2/2 - X**2/4 + X**4/(64 alpha)`` in the oscillator basis."""
    n = b.n_basis + 4
    a = ladder_operators(n)
    w = b.basis_frequency
    # P = i sqrt(w/2) (a^+ - a)
    d = a.T - a
    p2 = -(w / 2) * (d @ d)
    x = (a + a.T) / math.sqrt(2 * w)
    x2 = x @ x
    h = p2 / 2 - x2 / 4 + (x2 @ x2) / (64 * p.alpha)
    m = b.n_basis
    h = h[:m, :m]
    return (h + h.T) / 2


def diagonalize(h: np.ndarray, n_levels: int, position: np.ndarray, eigh=np.linalg.eigh) -> EigenSolution:
    """Lowest ``n_levels`` eigenpairs of ``h`` with parities and dipoles.

    ``position`` is the ``X`` matrix in the same expansion basis.  Signs are
    fixed so that ``dipole[k, k+1] >= 0``; the global sign of the ground
    state makes its largest coefficient positive.  ``eigh`` may be swapped
    for another symmetric eigensolver with the same call signature.
    """
    h = np.asarray(h, dtype=float)
    dim = h.shape[0]
    if h.shape != (dim, dim) or position.shape != h.shape:
        raise ConfigError("hamiltonian and position must be square and of equal size")
    if not 0 < n_levels <= dim:
        raise BasisInadequacyError(f"cannot retain {n_levels} levels from a {dim}-function basis")
    if not np.allclose(h, h.T, rtol=0, atol=1e-12 * max(1.0, np.abs(h).max())):
        raise ConfigError("hamiltonian is not symmetric")

    try:
        energies, vecs = eigh(h)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    energies = energies[:n_levels]
    vecs = vecs[:, :n_levels].copy()
    if np.any(np.diff(energies) <= 0):
        raise NumericalError("eigenvalues are not strictly increasing")

    even = np.arange(dim) % 2 == 0
    w_even = np.sum(vecs[even] ** 2, axis=0)
    w_odd = np.sum(vecs[~even] ** 2, axis=0)
    parities = np.where(w_even >= w_odd, 1, -1)
    leakage = np.minimum(w_even, w_odd)
    if leakage.max() > PARITY_LEAKAGE_TOL:
        k = int(leakage.argmax())
        raise BasisInadequacyError(
            f"level {k} has cross-parity weight {leakage[k]:.2e}; enlarge the basis"
        )
    # project out the residual leakage so the selection rule holds exactly
    vecs[~even[:, None] & (parities[None, :] == 1)] = 0.0
    vecs[even[:, None] & (parities[None, :] == -1)] = 0.0
    vecs /= np.linalg.norm(vecs, axis=0)

    if vecs[np.abs(vecs[:, 0]).argmax(), 0] < 0:
        vecs[:, 0] *= -1
    for k in range(1, n_levels):
        link = vecs[:, k - 1] @ position @ vecs[:, k]
        if abs(link) > 1e-12:
            if link < 0:
                vecs[:, k] *= -1
        elif vecs[np.abs(vecs[:, k]).argmax(), k] < 0:
            vecs[:, k] *= -1

    dipole = vecs.T @ position @ vecs
    dipole = (dipole + dipole.T) / 2
    dipole[parities[:, None] == parities[None, :]] = 0.0
    return EigenSolution(energies=energies, parities=parities, dipole=dipole, vectors=vecs)


def solve(
    p: PotentialParams = PotentialParams(),
    b: BasisConfig = BasisConfig(),
    n_levels: int = 20,
) -> EigenSolution:
    """Build and diagonalize in one call."""
    x, _, _ = position_matrices(b)
    return diagonalize(build_hamiltonian(p, b), n_levels, x)


def doublet_splitting(s: EigenSolution, n: int = 0) -> float:
    """Energy gap ``E(2n+1) - E(2n)`` of the ``n``-th tunnelling doublet."""
    if n < 0 or 2 * n + 1 >= s.n_levels:
        raise RangeError(f"doublet {n} needs {2 * n + 2} levels, have {s.n_levels}")
    return float(s.energies[2 * n + 1] - s.energies[2 * n])


def doublets_below_barrier(s: EigenSolution) -> int:
    """Complete doublets with both members under the barrier top (V = 0)."""
    return int(np.count_nonzero(s.energies < 0)) // 2
