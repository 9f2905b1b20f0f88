"""Engineered-coupling chain and its single-excitation eigenbasis.

The chain couples neighboring sites with strengths J*sqrt(i*(N-i)), which
makes the free evolution periodic and mirrors every single-excitation state
about the chain center at half the period.  The single-excitation block
("one quasi-particle subspace", OQS) is an N x N symmetric tridiagonal
matrix whose eigenvalues form the exact ladder (2k - N - 1) * J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class ChainSpec:
    """Chain geometry and energy scales.

    omega is the on-site excitation energy; ``math.inf`` selects the
    infinite-limit regime in which only the rescaled temperature survives.
    tau defaults to half the free-evolution period, pi / (2 J).
    """

    n_sites: int
    coupling: float = math.pi
    omega: float = 0.0
    tau: float | None = None

    def __post_init__(self):
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"chain needs at least 2 sites, got {self.n_sites}")
        if not self.coupling > 0:
            raise ValueError(f"coupling must be positive, got {self.coupling}")
        if math.isnan(self.omega) or self.omega < 0:
            raise ValueError(f"omega must be >= 0 or inf, got {self.omega}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    @property
    def omega_is_infinite(self) -> bool:
        return math.isinf(self.omega)

    @property
    def transfer_time(self) -> float:
        if self.tau is not None:
            return self.tau
        return math.pi / (2.0 * self.coupling)

    @property
    def dim(self) -> int:
        """Dimension of the full spin space."""
        return 1 << self.n_sites


@dataclass(frozen=True)
class ModeBasis:
    """Eigenmodes of the single-excitation block.

    energies are sorted ascending.  Row k of ``vectors`` holds the site
    amplitudes of mode k, so ``vectors @ vectors.T == identity`` and
    ``vectors.T @ diag(energies) @ vectors`` reconstructs the block.
    Sign convention: in every row the first entry of largest magnitude
    is positive, which makes the decomposition deterministic.
    """

    energies: np.ndarray
    vectors: np.ndarray

    @property
    def n_sites(self) -> int:
        return len(self.energies)


def build_oqs_hamiltonian(spec: ChainSpec) -> np.ndarray:
    """Symmetric tridiagonal single-excitation block, zero diagonal.

    The on-site energy omega is a uniform shift of the whole ladder and is
    applied downstream (rates, full Hamiltonian), never here.
    """
    n = spec.n_sites
    i = np.arange(1, n)
    off = spec.coupling * np.sqrt(i * (n - i))
    h = np.zeros((n, n))
    h[i - 1, i] = off
    h[i, i - 1] = off
    return h


def _check_tridiagonal(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    if not np.allclose(h, h.T, atol=1e-12):
        raise ValueError("matrix is not symmetric")
    diag = np.diag(h).copy()
    off = np.diag(h, 1).copy()
    rest = h - np.diag(diag) - np.diag(off, 1) - np.diag(off, -1)
    if np.abs(rest).max() > 1e-12:
        raise ValueError("matrix is not tridiagonal")
    return diag, off


def diagonalize_oqs(h_oqs: np.ndarray) -> ModeBasis:
    """Diagonalize the single-excitation block into a ModeBasis."""
    diag, off = _check_tridiagonal(h_oqs)
    if len(diag) == 1:
        raise ValueError("single-site block has no transfer problem")
    try:
        energies, columns = scipy.linalg.eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as err:  # pragma: no cover - LAPACK failure
        raise np.linalg.LinAlgError(
            f"tridiagonal eigensolver failed to converge: {err}"
        ) from err
    vectors = columns.T.copy()
    for row in vectors:
        mags = np.abs(row)
        # First entry within roundoff of the row maximum; plain argmax would
        # let floating-point noise break the mirror-symmetric ties.
        lead = int(np.flatnonzero(mags >= mags.max() * (1.0 - 1e-9))[0])
        if row[lead] < 0:
            row *= -1.0
    return ModeBasis(energies=energies, vectors=vectors)


def oqs_propagator(spec: ChainSpec, basis: ModeBasis, t: float) -> np.ndarray:
    """Free single-excitation propagator exp(-i H_OQS t) as an N x N unitary."""
    phases = np.exp(-1j * basis.energies * t)
    return (basis.vectors.T * phases) @ basis.vectors


def mirror_amplitude(spec: ChainSpec, basis: ModeBasis, site: int) -> complex:
    """Transfer amplitude from ``site`` to its mirror image at t = tau.

    At the transfer time the magnitude is 1 for every site; the phase is
    (-i)**(N-1) for the end sites, i.e. real only for odd chains.
    """
    n = spec.n_sites
    if not 1 <= site <= n:
        raise ValueError(f"site {site} outside 1..{n}")
    u = oqs_propagator(spec, basis, spec.transfer_time)
    return complex(u[n - site, site - 1])
