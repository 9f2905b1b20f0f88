"""Quasi-fermion operators on the full spin space.

Basis convention, used everywhere: computational basis states are indexed
by bit strings, bit (j-1) of the index is the occupation of site j
(1 = spin flipped / excited), index 0 is the vacuum.  Site 1 is the least
significant bit, so its annihilator carries no string.

Site operators follow the standard fermionization: the annihilator at site
i lowers that site and multiplies by (-1) for every occupied site to its
left.  Mode operators are real orthogonal mixtures of site operators and
satisfy the same canonical anticommutation relations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from qwire.chain import ChainSpec, ModeBasis


def _occupations(dim: int, bit: int) -> np.ndarray:
    return (np.arange(dim) >> bit) & 1


def site_annihilator(site: int, n_sites: int) -> np.ndarray:
    """Quasi-fermion annihilator at ``site`` (1-based) on 2**n_sites space."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} outside 1..{n_sites}")
    dim = 1 << n_sites
    idx = np.arange(dim)
    bit = site - 1
    sources = idx[(idx >> bit) & 1 == 1]
    targets = sources ^ (1 << bit)
    string = np.bitwise_count(sources & ((1 << bit) - 1))
    signs = 1.0 - 2.0 * (string & 1)
    op = np.zeros((dim, dim), dtype=complex)
    op[targets, sources] = signs
    return op


def mode_annihilator(basis: ModeBasis, mode: int) -> np.ndarray:
    """Annihilator of eigenmode ``mode`` (1-based), sum_j b[mode,j] a_j."""
    n = basis.n_sites
    if not 1 <= mode <= n:
        raise ValueError(f"mode {mode} outside 1..{n}")
    dim = 1 << n
    op = np.zeros((dim, dim), dtype=complex)
    for j in range(1, n + 1):
        op += basis.vectors[mode - 1, j - 1] * site_annihilator(j, n)
    return op


def site_number(site: int, n_sites: int) -> np.ndarray:
    """Diagonal occupation operator of ``site``."""
    if not 1 <= site <= n_sites:
        raise ValueError(f"site {site} outside 1..{n_sites}")
    dim = 1 << n_sites
    return np.diag(_occupations(dim, site - 1).astype(complex))


def total_number(n_sites: int) -> np.ndarray:
    """Total quasi-fermion number operator (diagonal)."""
    dim = 1 << n_sites
    return np.diag(np.bitwise_count(np.arange(dim)).astype(complex))


def antiparallel_projector(sites: tuple[int, int], n_sites: int) -> np.ndarray:
    """Projector onto states where exactly one of the two sites is excited."""
    u, v = sites
    for s in (u, v):
        if not 1 <= s <= n_sites:
            raise ValueError(f"site {s} outside 1..{n_sites}")
    if u == v:
        raise ValueError("antiparallel projector needs two distinct sites")
    dim = 1 << n_sites
    diff = _occupations(dim, u - 1) ^ _occupations(dim, v - 1)
    return np.diag(diff.astype(complex))


def vacuum_state(n_sites: int) -> np.ndarray:
    vec = np.zeros(1 << n_sites, dtype=complex)
    vec[0] = 1.0
    return vec


@dataclass
class ModeOperators:
    """Cached operator set for one (spec, basis) pair.

    Building the full-space matrices once and sharing them avoids
    reconstructing Kronecker products inside sweep loops.
    """

    spec: ChainSpec
    basis: ModeBasis
    site_ann: list = field(repr=False)
    mode_ann: list = field(repr=False)
    h_zero_omega: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, spec: ChainSpec, basis: ModeBasis) -> "ModeOperators":
        if spec.n_sites != basis.n_sites:
            raise ValueError(
                f"spec has {spec.n_sites} sites but basis has {basis.n_sites}"
            )
        n = spec.n_sites
        site_ann = [site_annihilator(i, n) for i in range(1, n + 1)]
        mode_ann = []
        for k in range(n):
            op = np.zeros_like(site_ann[0])
            for j in range(n):
                op += basis.vectors[k, j] * site_ann[j]
            mode_ann.append(op)
        h0 = np.zeros_like(site_ann[0])
        for k in range(n):
            h0 += basis.energies[k] * (mode_ann[k].conj().T @ mode_ann[k])
        return cls(spec=spec, basis=basis, site_ann=site_ann, mode_ann=mode_ann,
                   h_zero_omega=h0)

    @property
    def dim(self) -> int:
        return 1 << self.spec.n_sites

    def hamiltonian(self, omega: float | None = None) -> np.ndarray:
        """Full Hamiltonian sum_k (E_k + omega) c_k^dag c_k."""
        w = self.spec.omega if omega is None else omega
        if math.isinf(w):
            raise ValueError("full Hamiltonian needs a finite omega")
        return self.h_zero_omega + w * total_number(self.spec.n_sites)


def build_full_hamiltonian(spec: ChainSpec, basis: ModeBasis,
                           form: str = "mode") -> np.ndarray:
    """Full 2**N Hamiltonian, in mode form or direct spin form.

    Both forms agree entrywise; the spin form exists as an independent
    construction for cross-checking the fermionization.
    """
    if spec.n_sites != basis.n_sites:
        raise ValueError(
            f"spec has {spec.n_sites} sites but basis has {basis.n_sites}"
        )
    if spec.omega_is_infinite:
        raise ValueError("full Hamiltonian needs a finite omega")
    n = spec.n_sites
    if form == "mode":
        return ModeOperators.build(spec, basis).hamiltonian()
    if form == "spin":
        h = np.zeros((1 << n, 1 << n), dtype=complex)
        for i in range(1, n):
            a_i = site_annihilator(i, n)
            a_next = site_annihilator(i + 1, n)
            hop = a_i.conj().T @ a_next
            h += spec.coupling * math.sqrt(i * (n - i)) * (hop + hop.conj().T)
        for i in range(1, n + 1):
            h += spec.omega * site_number(i, n)
        return h
    raise ValueError(f"unknown form {form!r}, expected 'mode' or 'spin'")


def mode_occupation_transform(ops: ModeOperators) -> np.ndarray:
    """Unitary whose columns are the mode-occupation (Slater) basis states.

    Column s is the state with modes {k : bit k of s set} occupied, built by
    applying mode creators in ascending order to the vacuum.  Conjugating a
    density matrix with this unitary exposes the populations that obey the
    classical birth-death equations.
    """
    n = ops.spec.n_sites
    dim = 1 << n
    cols = np.zeros((dim, dim), dtype=complex)
    cols[:, 0] = vacuum_state(n)
    creators = [op.conj().T for op in ops.mode_ann]
    for s in range(1, dim):
        low = (s & -s).bit_length() - 1
        cols[:, s] = creators[low] @ cols[:, s ^ (1 << low)]
    return cols
