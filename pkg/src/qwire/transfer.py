"""Logical encodings, read-out semantics, and the induced qubit channel.

Two encodings are compared.  Scheme "a" stores the qubit in the span of
the vacuum and the single excitation at site 1; scheme "c" stores it in
the excitations at sites 1 and 2 and is decoded through the anti-parallel
projector on the mirror pair, with the aligned weight sent to the
maximally mixed state by the read-out head.

Because every jump operator is an eigenoperator of the Hamiltonian, the
free evolution commutes with the dissipation exactly.  The default
pipeline therefore integrates the dissipative part alone and reads the
un-mirrored image at the write sites ("image" frame); the exact mirror
maps those reads onto the far end of the chain up to a known phase, which
the receiver corrects.  A cross-check mode keeps the Hamiltonian
commutator on and decodes at the far end instead, where the transverse
reads become the string-carrying fermionic quadratures at site N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qwire.chain import ChainSpec, ModeBasis, mirror_amplitude
from qwire.dynamics import LindbladGenerator, RateModel, _integrate_converged
from qwire.fock import ModeOperators, site_annihilator, site_number

PAULIS = ("I", "X", "Y", "Z")

_SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _norm_pauli(pauli: str) -> str:
    p = str(pauli).upper()
    if p not in PAULIS:
        raise ValueError(f"unknown Pauli {pauli!r}, expected one of {PAULIS}")
    return p


def _check_scheme(scheme: str, n_sites: int) -> str:
    s = str(scheme).lower()
    if s not in ("a", "c"):
        raise ValueError(f"unknown encoding scheme {scheme!r}, expected 'a' or 'c'")
    if s == "c" and n_sites < 3:
        raise ValueError("scheme 'c' needs at least 3 sites")
    return s


@dataclass(frozen=True)
class Encoding:
    """Scheme label with its write and read site assignments."""

    scheme: str
    encode_sites: tuple[int, ...]
    decode_sites: tuple[int, ...]

    @classmethod
    def for_scheme(cls, scheme: str, n_sites: int) -> "Encoding":
        s = _check_scheme(scheme, n_sites)
        if s == "a":
            return cls(scheme=s, encode_sites=(1,), decode_sites=(n_sites,))
        return cls(scheme=s, encode_sites=(1, 2),
                   decode_sites=(n_sites, n_sites - 1))


def _logical_kets(scheme: str, n_sites: int, sites: tuple[int, ...]):
    """Full-space kets of logical |0> and |1> localized at ``sites``."""
    dim = 1 << n_sites
    if scheme == "a":
        zero = np.zeros(dim, dtype=complex)
        zero[0] = 1.0
        one = np.zeros(dim, dtype=complex)
        one[1 << (sites[0] - 1)] = 1.0
    else:
        zero = np.zeros(dim, dtype=complex)
        zero[1 << (sites[0] - 1)] = 1.0
        one = np.zeros(dim, dtype=complex)
        one[1 << (sites[1] - 1)] = 1.0
    return zero, one


def encode_operator(scheme: str, pauli: str, n_sites: int) -> np.ndarray:
    """Full-space image of a logical Pauli under the writing head."""
    s = _check_scheme(scheme, n_sites)
    p = _norm_pauli(pauli)
    enc = Encoding.for_scheme(s, n_sites)
    zero, one = _logical_kets(s, n_sites, enc.encode_sites)
    sigma = _SIGMA[p]
    return (sigma[0, 0] * np.outer(zero, zero.conj())
            + sigma[0, 1] * np.outer(zero, one.conj())
            + sigma[1, 0] * np.outer(one, zero.conj())
            + sigma[1, 1] * np.outer(one, one.conj()))


def _decode_parts(scheme: str, n_sites: int, frame: str):
    """Identity read, z read, and the logical-raising read d (|0><1| sense)."""
    enc = Encoding.for_scheme(scheme, n_sites)
    dim = 1 << n_sites
    identity = np.eye(dim, dtype=complex)
    if frame == "image":
        u, v = enc.encode_sites[0], (enc.encode_sites[1] if scheme == "c" else None)
    elif frame == "lab":
        u, v = enc.decode_sites[0], (enc.decode_sites[1] if scheme == "c" else None)
    else:
        raise ValueError(f"unknown frame {frame!r}, expected 'image' or 'lab'")
    if scheme == "a":
        z_read = identity - 2.0 * site_number(u, n_sites)
        # Transverse reads are the fermionic quadratures of the read site:
        # string-free at site 1 (image), string-carrying at site N (lab).
        # The mirror maps one into the other exactly.
        raising = site_annihilator(u, n_sites)
    else:
        z_read = site_number(u, n_sites) - site_number(v, n_sites)
        # Pair-local swap of the anti-parallel configurations; aligned
        # states are annihilated, which is exactly the head's maximally
        # mixed fallback entering only the identity row.
        a_u = site_annihilator(u, n_sites)
        a_v = site_annihilator(v, n_sites)
        raising = a_u.conj().T @ a_v
    return identity, z_read, raising


def decode_operator(scheme: str, pauli: str, n_sites: int, *,
                    frame: str = "image",
                    coherence_phase: complex = 1.0) -> np.ndarray:
    """Read-out observable whose half-trace against the evolved operator
    gives one row entry of the transfer map.

    ``coherence_phase`` multiplies the logical-raising read; passing the
    conjugated mirror phase implements the receiver's manual correction of
    the transfer phase.
    """
    s = _check_scheme(scheme, n_sites)
    p = _norm_pauli(pauli)
    identity, z_read, raising = _decode_parts(s, n_sites, frame)
    d = coherence_phase * raising
    if p == "I":
        return identity
    if p == "Z":
        return z_read
    if p == "X":
        return d + d.conj().T
    return -1j * (d - d.conj().T)


def decode_overlap(evolved: np.ndarray, scheme: str, pauli: str, *,
                   frame: str = "image",
                   coherence_phase: complex = 1.0) -> float:
    """One transfer-map entry, (1/2) Tr[D(pauli) evolved]."""
    evolved = np.asarray(evolved, dtype=complex)
    dim = evolved.shape[0]
    n_sites = dim.bit_length() - 1
    if evolved.shape != (dim, dim) or (1 << n_sites) != dim:
        raise ValueError(f"evolved operator shape {evolved.shape} is not 2**N square")
    op = decode_operator(scheme, pauli, n_sites, frame=frame,
                         coherence_phase=coherence_phase)
    value = 0.5 * np.trace(op @ evolved)
    if abs(value.imag) > 1e-7:
        raise ValueError(
            f"transfer-map entry has imaginary part {value.imag:.3e}; "
            "evolved operator is inconsistent with the decode basis"
        )
    return float(value.real)


@dataclass(frozen=True)
class PauliTransferMap:
    """Real 4x4 map acting on (I, x, y, z) Bloch components."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"transfer map must be 4x4, got {m.shape}")
        if not np.allclose(m[0], [1.0, 0.0, 0.0, 0.0], atol=1e-8):
            raise ValueError(
                f"first row {m[0]} violates trace preservation"
            )
        m = m.copy()
        m[0] = (1.0, 0.0, 0.0, 0.0)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "PauliTransferMap":
        return cls(np.eye(4))


def average_fidelity(ptm: PauliTransferMap) -> float:
    """Average fidelity over pure inputs, (1/2) + (l_xx+l_yy+l_zz)/6."""
    m = ptm.matrix
    return 0.5 + (m[1, 1] + m[2, 2] + m[3, 3]) / 6.0


def logical_output_state(ptm: PauliTransferMap, rho_in: np.ndarray) -> np.ndarray:
    """Apply the map to a 2x2 logical input state."""
    rho_in = np.asarray(rho_in, dtype=complex)
    bloch_in = np.array([1.0]
                        + [np.trace(_SIGMA[p] @ rho_in).real for p in "XYZ"])
    bloch_out = ptm.matrix @ bloch_in
    out = 0.5 * bloch_out[0] * _SIGMA["I"]
    for comp, p in zip(bloch_out[1:], "XYZ"):
        out = out + 0.5 * comp * _SIGMA[p]
    return out


def scheme_mirror_phase(spec: ChainSpec, basis: ModeBasis, scheme: str) -> complex:
    """Unit-modulus deformation the mirror imprints on the logical coherence.

    Scheme "a" compares the moving excitation against the static vacuum, so
    the full end-to-end amplitude (-i)**(N-1) appears.  Scheme "c" compares
    two excitations and only the relative phase of the two mirrored sites
    survives, which is always a sign.
    """
    s = _check_scheme(scheme, spec.n_sites)
    mu_1 = mirror_amplitude(spec, basis, 1)
    if abs(abs(mu_1) - 1.0) > 1e-6:
        raise ValueError(
            f"|transfer amplitude| = {abs(mu_1):.6f} at tau = {spec.transfer_time}; "
            "tau is not a mirror time for this chain"
        )
    if s == "a":
        return mu_1 / abs(mu_1)
    mu_2 = mirror_amplitude(spec, basis, 2)
    phase = mu_1 * np.conj(mu_2)
    return phase / abs(phase)


def transfer_channel(spec: ChainSpec, basis: ModeBasis, rates: RateModel,
                     scheme: str, *, include_hamiltonian: bool = False,
                     phase_correction: bool = True,
                     ops: ModeOperators | None = None, tol: float = 1e-10,
                     max_steps: int = 1 << 20) -> PauliTransferMap:
    """Extract the full logical channel of one transfer.

    Encodes the logical Paulis, evolves them for the transfer time under
    the master equation, and reads the map entries back out.  With the
    Hamiltonian off (default) the decode happens in the image frame; with
    it on, omega must be finite and the decode uses the physical chain end.
    """
    s = _check_scheme(scheme, spec.n_sites)
    if ops is None:
        ops = ModeOperators.build(spec, basis)
    if ops.spec.n_sites != spec.n_sites or basis.n_sites != spec.n_sites:
        raise ValueError("spec, basis, and operator dimensions disagree")
    if rates.n_modes != spec.n_sites:
        raise ValueError(
            f"rate model has {rates.n_modes} modes for {spec.n_sites} sites"
        )
    n = spec.n_sites
    mirror = scheme_mirror_phase(spec, basis, s)
    if include_hamiltonian:
        if spec.omega_is_infinite:
            raise ValueError(
                "the commutator cross-check needs a finite omega; the "
                "infinite-omega regime is defined with the free phases removed"
            )
        hamiltonian = ops.hamiltonian()
        frame = "lab"
        coherence_phase = np.conj(mirror) if phase_correction else 1.0
    else:
        hamiltonian = None
        frame = "image"
        coherence_phase = 1.0 if phase_correction else mirror

    enc_i = encode_operator(s, "I", n)
    enc_z = encode_operator(s, "Z", n)
    zero, one = _logical_kets(s, n, Encoding.for_scheme(s, n).encode_sites)
    enc_raise = np.outer(zero, one.conj())

    gen = LindbladGenerator(ops.mode_ann, rates, hamiltonian)
    stacked = np.stack([enc_i.reshape(-1), enc_z.reshape(-1),
                        enc_raise.reshape(-1)], axis=1)
    if np.all(rates.gammas == 0) and hamiltonian is None:
        final = stacked
    else:
        final, _ = _integrate_converged(gen, stacked, spec.transfer_time,
                                        tol, max_steps)
    ev_i = final[:, 0].reshape(enc_i.shape)
    ev_z = final[:, 1].reshape(enc_i.shape)
    ev_raise = final[:, 2].reshape(enc_i.shape)
    ev_x = ev_raise + ev_raise.conj().T
    ev_y = -1j * (ev_raise - ev_raise.conj().T)

    evolved = {"I": ev_i, "X": ev_x, "Y": ev_y, "Z": ev_z}
    matrix = np.empty((4, 4))
    for row, p in enumerate(PAULIS):
        for col, q in enumerate(PAULIS):
            matrix[row, col] = decode_overlap(
                evolved[q], s, p, frame=frame, coherence_phase=coherence_phase)
    return PauliTransferMap(matrix)
