"""Shared test utilities, including an independent matrix-exponential
oracle for the master equation.

The oracle builds the superoperator from the master-equation formula with
plain Kronecker products and exponentiates it with scipy; it shares no
code with the integrator it checks.
"""

import numpy as np
import scipy.linalg

from qwire.chain import ChainSpec, build_oqs_hamiltonian, diagonalize_oqs
from qwire.fock import ModeOperators


def chain_problem(n, omega=0.0):
    spec = ChainSpec(n, omega=omega)
    basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
    return spec, basis, ModeOperators.build(spec, basis)


def dense_superoperator(modes, gammas, pumps, hamiltonian=None):
    """Master-equation superoperator on row-major flattened operators."""
    dim = modes[0].shape[0]
    eye = np.eye(dim)
    total = np.zeros((dim * dim, dim * dim), dtype=complex)
    if hamiltonian is not None:
        total += -1j * (np.kron(hamiltonian, eye)
                        - np.kron(eye, hamiltonian.T))
    for c, gamma, pump in zip(modes, gammas, pumps):
        cd = c.conj().T
        cdc = cd @ c
        total += gamma * (np.kron(c, c.conj())
                          - 0.5 * np.kron(cdc, eye)
                          - 0.5 * np.kron(eye, cdc.T))
        ccd = c @ cd
        total += gamma * pump * (np.kron(cd, cd.conj())
                                 - 0.5 * np.kron(ccd, eye)
                                 - 0.5 * np.kron(eye, ccd.T))
    return total


def expm_evolve(x0, t, modes, gammas, pumps, hamiltonian=None):
    """Oracle evolution by direct exponentiation of the superoperator."""
    superop = dense_superoperator(modes, gammas, pumps, hamiltonian)
    flat = scipy.linalg.expm(superop * t) @ x0.reshape(-1)
    return flat.reshape(x0.shape)


def random_density(rng, dim):
    mat = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = mat @ mat.conj().T
    return rho / np.trace(rho)


def random_state(rng, dim):
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return vec / np.linalg.norm(vec)
