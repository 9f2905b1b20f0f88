import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qwire.chain import ChainSpec, ModeBasis, build_oqs_hamiltonian, diagonalize_oqs
from qwire.fock import (
    ModeOperators,
    antiparallel_projector,
    build_full_hamiltonian,
    mode_annihilator,
    mode_occupation_transform,
    site_annihilator,
    site_number,
    total_number,
    vacuum_state,
)
from helpers import chain_problem

PI = math.pi


def anticommutator(a, b):
    return a @ b + b @ a


class TestSiteOperators:
    def test_single_site_matrix(self):
        op = site_annihilator(1, 1)
        assert np.array_equal(op, [[0, 1], [0, 0]])

    def test_two_site_car_entrywise(self):
        a1 = site_annihilator(1, 2)
        a2 = site_annihilator(2, 2)
        eye = np.eye(4)
        assert np.abs(anticommutator(a1, a2.conj().T)).max() == 0
        assert np.abs(anticommutator(a1, a1.conj().T) - eye).max() == 0
        assert np.abs(anticommutator(a1, a2)).max() == 0

    def test_string_sign_from_occupied_left_site(self):
        # Site ordering |n1 n2 n3>: removing the excitation at site 2 of
        # |110> passes over the occupied site 1 and picks up a minus sign.
        op = site_annihilator(2, 3)
        src = 0b011  # n1=1, n2=1, n3=0
        dst = 0b001  # n1=1
        assert op[dst, src] == -1
        column = np.flatnonzero(op[:, src])
        assert list(column) == [dst]

    @given(st.integers(min_value=1, max_value=5), st.data())
    @settings(max_examples=25, deadline=None)
    def test_car_randomized(self, n, data):
        i = data.draw(st.integers(min_value=1, max_value=n))
        j = data.draw(st.integers(min_value=1, max_value=n))
        a_i = site_annihilator(i, n)
        a_j = site_annihilator(j, n)
        dim = 1 << n
        assert np.abs(anticommutator(a_i, a_j)).max() < 1e-10
        target = np.eye(dim) if i == j else np.zeros((dim, dim))
        assert np.abs(anticommutator(a_i, a_j.conj().T) - target).max() < 1e-10

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            site_annihilator(4, 3)


class TestModeOperators:
    def test_identity_mixing_returns_site_operator(self):
        basis = ModeBasis(energies=np.zeros(3), vectors=np.eye(3))
        for k in range(1, 4):
            assert np.array_equal(mode_annihilator(basis, k),
                                  site_annihilator(k, 3))

    def test_two_site_first_mode(self):
        _, basis, _ = chain_problem(2)
        expected = (site_annihilator(1, 2) - site_annihilator(2, 2)) / math.sqrt(2)
        assert np.abs(mode_annihilator(basis, 1) - expected).max() < 1e-12

    @pytest.mark.parametrize("n", [2, 4, 5])
    def test_modes_preserve_car(self, n):
        _, basis, ops = chain_problem(n)
        eye = np.eye(1 << n)
        for k in range(n):
            for l in range(k, n):
                mixed = anticommutator(ops.mode_ann[k], ops.mode_ann[l].conj().T)
                target = eye if k == l else 0.0
                assert np.abs(mixed - target).max() < 1e-10
                assert np.abs(anticommutator(ops.mode_ann[k],
                                             ops.mode_ann[l])).max() < 1e-10

    def test_mode_out_of_range(self):
        _, basis, _ = chain_problem(3)
        with pytest.raises(ValueError):
            mode_annihilator(basis, 4)


class TestFullHamiltonian:
    @pytest.mark.parametrize("n,omega", [(2, 0.0), (3, 1.7), (5, 2 * PI), (6, 4.0)])
    def test_mode_and_spin_forms_agree(self, n, omega):
        spec = ChainSpec(n, omega=omega)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        hm = build_full_hamiltonian(spec, basis, form="mode")
        hs = build_full_hamiltonian(spec, basis, form="spin")
        assert np.abs(hm - hs).max() < 1e-9

    def test_two_site_zero_omega_eigenvalues(self):
        # Two modes at -pi and pi, occupations in {0,1}^2.
        spec = ChainSpec(2, omega=0.0)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        h = build_full_hamiltonian(spec, basis)
        assert np.allclose(np.sort(np.linalg.eigvalsh(h)), [-PI, 0.0, 0.0, PI],
                           atol=1e-9)

    def test_vacuum_is_annihilated(self):
        spec = ChainSpec(4, omega=3.3)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        h = build_full_hamiltonian(spec, basis)
        assert np.abs(h @ vacuum_state(4)).max() < 1e-9

    def test_number_conservation(self):
        spec = ChainSpec(4, omega=1.1)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        h = build_full_hamiltonian(spec, basis)
        n_op = total_number(4)
        assert np.abs(h @ n_op - n_op @ h).max() < 1e-10

    def test_ground_state_crossing_at_five_pi(self):
        # For six sites the vacuum stops being the ground state once the
        # on-site energy drops below the deepest mode at -5 pi.
        for omega, vacuum_is_ground in ((5.01 * PI, True), (4.99 * PI, False)):
            spec = ChainSpec(6, omega=omega)
            basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
            h = build_full_hamiltonian(spec, basis)
            energies = np.linalg.eigvalsh(h)
            assert (abs(energies.min()) < 1e-9) == vacuum_is_ground

    def test_rejects_infinite_omega(self):
        spec = ChainSpec(3, omega=math.inf)
        basis = diagonalize_oqs(build_oqs_hamiltonian(ChainSpec(3)))
        with pytest.raises(ValueError, match="finite omega"):
            build_full_hamiltonian(spec, basis)

    def test_rejects_mismatched_sizes(self):
        spec = ChainSpec(3)
        basis = diagonalize_oqs(build_oqs_hamiltonian(ChainSpec(4)))
        with pytest.raises(ValueError):
            build_full_hamiltonian(spec, basis)


class TestOperatorBundle:
    def test_hamiltonian_diagonal_in_occupation_basis(self):
        spec = ChainSpec(4, omega=2.0)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        ops = ModeOperators.build(spec, basis)
        transform = mode_occupation_transform(ops)
        assert np.abs(transform @ transform.conj().T - np.eye(16)).max() < 1e-10
        rotated = transform.conj().T @ ops.hamiltonian() @ transform
        off = rotated - np.diag(np.diag(rotated))
        assert np.abs(off).max() < 1e-9
        occupations = ((np.arange(16)[:, None] >> np.arange(4)) & 1)
        expected = occupations @ (basis.energies + 2.0)
        assert np.abs(np.diag(rotated).real - expected).max() < 1e-9


class TestProjectors:
    def test_antiparallel_examples(self):
        p = antiparallel_projector((1, 2), 3)
        assert p[0b001, 0b001] == 1  # |100>
        assert p[0b000, 0b000] == 0
        assert p[0b011, 0b011] == 0  # aligned pair
        assert np.trace(p).real == pytest.approx(4.0)

    def test_site_number(self):
        n2 = site_number(2, 2)
        assert np.allclose(np.diag(n2), [0, 0, 1, 1])

    def test_rejects_duplicate_sites(self):
        with pytest.raises(ValueError):
            antiparallel_projector((2, 2), 3)
