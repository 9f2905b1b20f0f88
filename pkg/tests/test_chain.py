import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from qwire.chain import (
    ChainSpec,
    build_oqs_hamiltonian,
    diagonalize_oqs,
    mirror_amplitude,
    oqs_propagator,
)

PI = math.pi


class TestChainSpec:
    def test_defaults(self):
        spec = ChainSpec(5)
        assert spec.coupling == PI
        assert spec.transfer_time == 0.5
        assert not spec.omega_is_infinite

    def test_transfer_time_scales_with_coupling(self):
        # Half the free-evolution period.
        assert ChainSpec(4, coupling=2 * PI).transfer_time == pytest.approx(0.25)

    def test_infinite_omega_marker(self):
        assert ChainSpec(4, omega=math.inf).omega_is_infinite

    @pytest.mark.parametrize("kwargs", [
        {"n_sites": 1},
        {"n_sites": 4, "coupling": 0.0},
        {"n_sites": 4, "coupling": -1.0},
        {"n_sites": 4, "omega": -0.5},
        {"n_sites": 4, "tau": 0.0},
    ])
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            ChainSpec(**kwargs)


class TestBuildHamiltonian:
    def test_two_sites(self):
        h = build_oqs_hamiltonian(ChainSpec(2))
        assert np.allclose(h, [[0.0, PI], [PI, 0.0]])

    def test_three_sites_offdiagonal(self):
        h = build_oqs_hamiltonian(ChainSpec(3))
        assert h[0, 1] == pytest.approx(PI * math.sqrt(2))
        assert h[1, 2] == pytest.approx(PI * math.sqrt(2))
        assert np.allclose(np.diag(h), 0.0)

    def test_six_site_spectrum_is_odd_ladder(self):
        h = build_oqs_hamiltonian(ChainSpec(6))
        expected = PI * np.array([-5, -3, -1, 1, 3, 5])
        assert np.abs(np.sort(np.linalg.eigvalsh(h)) - expected).max() < 1e-9


class TestDiagonalize:
    def test_two_site_modes_by_hand(self):
        basis = diagonalize_oqs(build_oqs_hamiltonian(ChainSpec(2)))
        assert np.allclose(basis.energies, [-PI, PI])
        r = 1.0 / math.sqrt(2.0)
        assert np.allclose(basis.vectors[0], [r, -r])
        assert np.allclose(basis.vectors[1], [r, r])

    @pytest.mark.parametrize("n", range(2, 11))
    def test_energy_ladder(self, n):
        basis = diagonalize_oqs(build_oqs_hamiltonian(ChainSpec(n)))
        expected = np.array([(2 * k - n - 1) * PI for k in range(1, n + 1)])
        assert np.abs(basis.energies - expected).max() < 1e-9

    @given(st.integers(min_value=2, max_value=9))
    @settings(max_examples=8, deadline=None)
    def test_orthogonality_and_reconstruction(self, n):
        h = build_oqs_hamiltonian(ChainSpec(n))
        basis = diagonalize_oqs(h)
        b = basis.vectors
        assert np.abs(b @ b.T - np.eye(n)).max() < 1e-10
        assert np.abs(b.T @ np.diag(basis.energies) @ b - h).max() < 1e-9

    @pytest.mark.parametrize("n", [3, 6, 9])
    def test_sign_convention(self, n):
        basis = diagonalize_oqs(build_oqs_hamiltonian(ChainSpec(n)))
        for row in basis.vectors:
            mags = np.abs(row)
            lead = np.flatnonzero(mags >= mags.max() * (1 - 1e-9))[0]
            assert row[lead] > 0

    def test_deterministic(self):
        h = build_oqs_hamiltonian(ChainSpec(7))
        first = diagonalize_oqs(h)
        second = diagonalize_oqs(h.copy())
        assert np.array_equal(first.vectors, second.vectors)

    def test_rejects_non_tridiagonal(self):
        bad = np.ones((4, 4))
        with pytest.raises(ValueError, match="tridiagonal"):
            diagonalize_oqs(bad)

    def test_rejects_asymmetric(self):
        bad = np.diag([1.0, 2.0, 3.0])
        bad[0, 1] = 1.0
        with pytest.raises(ValueError, match="symmetric"):
            diagonalize_oqs(bad)


class TestPropagator:
    def test_time_zero_is_identity(self):
        spec = ChainSpec(5)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        assert np.abs(oqs_propagator(spec, basis, 0.0) - np.eye(5)).max() < 1e-12

    @pytest.mark.parametrize("n", [2, 3, 4, 6])
    def test_matches_matrix_exponential(self, n):
        # Independent route: dense expm of the tridiagonal block.
        spec = ChainSpec(n)
        h = build_oqs_hamiltonian(spec)
        basis = diagonalize_oqs(h)
        for t in (0.17, 0.5, 1.3):
            direct = scipy.linalg.expm(-1j * h * t)
            assert np.abs(oqs_propagator(spec, basis, t) - direct).max() < 1e-9

    @pytest.mark.parametrize("n", range(2, 11))
    def test_mirror_property(self, n):
        spec = ChainSpec(n)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        u = oqs_propagator(spec, basis, 0.5)
        for j in range(n):
            assert abs(abs(u[n - 1 - j, j]) - 1.0) < 1e-9

    def test_five_site_end_to_end_amplitude(self):
        spec = ChainSpec(5)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        u = oqs_propagator(spec, basis, 0.5)
        assert abs(abs(u[4, 0]) - 1.0) < 1e-9

    def test_four_site_amplitude_is_imaginary_unit(self):
        # Even chains transfer with a quarter-turn phase, not a bare sign:
        # every eigenphase at t = 1/2 is +-i, so the amplitude is purely
        # imaginary.  Verified against brute-force expm above.
        spec = ChainSpec(4)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        u = oqs_propagator(spec, basis, 0.5)
        assert u[3, 0] == pytest.approx(1j, abs=1e-9)


class TestMirrorAmplitude:
    @pytest.mark.parametrize("n", range(2, 10))
    def test_quarter_turn_rule(self, n):
        # The end-to-end transfer phase is (-i)**(N-1).
        spec = ChainSpec(n)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        assert mirror_amplitude(spec, basis, 1) == pytest.approx(
            (-1j) ** (n - 1), abs=1e-9)

    def test_adjacent_sites_share_the_phase(self):
        # Sites 1 and 2 mirror with the same phase, so the two-site encoding
        # sees no relative deformation.
        for n in range(3, 9):
            spec = ChainSpec(n)
            basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
            ratio = (mirror_amplitude(spec, basis, 1)
                     * np.conj(mirror_amplitude(spec, basis, 2)))
            assert ratio == pytest.approx(1.0, abs=1e-9)

    def test_site_out_of_range(self):
        spec = ChainSpec(3)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        with pytest.raises(ValueError):
            mirror_amplitude(spec, basis, 4)
