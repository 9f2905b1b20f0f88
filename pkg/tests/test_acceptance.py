"""Acceptance suite.

One test per acceptance criterion, each printing its own PASS line with
the measured worst-case numbers (run with -s or -rA to see them inline).
The figure-class CSV outputs are generated once per session and shared
between the dominance and figure criteria.
"""

import math

import numpy as np
import pytest

from qwire.chain import (
    ChainSpec,
    build_oqs_hamiltonian,
    diagonalize_oqs,
)
from qwire.dynamics import (
    RateModel,
    evolve,
    evolve_path,
    gibbs_state,
    liouvillian_apply,
    uniform_gammas,
)
from qwire.fock import build_full_hamiltonian, vacuum_state
from qwire.transfer import average_fidelity, transfer_channel
from qwire.analysis import (
    ChannelTrajectory,
    fit_collision_exponents,
    low_temperature_discrepancy_report,
    p1_upper_bound_check,
)
from qwire.cli import main as qwire_main
from helpers import chain_problem, random_density

PI = math.pi

# Reference figure grids (the published plots print no axis values; these
# choices are embedded in every CSV header).
FIGURE_REGIMES = {
    "fig1_n6_omega_inf": (6, "inf", "uniform", "0:2:20", "0.05:1:20"),
    "fig2_n7_omega_inf": (7, "inf", "uniform", "0:2:20", "0.05:1:20"),
    "fig4_n6_omega_5.01pi": (6, repr(5.01 * PI), "quadratic",
                             "0:2:20", "0.00025:0.005:20"),
    "fig5_n6_omega_4pi": (6, repr(4.0 * PI), "quadratic",
                          "0:1:20", "0.0005:0.01:20"),
    "fig6_n6_omega_0": (6, "0", "quadratic", "0:0.15:20", "0.001:0.02:20"),
}


def emit(line):
    print(line, flush=True)


def parse_csv(path):
    header, rows = None, []
    for line in path.read_text().splitlines():
        if line.startswith("#") or not line:
            continue
        if header is None:
            header = line.split(",")
            continue
        rows.append([float(v) for v in line.split(",")])
    return header, np.asarray(rows)


@pytest.fixture(scope="module")
def figure_dir(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("figures")
    for name, (n, omega, rates, betas, gammas) in FIGURE_REGIMES.items():
        for kind in ("threshold", "sweep"):
            code = qwire_main([
                kind, "--n", str(n), "--omega", omega, "--rates", rates,
                "--grid", f"beta={betas},gamma_tau={gammas}",
                "--out", str(outdir / f"{name}_{kind}.csv")])
            assert code == 0, f"{name} {kind} failed"
    for n in (6, 7):
        code = qwire_main([
            "sweep", "--n", str(n), "--omega", "inf",
            "--grid", "beta=0:0:1,gamma_tau=0.025:1:40",
            "--out", str(outdir / f"fig3_diff_n{n}.csv")])
        assert code == 0
    return outdir


def test_criterion_1_spectrum_ladder():
    worst = 0.0
    for n in range(2, 11):
        basis = diagonalize_oqs(build_oqs_hamiltonian(ChainSpec(n)))
        expected = np.array([(2 * k - n - 1) * PI for k in range(1, n + 1)])
        worst = max(worst, float(np.abs(basis.energies - expected).max()))
    assert worst < 1e-9
    emit(f"PASS criterion 1 (spectrum ladder, N=2..10): "
         f"max residual {worst:.2e} < 1e-9")


def test_criterion_2_lossless_transfer():
    worst = 0.0
    for n in range(3, 9):
        spec, basis, ops = chain_problem(n)
        rates = RateModel.finite_omega(uniform_gammas(n, 0.0), 0.0,
                                       basis.energies, 0.0)
        for scheme in ("a", "c"):
            ptm = transfer_channel(spec, basis, rates, scheme, ops=ops)
            worst = max(worst, abs(average_fidelity(ptm) - 1.0))
    assert worst < 1e-8
    emit(f"PASS criterion 2 (lossless transfer incl. phase correction, "
         f"N=3..8): max |F-1| {worst:.2e} < 1e-8")


def test_criterion_3_operator_algebra():
    car_worst = 0.0
    ham_worst = 0.0
    for n in range(2, 9):
        spec, basis, ops = chain_problem(n, omega=1.0 + 0.3 * n)
        eye = np.eye(1 << n)
        for family in (ops.site_ann, ops.mode_ann):
            for i in range(n):
                for j in range(i, n):
                    pair = family[i] @ family[j] + family[j] @ family[i]
                    mixed = (family[i] @ family[j].conj().T
                             + family[j].conj().T @ family[i])
                    car_worst = max(
                        car_worst, float(np.abs(pair).max()),
                        float(np.abs(mixed - (i == j) * eye).max()))
        hm = build_full_hamiltonian(spec, basis, form="mode")
        hs = build_full_hamiltonian(spec, basis, form="spin")
        ham_worst = max(ham_worst, float(np.abs(hm - hs).max()))
    assert car_worst < 1e-10
    assert ham_worst < 1e-9
    emit(f"PASS criterion 3 (operator algebra, N<=8): CAR {car_worst:.2e} "
         f"< 1e-10, Hamiltonian forms {ham_worst:.2e} < 1e-9")


def test_criterion_4_lindblad_sanity():
    rng = np.random.default_rng(2024)
    spec, basis, ops = chain_problem(4, omega=2 * PI)
    rates = RateModel.finite_omega(rng.uniform(0.2, 0.9, 4), 0.6,
                                   basis.energies, spec.omega)
    rho0 = random_density(rng, 16)
    times = np.linspace(0.0, 5.0, 11)
    path = evolve_path(rho0, times, rates, ops.mode_ann, ops.hamiltonian())
    trace_worst = max(abs(np.trace(r) - 1.0) for r in path)
    herm_worst = max(float(np.abs(r - r.conj().T).max()) for r in path)
    eig_worst = min(float(np.linalg.eigvalsh(r).min()) for r in path)
    assert trace_worst < 1e-8
    assert herm_worst < 1e-9
    assert eig_worst >= -1e-8
    gibbs_worst = 0.0
    for _ in range(3):
        n = int(rng.integers(2, 6))
        beta = float(rng.uniform(0.1, 1.4))
        omega = float(rng.uniform(0.0, 3.5)) * PI
        g_spec, g_basis, g_ops = chain_problem(n, omega=omega)
        g_rates = RateModel.finite_omega(rng.uniform(0.1, 1.0, n), beta,
                                         g_basis.energies, omega)
        resid = liouvillian_apply(gibbs_state(g_spec, g_basis, beta, g_ops),
                                  g_rates, g_ops.mode_ann, g_ops.hamiltonian())
        gibbs_worst = max(gibbs_worst, float(np.abs(resid).max()))
    assert gibbs_worst < 1e-8
    emit(f"PASS criterion 4 (Lindblad sanity, t in [0,5]): trace "
         f"{trace_worst:.2e} < 1e-8, hermiticity {herm_worst:.2e} < 1e-9, "
         f"min eig {eig_worst:.2e} >= -1e-8, Gibbs residual "
         f"{gibbs_worst:.2e} < 1e-8")


def test_criterion_5_weak_coupling_closed_forms():
    worst_rel = 0.0
    for n in (4, 6, 7):
        spec, basis, ops = chain_problem(n)
        for gamma in (0.002, 0.005, 0.01):
            rates = RateModel.finite_omega(uniform_gammas(n, gamma), 0.0,
                                           basis.energies, 0.0)
            for scheme, deficit in (("a", gamma * n / 3), ("c", gamma / 2)):
                fid = average_fidelity(
                    transfer_channel(spec, basis, rates, scheme, ops=ops))
                rel = abs((1.0 - fid) - deficit) / deficit
                worst_rel = max(worst_rel, rel)
    assert worst_rel <= 0.10
    emit(f"PASS criterion 5 (first-order forms 1-GN/3 and 1-G/2, "
         f"N in {{4,6,7}}, G in {{0.002,0.005,0.01}}): worst relative "
         f"deficit error {worst_rel:.3f} <= 0.10")


def test_criterion_6_pure_decay_regime():
    n = 5
    omega = (n - 1) * PI + PI  # above the band edge
    spec, basis, ops = chain_problem(n, omega=omega)
    gammas = uniform_gammas(n, 1.0)
    rates = RateModel.finite_omega(gammas, math.inf, basis.energies, omega)
    rng = np.random.default_rng(6)
    vac = np.outer(vacuum_state(n), vacuum_state(n).conj())
    vac_worst = 0.0
    for _ in range(3):
        rho_t = evolve(random_density(rng, 1 << n), 26.0, rates, ops.mode_ann)
        vac_worst = max(vac_worst, float(np.abs(rho_t - vac).max()))
    assert vac_worst < 1e-5
    times = np.linspace(0.0, 3.0, 13)
    monotone_ok = True
    for scheme in ("a", "c"):
        traj = ChannelTrajectory(spec, basis, rates, scheme, ops=ops)
        fids = np.array([traj.fidelity(t) for t in times])
        monotone_ok = monotone_ok and bool(np.all(np.diff(fids) <= 1e-10))
    assert monotone_ok
    report = low_temperature_discrepancy_report(spec, basis, gammas, times,
                                                ops=ops)
    for scheme in ("a", "c"):
        block = report["schemes"][scheme]
        assert block["max_derived_error"] < 1e-6
        assert block["max_paper_discrepancy"] > 0.0  # reported, not asserted
    emit(f"PASS criterion 6 (pure decay): relax-to-vacuum residual "
         f"{vac_worst:.2e} < 1e-5, fidelities monotone, discrepancy report "
         f"generated (published-form gap up to "
         f"{report['schemes']['a']['max_paper_discrepancy']:.2f}, "
         f"derived-form gap < 1e-6)")


def test_criterion_7_collision_exponents():
    spec6, basis6, ops6 = chain_problem(6, omega=math.inf)
    fit6 = fit_collision_exponents(spec6, basis6, beta_prime=0.0, ops=ops6)
    assert 1.6 <= fit6.a1 <= 2.4
    assert 3.2 <= fit6.a2 <= 4.8
    spec7, basis7, ops7 = chain_problem(7, omega=math.inf)
    fit7 = fit_collision_exponents(spec7, basis7, beta_prime=0.0, ops=ops7)
    assert 4.0 <= fit7.a2 <= 6.0
    emit(f"PASS criterion 7 (collision exponents): N=6 a1={fit6.a1:.2f} in "
         f"[1.6,2.4], a2={fit6.a2:.2f} in [3.2,4.8]; N=7 a2={fit7.a2:.2f} "
         f"in [4.0,6.0]")


def test_criterion_8_infinite_temperature_dominance(figure_dir):
    regimes = {
        "omega->inf uniform": "fig1_n6_omega_inf_sweep.csv",
        "omega=4pi quadratic": "fig5_n6_omega_4pi_sweep.csv",
        "omega=0 quadratic": "fig6_n6_omega_0_sweep.csv",
    }
    details = []
    for label, filename in regimes.items():
        header, rows = parse_csv(figure_dir / filename)
        assert header[:5] == ["beta", "gamma_tau", "F_a", "F_c", "diff"]
        betas = np.unique(rows[:, 0])
        gammas = np.unique(rows[:, 1])
        assert len(betas) == 20 and len(gammas) == 20
        zero_row = rows[rows[:, 0] == betas[0]]
        min_diff = float(zero_row[:, 4].min())
        assert min_diff >= -1e-9, (label, min_diff)
        details.append(f"{label}: min diff {min_diff:+.2e}")
    emit("PASS criterion 8 (beta=0 dominance on 20x20 grids): "
         + "; ".join(details))


def test_criterion_9_p1_upper_bound():
    rng = np.random.default_rng(99)
    spec, basis, ops = chain_problem(5, omega=math.inf)
    times = np.linspace(0.0, 3.0, 13)
    worst = -math.inf
    for _ in range(10):
        rates = RateModel.infinite_omega(rng.uniform(0.05, 1.0, 5),
                                         float(rng.uniform(0.0, 2.0)))
        report = p1_upper_bound_check(spec, basis, rates, times, ops=ops)
        worst = max(worst, report["max_violation"])
        assert report["passed"], report["max_violation"]
    assert worst <= 1e-6
    emit(f"PASS criterion 9 (F_c <= (1+p1)/2 over t in [0,3], 10 random "
         f"rate profiles): max violation {worst:+.2e} <= 1e-6")


def test_criterion_10_figure_outputs(figure_dir):
    # All threshold and sweep CSVs exist with full grids and no error rows.
    for name in FIGURE_REGIMES:
        for kind in ("threshold", "sweep"):
            path = figure_dir / f"{name}_{kind}.csv"
            text = path.read_text()
            assert "# ERROR" not in text
            _, rows = parse_csv(path)
            assert len(rows) == (20 if kind == "threshold" else 400)
    # Infinite-temperature threshold ordering: scheme c crosses 2/3 at a
    # larger rate-time product than scheme a for both lengths.
    ordering = []
    for name in ("fig1_n6_omega_inf", "fig2_n7_omega_inf"):
        _, rows = parse_csv(figure_dir / f"{name}_threshold.csv")
        thr_a, thr_c = rows[0][1], rows[0][2]
        assert thr_c > thr_a > 0
        ordering.append(f"{name.split('_')[1]}: {thr_c:.3f} > {thr_a:.3f}")
    # Difference curves at infinite temperature stay non-negative.
    for n in (6, 7):
        _, rows = parse_csv(figure_dir / f"fig3_diff_n{n}.csv")
        assert len(rows) == 40
        assert rows[:, 4].min() >= -1e-9
    # Near-critical on-site energy: the two-site advantage survives only
    # in the high-temperature strip near beta = 0.
    _, rows = parse_csv(figure_dir / "fig4_n6_omega_5.01pi_sweep.csv")
    betas = np.unique(rows[:, 0])
    zero_row = rows[rows[:, 0] == betas[0]]
    assert zero_row[:, 4].min() >= -1e-9
    cold = rows[rows[:, 0] >= 0.5]
    assert cold[:, 4].max() < 0.0
    emit("PASS criterion 10 (figure outputs): 5 threshold + 5 sweep CSVs "
         "generated; c-threshold right of a-threshold at beta'=0 ("
         + "; ".join(ordering) + "); diff curves non-negative; "
         "near-critical advantage confined to the low-beta strip")
