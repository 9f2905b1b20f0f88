"""Lindblad dynamics through the chain eigenmodes.

The wire loses quasi-fermions from mode k at rate gamma_k and reabsorbs
them at rate gamma_k * p_k, where the pump factor p_k = exp(-beta *
(omega + E_k)) follows from detailed balance.  With every pump factor on
detailed balance the Gibbs state is stationary.  In the infinite-omega
regime only the rescaled inverse temperature survives and p_k =
exp(-beta') for every mode.

The integrator is a fixed-step classical Runge-Kutta scheme whose step
count is doubled until the final state stops moving; this keeps runs
reproducible bit-for-bit for a given configuration.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from qwire.chain import ChainSpec, ModeBasis
from qwire.fock import ModeOperators, antiparallel_projector


class IntegrationError(RuntimeError):
    """Raised when the step-halving loop cannot reach the tolerance."""


@dataclass(frozen=True)
class RateModel:
    """Per-mode decay rates and detailed-balance pump factors."""

    gammas: np.ndarray
    pump_factors: np.ndarray
    beta: float
    regime: str  # "finite-omega" or "infinite-omega"

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float)
        p = np.asarray(self.pump_factors, dtype=float)
        if g.shape != p.shape or g.ndim != 1:
            raise ValueError("gammas and pump factors must be equal-length vectors")
        if np.any(g < 0) or np.any(~np.isfinite(g)):
            raise ValueError("decay rates must be finite and non-negative")
        if np.any(p < 0) or np.any(np.isnan(p)):
            raise ValueError("pump factors must be non-negative")
        object.__setattr__(self, "gammas", g)
        object.__setattr__(self, "pump_factors", p)

    @property
    def n_modes(self) -> int:
        return len(self.gammas)

    @classmethod
    def finite_omega(cls, gammas, beta: float, energies, omega: float) -> "RateModel":
        """Pump factors exp(-beta * (omega + E_k)) for a finite on-site energy."""
        if math.isinf(omega):
            raise ValueError("use infinite_omega() for the infinite-limit regime")
        if beta < 0:
            raise ValueError(f"inverse temperature must be >= 0, got {beta}")
        shifted = np.asarray(energies, dtype=float) + omega
        if math.isinf(beta):
            if np.any(shifted < 0):
                raise ValueError(
                    "beta = inf with an inverted mode (omega + E < 0) has a "
                    "divergent pump rate"
                )
            pumps = np.where(shifted > 0, 0.0, 1.0)
        else:
            pumps = np.exp(-beta * shifted)
        return cls(gammas=np.asarray(gammas, dtype=float), pump_factors=pumps,
                   beta=beta, regime="finite-omega")

    @classmethod
    def infinite_omega(cls, gammas, beta_prime: float) -> "RateModel":
        """Uniform pump factor exp(-beta') in the infinite-omega limit."""
        if beta_prime < 0:
            raise ValueError(f"beta' must be >= 0, got {beta_prime}")
        g = np.asarray(gammas, dtype=float)
        pump = 0.0 if math.isinf(beta_prime) else math.exp(-beta_prime)
        return cls(gammas=g, pump_factors=np.full(len(g), pump),
                   beta=beta_prime, regime="infinite-omega")


def uniform_gammas(n_modes: int, gamma: float) -> np.ndarray:
    return np.full(n_modes, float(gamma))


def quadratic_gammas(energies, omega: float, gamma_scale: float) -> np.ndarray:
    """Density-of-modes preset gamma_k = gamma * (E_k + omega)**2.

    A mode sitting exactly at zero shifted energy is dark; eigensolver
    roundoff is snapped to an exact zero so it stays decoupled.
    """
    if math.isinf(omega):
        raise ValueError("quadratic rates diverge in the infinite-omega limit")
    shifted = np.asarray(energies, dtype=float) + omega
    shifted[np.abs(shifted) < 1e-9] = 0.0
    return gamma_scale * shifted ** 2


def build_rate_model(spec: ChainSpec, basis: ModeBasis, preset: str,
                     gamma: float, beta: float | None = None,
                     beta_prime: float | None = None,
                     explicit=None) -> RateModel:
    """Assemble a RateModel from a preset name and one temperature parameter."""
    if spec.omega_is_infinite:
        if beta_prime is None:
            raise ValueError("the infinite-omega regime is parameterized by beta'")
        if beta is not None:
            raise ValueError("pass beta' (not beta) when omega is infinite")
    else:
        if beta is None:
            raise ValueError("finite omega needs beta")
        if beta_prime is not None:
            raise ValueError("beta' only applies to the infinite-omega regime")
    n = spec.n_sites
    if preset == "uniform":
        gammas = uniform_gammas(n, gamma)
    elif preset == "quadratic":
        gammas = quadratic_gammas(basis.energies, spec.omega, gamma)
    elif preset == "explicit":
        gammas = np.asarray(explicit, dtype=float)
        if gammas.shape != (n,):
            raise ValueError(f"explicit rate list must have length {n}")
    else:
        raise ValueError(f"unknown rate preset {preset!r}")
    if spec.omega_is_infinite:
        return RateModel.infinite_omega(gammas, beta_prime)
    return RateModel.finite_omega(gammas, beta, basis.energies, spec.omega)


def liouvillian_apply(x: np.ndarray, rates: RateModel, modes,
                      hamiltonian: np.ndarray | None = None) -> np.ndarray:
    """One application of the master-equation generator to an operator.

    Returns -i[H, x] (when a Hamiltonian is passed) plus, per mode, the
    decay dissipator at gamma_k and the pump dissipator at gamma_k * p_k.
    The input need not be Hermitian; coherence-type operators are evolved
    with the same generator.
    """
    x = np.asarray(x, dtype=complex)
    if len(modes) != rates.n_modes:
        raise ValueError(
            f"{len(modes)} mode operators for {rates.n_modes} rates"
        )
    out = np.zeros_like(x)
    if hamiltonian is not None:
        if hamiltonian.shape != x.shape:
            raise ValueError("Hamiltonian dimension mismatch")
        out += -1j * (hamiltonian @ x - x @ hamiltonian)
    for c, gamma, pump in zip(modes, rates.gammas, rates.pump_factors):
        if c.shape != x.shape:
            raise ValueError("mode operator dimension mismatch")
        if gamma == 0.0:
            continue
        cd = c.conj().T
        cdc = cd @ c
        out += gamma * (c @ x @ cd - 0.5 * (cdc @ x + x @ cdc))
        if gamma * pump != 0.0:
            ccd = c @ cd
            out += gamma * pump * (cd @ x @ c - 0.5 * (ccd @ x + x @ ccd))
    return out


class LindbladGenerator:
    """Precomputed sparse form of the master-equation generator.

    Acts on row-major flattened operators; one object is reused for every
    Runge-Kutta stage and every operator evolved under the same rates.
    """

    def __init__(self, modes, rates: RateModel,
                 hamiltonian: np.ndarray | None = None):
        if len(modes) != rates.n_modes:
            raise ValueError(
                f"{len(modes)} mode operators for {rates.n_modes} rates"
            )
        dim = modes[0].shape[0] if modes else (
            hamiltonian.shape[0] if hamiltonian is not None else 0)
        for c in modes:
            if c.shape != (dim, dim):
                raise ValueError("mode operator dimension mismatch")
        if hamiltonian is not None and hamiltonian.shape != (dim, dim):
            raise ValueError("Hamiltonian dimension mismatch")
        self.dim = dim
        jumps = []
        absorber = np.zeros((dim, dim), dtype=complex)
        for c, gamma, pump in zip(modes, rates.gammas, rates.pump_factors):
            if gamma > 0.0:
                jumps.append(math.sqrt(gamma) * c)
                absorber += 0.5 * gamma * (c.conj().T @ c)
            if gamma * pump > 0.0:
                jumps.append(math.sqrt(gamma * pump) * c.conj().T)
                absorber += 0.5 * gamma * pump * (c @ c.conj().T)
        if hamiltonian is not None:
            absorber = absorber + 1j * hamiltonian
        self._jumps = jumps
        self._absorber = absorber
        self._matrix = None
        # Gershgorin-style bound used to size integration steps.
        speed = float(sum(rates.gammas * (1.0 + rates.pump_factors)))
        if hamiltonian is not None:
            speed += 2.0 * float(np.abs(hamiltonian).sum(axis=1).max())
        self.speed = max(speed, 1e-30)

    def matrix(self) -> scipy.sparse.csr_matrix:
        """Sparse superoperator on row-major flattened operators."""
        if self._matrix is None:
            dim = self.dim
            eye = scipy.sparse.identity(dim, dtype=complex, format="csr")
            total = scipy.sparse.csr_matrix((dim * dim, dim * dim), dtype=complex)
            for b in self._jumps:
                sb = scipy.sparse.csr_matrix(b)
                total = total + scipy.sparse.kron(sb, sb.conj(), format="csr")
            a = scipy.sparse.csr_matrix(self._absorber)
            total = total - scipy.sparse.kron(a, eye, format="csr")
            total = total - scipy.sparse.kron(eye, a.conj(), format="csr")
            total.eliminate_zeros()
            self._matrix = total
        return self._matrix

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Dense application, equivalent to the superoperator matrix."""
        out = -(self._absorber @ x + x @ self._absorber.conj().T)
        for b in self._jumps:
            out += b @ x @ b.conj().T
        return out


def _rk4_run(matrix, flat: np.ndarray, t: float, steps: int) -> np.ndarray:
    dt = t / steps
    v = flat.copy()
    for _ in range(steps):
        k1 = matrix @ v
        k2 = matrix @ (v + 0.5 * dt * k1)
        k3 = matrix @ (v + 0.5 * dt * k2)
        k4 = matrix @ (v + dt * k3)
        v = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return v


def _initial_steps(gen: LindbladGenerator, t: float) -> int:
    return max(8, int(math.ceil(t * gen.speed / 1.0)))


@dataclass
class EvolveDiagnostics:
    steps: int
    trace_error: float
    hermiticity_error: float | None
    min_eigenvalue: float | None

    @property
    def ok(self) -> bool:
        good = self.trace_error < 1e-8
        if self.hermiticity_error is not None:
            good = good and self.hermiticity_error < 1e-9
        if self.min_eigenvalue is not None:
            good = good and self.min_eigenvalue >= -1e-8
        return good


def _integrate_converged(gen: LindbladGenerator, flat: np.ndarray, t: float,
                         tol: float, max_steps: int) -> tuple[np.ndarray, int]:
    steps = _initial_steps(gen, t)
    if steps > max_steps:
        raise IntegrationError(
            f"needs at least {steps} steps, above the cap of {max_steps}; "
            "step size underflow"
        )
    matrix = gen.matrix()
    prev = _rk4_run(matrix, flat, t, steps)
    while True:
        steps *= 2
        if steps > max_steps:
            raise IntegrationError(
                f"no convergence to {tol} within {max_steps} steps; "
                "step size underflow"
            )
        cur = _rk4_run(matrix, flat, t, steps)
        if float(np.abs(cur - prev).max()) < tol:
            return cur, steps
        prev = cur


def _diagnose(x0: np.ndarray, xt: np.ndarray, steps: int) -> EvolveDiagnostics:
    """Trace holds for any input; hermiticity and positivity only make
    sense when the input had them."""
    trace_err = abs(np.trace(xt) - np.trace(x0))
    herm_err = None
    min_eig = None
    if np.abs(x0 - x0.conj().T).max() < 1e-12:
        herm_err = float(np.abs(xt - xt.conj().T).max())
        if np.abs(np.trace(x0) - 1.0) < 1e-12:
            min_eig = float(np.linalg.eigvalsh(0.5 * (xt + xt.conj().T)).min())
    return EvolveDiagnostics(steps=steps, trace_error=float(trace_err),
                             hermiticity_error=herm_err, min_eigenvalue=min_eig)


def evolve_with_diagnostics(x0: np.ndarray, t_final: float, rates: RateModel,
                            modes, hamiltonian: np.ndarray | None = None, *,
                            tol: float = 1e-10, max_steps: int = 1 << 20,
                            ) -> tuple[np.ndarray, EvolveDiagnostics]:
    """Evolve an operator and report integration diagnostics."""
    x0 = np.asarray(x0, dtype=complex)
    if t_final < 0:
        raise ValueError(f"t_final must be >= 0, got {t_final}")
    if t_final == 0:
        return x0.copy(), _diagnose(x0, x0, 0)
    gen = LindbladGenerator(modes, rates, hamiltonian)
    if x0.shape != (gen.dim, gen.dim):
        raise ValueError(
            f"operator shape {x0.shape} does not match dimension {gen.dim}"
        )
    flat, steps = _integrate_converged(gen, x0.reshape(-1), t_final, tol,
                                       max_steps)
    xt = flat.reshape(gen.dim, gen.dim)
    diag = _diagnose(x0, xt, steps)
    if not diag.ok:
        parts = [f"trace error {diag.trace_error:.2e}"]
        if diag.hermiticity_error is not None:
            parts.append(f"hermiticity {diag.hermiticity_error:.2e}")
        if diag.min_eigenvalue is not None:
            parts.append(f"min eigenvalue {diag.min_eigenvalue:.2e}")
        warnings.warn(
            "integration diagnostics out of tolerance: " + ", ".join(parts),
            stacklevel=2,
        )
    return xt, diag


def evolve(x0: np.ndarray, t_final: float, rates: RateModel, modes,
           hamiltonian: np.ndarray | None = None, *, tol: float = 1e-10,
           max_steps: int = 1 << 20) -> np.ndarray:
    """Evolve an operator under the master equation for a time t_final."""
    xt, _ = evolve_with_diagnostics(x0, t_final, rates, modes, hamiltonian,
                                    tol=tol, max_steps=max_steps)
    return xt


def evolve_path(x0: np.ndarray, times, rates: RateModel, modes,
                hamiltonian: np.ndarray | None = None, *, tol: float = 1e-10,
                max_steps: int = 1 << 20) -> np.ndarray:
    """Evolve an operator, returning snapshots at the requested times.

    Times must be non-negative and ascending.  The step size is fixed by a
    convergence pass over the full horizon and reused for every segment.
    """
    x0 = np.asarray(x0, dtype=complex)
    times = np.asarray(times, dtype=float)
    if len(times) == 0:
        return np.zeros((0,) + x0.shape, dtype=complex)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("snapshot times must be non-negative and ascending")
    gen = LindbladGenerator(modes, rates, hamiltonian)
    if x0.shape != (gen.dim, gen.dim):
        raise ValueError(
            f"operator shape {x0.shape} does not match dimension {gen.dim}"
        )
    horizon = float(times[-1])
    if horizon == 0.0:
        return np.broadcast_to(x0, (len(times),) + x0.shape).copy()
    _, steps = _integrate_converged(gen, x0.reshape(-1), horizon, tol,
                                    max_steps)
    dt = horizon / steps
    matrix = gen.matrix()
    out = np.empty((len(times),) + x0.shape, dtype=complex)
    v = x0.reshape(-1).copy()
    t_now = 0.0
    for i, t in enumerate(times):
        seg = t - t_now
        if seg > 0:
            n_seg = max(1, int(math.ceil(seg / dt - 1e-12)))
            v = _rk4_run(matrix, v, seg, n_seg)
            t_now = t
        out[i] = v.reshape(x0.shape)
    return out


# ---------------------------------------------------------------------------
# Classical (Pauli) equation for mode populations.

def _mode_relaxation(rates: RateModel):
    r = rates.gammas * (1.0 + rates.pump_factors)
    q_inf = np.divide(rates.pump_factors, 1.0 + rates.pump_factors,
                      out=np.zeros_like(r), where=r > 0)
    return r, q_inf


def mode_occupations(q0_marginals, t: float, rates: RateModel) -> np.ndarray:
    """Closed-form per-mode occupation probabilities at time t.

    Each mode relaxes independently: occupied probability decays toward
    p/(1+p) at rate gamma*(1+p).  A mode with gamma = 0 is dark and keeps
    its initial occupation.
    """
    q0 = np.asarray(q0_marginals, dtype=float)
    if np.any(q0 < 0) or np.any(q0 > 1):
        raise ValueError("mode occupations must lie in [0, 1]")
    r, q_inf = _mode_relaxation(rates)
    decay = np.exp(-r * t)
    out = q_inf + (q0 - q_inf) * decay
    return np.where(r > 0, out, q0)


def classical_populations_evolve(q0, t: float, rates: RateModel) -> np.ndarray:
    """Evolve a population distribution under the per-mode birth-death rates.

    Accepts either a length-N vector of per-mode occupation probabilities
    (product distribution) or a full 2**N distribution over mode-occupation
    bit strings (bit k-1 of the index = occupation of mode k).  Returns the
    evolved object in the same form.
    """
    q0 = np.asarray(q0, dtype=float)
    n = rates.n_modes
    if np.any(q0 < 0):
        raise ValueError("populations must be non-negative")
    if q0.shape == (n,) and n != (1 << n):  # shapes never collide for n >= 1
        return mode_occupations(q0, t, rates)
    if q0.shape != (1 << n,):
        raise ValueError(
            f"expected {n} marginals or a length-{1 << n} distribution"
        )
    if abs(q0.sum() - 1.0) > 1e-9:
        raise ValueError("distribution must sum to 1")
    r, q_inf = _mode_relaxation(rates)
    joint = q0.reshape((2,) * n).copy()
    for k in range(n):
        if r[k] > 0:
            up = q_inf[k] * (1.0 - math.exp(-r[k] * t))       # 0 -> 1
            down = (1.0 - q_inf[k]) * (1.0 - math.exp(-r[k] * t))  # 1 -> 0
        else:
            up = down = 0.0
        transition = np.array([[1.0 - up, down], [up, 1.0 - down]])
        # Mode k lives on tensor axis n-1-k (bit k-1 of the index).
        axis = n - 1 - k
        joint = np.tensordot(transition, joint, axes=([1], [axis]))
        joint = np.moveaxis(joint, 0, axis)
    return joint.reshape(-1)


def probability_exactly_one(q) -> float:
    """Exactly-one-quasi-fermion probability of a 2**N mode distribution."""
    q = np.asarray(q, dtype=float)
    n_bits = q.shape[0].bit_length() - 1
    if q.ndim != 1 or q.shape[0] != (1 << n_bits):
        raise ValueError("expected a distribution over 2**N occupation strings")
    weights = np.bitwise_count(np.arange(len(q)))
    return float(q[weights == 1].sum())


def probability_exactly_one_marginals(q_marginals) -> float:
    """Exactly-one probability for independent per-mode occupations."""
    q = np.clip(np.asarray(q_marginals, dtype=float), 0.0, 1.0)
    total = 0.0
    for k in range(len(q)):
        rest = np.delete(q, k)
        total += q[k] * np.prod(1.0 - rest)
    return float(total)


# ---------------------------------------------------------------------------
# Thermal state and simple observables.

def gibbs_state(spec: ChainSpec, basis: ModeBasis, beta: float,
                ops: ModeOperators | None = None) -> np.ndarray:
    """Gibbs state exp(-beta H)/Z as a product over the chain eigenmodes."""
    if spec.omega_is_infinite:
        raise ValueError("the Gibbs state needs a finite omega")
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if ops is None:
        ops = ModeOperators.build(spec, basis)
    shifted = basis.energies + spec.omega
    if math.isinf(beta):
        if np.any(shifted == 0):
            raise ValueError("beta = inf is ambiguous with a zero-energy mode")
        fillings = np.where(shifted < 0, 1.0, 0.0)
    else:
        pumps = np.exp(-beta * shifted)
        fillings = pumps / (1.0 + pumps)
    dim = ops.dim
    rho = np.eye(dim, dtype=complex)
    for k, f in enumerate(fillings):
        number = ops.mode_ann[k].conj().T @ ops.mode_ann[k]
        rho = rho @ ((1.0 - f) * np.eye(dim) + (2.0 * f - 1.0) * number)
    return rho


def antiparallel_probability(rho: np.ndarray, sites: tuple[int, int]) -> float:
    """Probability that the two sites are anti-parallel along z."""
    rho = np.asarray(rho)
    dim = rho.shape[0]
    n = dim.bit_length() - 1
    if rho.shape != (dim, dim) or (1 << n) != dim:
        raise ValueError(f"state shape {rho.shape} is not a spin-chain operator")
    projector = antiparallel_projector(sites, n)
    return float(np.real(np.trace(projector @ rho)))


def assert_density_matrix(rho: np.ndarray, *, trace_tol: float = 1e-10,
                          herm_tol: float = 1e-10, eig_tol: float = -1e-8):
    """Raise if rho violates the density-matrix invariants."""
    trace_err = abs(np.trace(rho) - 1.0)
    if trace_err > trace_tol:
        raise ValueError(f"trace deviates from 1 by {trace_err:.3e}")
    herm_err = float(np.abs(rho - rho.conj().T).max())
    if herm_err > herm_tol:
        raise ValueError(f"hermiticity violated by {herm_err:.3e}")
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
    if min_eig < eig_tol:
        raise ValueError(f"negative eigenvalue {min_eig:.3e}")
