"""Command-line front end: reproducible runs and CSV emission.

Commands: spectrum, fidelity, sweep, threshold, fit, verify.  Options come
from defaults, then a flat key=value config file, then command-line
overrides, in increasing precedence.  Every output embeds the resolved
configuration as comment lines, floats are rendered with 12 significant
digits, and row order never depends on the worker count, so reruns are
byte-identical.

Exit codes: 0 ok, 1 usage or configuration error, 2 numerical-invariant
failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import sys
import warnings
from dataclasses import dataclass, replace

import numpy as np

from qwire.chain import (
    ChainSpec,
    build_oqs_hamiltonian,
    diagonalize_oqs,
    oqs_propagator,
)
from qwire.dynamics import (
    RateModel,
    build_rate_model,
    classical_populations_evolve,
    evolve,
    evolve_with_diagnostics,
    gibbs_state,
    liouvillian_apply,
    uniform_gammas,
)
from qwire.fock import (
    ModeOperators,
    build_full_hamiltonian,
    mode_occupation_transform,
    site_annihilator,
)
from qwire.transfer import average_fidelity, transfer_channel
from qwire.analysis import (
    ChannelTrajectory,
    check_threshold_monotonicity,
    fit_collision_exponents,
    sweep_row,
    threshold_curve,
    threshold_for_trajectory,
)

USAGE_ERROR = 1
NUMERICAL_ERROR = 2


@dataclass(frozen=True)
class AxisSpec:
    """One sweep axis: linear or geometric spacing."""

    start: float
    stop: float
    count: int
    spacing: str = "lin"

    def values(self) -> np.ndarray:
        if self.count < 1:
            raise ValueError("axis needs at least one point")
        if self.count == 1:
            return np.array([self.start])
        if self.spacing == "log":
            if self.start <= 0:
                raise ValueError("log axis needs a positive start")
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)

    def render(self) -> str:
        prefix = "log:" if self.spacing == "log" else ""
        return f"{prefix}{self.start:g}:{self.stop:g}:{self.count}"


@dataclass(frozen=True)
class RunConfig:
    """Resolved options of one CLI invocation."""

    n: int = 6
    omega: float = math.inf
    beta: float | None = None
    beta_prime: float | None = None
    rates: str = "uniform"
    rate_list: tuple[float, ...] | None = None
    gamma: float = 0.01
    scheme: str = "both"
    grid_beta: AxisSpec = AxisSpec(0.0, 2.0, 20)
    grid_gamma_tau: AxisSpec = AxisSpec(0.05, 1.0, 20)
    out: str | None = None
    seed: int = 0
    jobs: int = 1

    @property
    def omega_is_infinite(self) -> bool:
        return math.isinf(self.omega)

    def spec(self) -> ChainSpec:
        return ChainSpec(self.n, omega=self.omega)

    def temperature_value(self) -> float:
        """The single active inverse-temperature parameter."""
        if self.omega_is_infinite:
            return 0.0 if self.beta_prime is None else self.beta_prime
        return 0.0 if self.beta is None else self.beta

    def validate(self):
        if self.n < 2:
            raise ValueError(f"chain length must be >= 2, got {self.n}")
        if self.omega_is_infinite:
            if self.beta is not None:
                raise ValueError(
                    "omega=inf is parameterized by beta'; pass --beta-prime"
                )
            if self.rates == "quadratic":
                raise ValueError(
                    "quadratic rates diverge at omega=inf; use uniform or list:"
                )
        elif self.beta_prime is not None:
            raise ValueError("beta' only applies to omega=inf; pass --beta")
        if self.rates not in ("uniform", "quadratic", "explicit"):
            raise ValueError(f"unknown rate preset {self.rates!r}")
        if self.rates == "explicit":
            if self.rate_list is None or len(self.rate_list) != self.n:
                raise ValueError(
                    f"explicit rate list must have length n={self.n}"
                )
        if self.scheme not in ("a", "c", "both"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme in ("c", "both") and self.n < 3:
            raise ValueError("scheme 'c' needs n >= 3")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _parse_float(text: str) -> float:
    if str(text).strip().lower() in ("inf", "infinite", "infinity"):
        return math.inf
    return float(text)


def _parse_axis(text: str) -> AxisSpec:
    body = text.strip()
    spacing = "lin"
    if body.startswith("log:"):
        spacing = "log"
        body = body[4:]
    parts = body.split(":")
    if len(parts) != 3:
        raise ValueError(
            f"axis {text!r} must look like START:STOP:COUNT or log:START:STOP:COUNT"
        )
    return AxisSpec(float(parts[0]), float(parts[1]), int(parts[2]), spacing)


def _parse_grid(text: str) -> dict[str, AxisSpec]:
    axes = {}
    for chunk in text.split(","):
        if not chunk.strip():
            continue
        key, _, value = chunk.partition("=")
        key = key.strip()
        if key in ("beta", "beta_prime"):
            axes["beta"] = _parse_axis(value)
        elif key in ("gamma_tau", "gamma_t"):
            axes["gamma_tau"] = _parse_axis(value)
        else:
            raise ValueError(f"unknown grid axis {key!r}")
    if not axes:
        raise ValueError("empty grid specification")
    return axes


def _parse_rates(text: str) -> tuple[str, tuple[float, ...] | None]:
    body = text.strip()
    if body in ("uniform", "quadratic"):
        return body, None
    if body.startswith("list:"):
        values = tuple(float(v) for v in body[5:].split(",") if v.strip())
        if not values:
            raise ValueError("empty explicit rate list")
        return "explicit", values
    raise ValueError(f"unknown rates {text!r}; expected uniform|quadratic|list:...")


def _read_config_file(path: str) -> dict[str, str]:
    pairs = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
            pairs[key.strip()] = value.strip()
    return pairs


_CONFIG_KEYS = {
    "n", "omega", "beta", "beta_prime", "rates", "gamma", "scheme", "grid",
    "out", "seed", "jobs",
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    sources: dict[str, str] = {}
    if getattr(args, "config", None):
        file_pairs = _read_config_file(args.config)
        unknown = set(file_pairs) - _CONFIG_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        sources.update(file_pairs)
    for key in ("n", "omega", "beta", "beta_prime", "rates", "gamma",
                "scheme", "grid", "out", "seed", "jobs"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            sources[key] = str(value)
    updates = {}
    for key, value in sources.items():
        if key == "n":
            updates["n"] = int(value)
        elif key == "omega":
            updates["omega"] = _parse_float(value)
        elif key == "beta":
            updates["beta"] = _parse_float(value)
        elif key == "beta_prime":
            updates["beta_prime"] = _parse_float(value)
        elif key == "rates":
            preset, explicit = _parse_rates(value)
            updates["rates"] = preset
            updates["rate_list"] = explicit
        elif key == "gamma":
            updates["gamma"] = float(value)
        elif key == "scheme":
            updates["scheme"] = value.strip().lower()
        elif key == "grid":
            axes = _parse_grid(value)
            if "beta" in axes:
                updates["grid_beta"] = axes["beta"]
            if "gamma_tau" in axes:
                updates["grid_gamma_tau"] = axes["gamma_tau"]
        elif key == "out":
            updates["out"] = value
        elif key == "seed":
            updates["seed"] = int(value)
        elif key == "jobs":
            updates["jobs"] = int(value)
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def _config_lines(cfg: RunConfig, command: str) -> list[str]:
    temp_key = "beta_prime" if cfg.omega_is_infinite else "beta"
    entries = {
        "command": command,
        "n": cfg.n,
        "omega": "inf" if cfg.omega_is_infinite else f"{cfg.omega:.12g}",
        temp_key: f"{cfg.temperature_value():.12g}",
        "rates": (cfg.rates if cfg.rate_list is None
                  else "list:" + ",".join(f"{g:.12g}" for g in cfg.rate_list)),
        "gamma": f"{cfg.gamma:.12g}",
        "scheme": cfg.scheme,
        "grid_beta": cfg.grid_beta.render(),
        "grid_gamma_tau": cfg.grid_gamma_tau.render(),
        "seed": cfg.seed,
        "tau": "0.5",
    }
    return [f"# {key}={value}" for key, value in entries.items()]


def _fmt(value: float) -> str:
    return f"{value:.12g}"


class _Output:
    """Line sink that flushes partial results before an abort."""

    def __init__(self, path: str | None):
        self._path = path
        self._lines: list[str] = []

    def write(self, line: str):
        self._lines.append(line)

    def finish(self) -> str:
        text = "\n".join(self._lines) + "\n"
        if self._path:
            with open(self._path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
        else:
            sys.stdout.write(text)
        return text


def _build_problem(cfg: RunConfig):
    spec = cfg.spec()
    basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
    ops = ModeOperators.build(spec, basis)
    return spec, basis, ops


def _rate_model(cfg: RunConfig, spec, basis, gamma: float | None = None) -> RateModel:
    scale = cfg.gamma if gamma is None else gamma
    kwargs = {"beta_prime": cfg.temperature_value()} if cfg.omega_is_infinite \
        else {"beta": cfg.temperature_value()}
    if cfg.rates == "explicit":
        return build_rate_model(spec, basis, "explicit", scale,
                                explicit=np.asarray(cfg.rate_list) * scale,
                                **kwargs)
    return build_rate_model(spec, basis, cfg.rates, scale, **kwargs)


# ---------------------------------------------------------------------------
# Commands.

def cmd_spectrum(cfg: RunConfig) -> int:
    spec, basis, _ = _build_problem(cfg)
    out = _Output(cfg.out)
    for line in _config_lines(cfg, "spectrum"):
        out.write(line)
    n = cfg.n
    out.write("mode,energy," + ",".join(f"b{j}" for j in range(1, n + 1)))
    for k in range(n):
        row = [str(k + 1), _fmt(basis.energies[k])]
        row += [_fmt(v) for v in basis.vectors[k]]
        out.write(",".join(row))
    ladder = np.array([(2 * k - n - 1) * spec.coupling for k in range(1, n + 1)])
    ortho = np.abs(basis.vectors @ basis.vectors.T - np.eye(n)).max()
    recon = np.abs(basis.vectors.T @ np.diag(basis.energies) @ basis.vectors
                   - build_oqs_hamiltonian(spec)).max()
    u = oqs_propagator(spec, basis, spec.transfer_time)
    mirror = np.abs(np.abs(u[::-1, :].diagonal()) - 1.0).max()
    failures = []
    if np.abs(basis.energies - ladder).max() > 1e-9:
        failures.append("energy ladder")
    if ortho > 1e-10:
        failures.append("orthogonality")
    if recon > 1e-9:
        failures.append("reconstruction")
    if mirror > 1e-9:
        failures.append("mirror")
    out.write(f"# ladder_residual={_fmt(np.abs(basis.energies - ladder).max())}")
    out.write(f"# orthogonality_residual={_fmt(ortho)}")
    out.write(f"# mirror_residual={_fmt(mirror)}")
    if failures:
        out.write(f"# ERROR: invariant failure: {', '.join(failures)}")
        out.finish()
        return NUMERICAL_ERROR
    out.finish()
    return 0


def _schemes(cfg: RunConfig) -> tuple[str, ...]:
    return ("a", "c") if cfg.scheme == "both" else (cfg.scheme,)


def cmd_fidelity(cfg: RunConfig) -> int:
    spec, basis, ops = _build_problem(cfg)
    rates = _rate_model(cfg, spec, basis)
    out = _Output(cfg.out)
    for line in _config_lines(cfg, "fidelity"):
        out.write(line)
    shifted = basis.energies + (0.0 if cfg.omega_is_infinite else cfg.omega)
    if not cfg.omega_is_infinite and np.any(shifted < 0):
        inverted = [str(k + 1) for k in np.flatnonzero(shifted < 0)]
        out.write("# note: absorption and emission roles are interchanged for "
                  f"modes {','.join(inverted)} (omega+E < 0)")
    ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for scheme in _schemes(cfg):
            try:
                ptm = transfer_channel(spec, basis, rates, scheme, ops=ops)
            except Warning as warn:  # pragma: no cover - defensive
                out.write(f"# ERROR: scheme {scheme}: {warn}")
                ok = False
                continue
            out.write(f"scheme={scheme}")
            for row_name, row in zip(("I", "x", "y", "z"), ptm.matrix):
                out.write(f"lambda_{row_name}," + ",".join(_fmt(v) for v in row))
            out.write(f"F={_fmt(average_fidelity(ptm))}")
    probe = np.zeros((ops.dim, ops.dim), dtype=complex)
    probe[0, 0] = 1.0
    _, diag = evolve_with_diagnostics(probe, spec.transfer_time, rates,
                                      ops.mode_ann)
    if not diag.ok:
        out.write("# ERROR: integrator diagnostics out of tolerance")
        ok = False
    if cfg.n >= 3:
        unit = _rate_model(cfg, spec, basis, gamma=1.0)
        traj = ChannelTrajectory(spec, basis, unit, "c", ops=ops)
        x = cfg.gamma * spec.transfer_time
        out.write(f"p1={_fmt(traj.exactly_one(x))}")
        out.write(f"p_ap={_fmt(traj.antiparallel(x))}")
    out.finish()
    return 0 if ok else NUMERICAL_ERROR


def _sweep_task(payload):
    (n, omega, preset, rate_list, beta, axis) = payload
    spec = ChainSpec(n, omega=omega)
    basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
    ops = ModeOperators.build(spec, basis)
    if preset == "explicit":
        rates = build_rate_model(
            spec, basis, "explicit", 1.0, explicit=np.asarray(rate_list),
            **({"beta_prime": beta} if math.isinf(omega) else {"beta": beta}))
        row = _sweep_row_with(spec, basis, rates, axis, ops)
    else:
        row = sweep_row(spec, basis, preset, beta, np.asarray(axis), ops=ops)
    return [
        (beta, g, row["F_a"][i], row["F_c"][i], row["diff"][i],
         row["p1"][i], row["p_ap"][i])
        for i, g in enumerate(axis)
    ]


def _sweep_row_with(spec, basis, rates, axis, ops):
    row = {"F_a": [], "F_c": [], "diff": [], "p1": [], "p_ap": []}
    traj_a = ChannelTrajectory(spec, basis, rates, "a", ops=ops)
    traj_c = ChannelTrajectory(spec, basis, rates, "c", ops=ops)
    for x in axis:
        fa = traj_a.fidelity(x)
        fc = traj_c.fidelity(x)
        row["F_a"].append(fa)
        row["F_c"].append(fc)
        row["diff"].append(fc - fa)
        row["p1"].append(traj_c.exactly_one(x))
        row["p_ap"].append(traj_c.antiparallel(x))
    return {key: np.asarray(val) for key, val in row.items()}


def _run_rows(cfg: RunConfig, payloads, task):
    """Evaluate row tasks, preserving input order regardless of jobs."""
    if cfg.jobs == 1:
        for payload in payloads:
            yield task(payload)
        return
    with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
        yield from pool.map(task, payloads)


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.n < 3:
        raise ValueError("the sweep compares both schemes and needs n >= 3")
    out = _Output(cfg.out)
    for line in _config_lines(cfg, "sweep"):
        out.write(line)
    out.write("beta,gamma_tau,F_a,F_c,diff,p1,p_ap")
    betas = cfg.grid_beta.values()
    axis = tuple(cfg.grid_gamma_tau.values())
    payloads = [(cfg.n, cfg.omega, cfg.rates, cfg.rate_list, float(beta), axis)
                for beta in betas]
    try:
        for rows in _run_rows(cfg, payloads, _sweep_task):
            for beta, g, fa, fc, diff, p1, pap in rows:
                out.write(",".join(_fmt(v) for v in
                                   (beta, g, fa, fc, diff, p1, pap)))
    except Exception as err:
        out.write(f"# ERROR: aborted: {err}")
        out.finish()
        return NUMERICAL_ERROR
    out.finish()
    return 0


def _threshold_task(payload):
    (n, omega, preset, rate_list, beta, schemes, x_cap) = payload
    spec = ChainSpec(n, omega=omega)
    basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
    ops = ModeOperators.build(spec, basis)
    values = {}
    for scheme in schemes:
        if preset == "explicit":
            rates = build_rate_model(
                spec, basis, "explicit", 1.0, explicit=np.asarray(rate_list),
                **({"beta_prime": beta} if math.isinf(omega) else {"beta": beta}))
            traj = ChannelTrajectory(spec, basis, rates, scheme, ops=ops)
            values[scheme] = threshold_for_trajectory(traj, x_cap=x_cap)
        else:
            values[scheme] = threshold_curve(spec, basis, scheme, preset,
                                             [beta], x_cap=x_cap, ops=ops)[0]
    return (beta, values.get("a", math.nan), values.get("c", math.nan))


def cmd_threshold(cfg: RunConfig) -> int:
    out = _Output(cfg.out)
    for line in _config_lines(cfg, "threshold"):
        out.write(line)
    out.write("beta,gamma_tau_threshold_a,gamma_tau_threshold_c")
    payloads = [(cfg.n, cfg.omega, cfg.rates, cfg.rate_list, float(beta),
                 _schemes(cfg), None)
                for beta in cfg.grid_beta.values()]
    results = []
    try:
        for row in _run_rows(cfg, payloads, _threshold_task):
            results.append(row)
            out.write(",".join(_fmt(v) for v in row))
    except Exception as err:
        out.write(f"# ERROR: aborted: {err}")
        out.finish()
        return NUMERICAL_ERROR
    betas = [r[0] for r in results]
    for scheme, column in (("a", 1), ("c", 2)):
        if scheme in _schemes(cfg):
            report = check_threshold_monotonicity(
                betas, [r[column] for r in results])
            out.write(f"# monotone_{scheme}={report['monotone']}"
                      f" warning={report['warning']}"
                      f" max_violation={_fmt(report['max_violation'])}")
    out.finish()
    return 0


def cmd_fit(cfg: RunConfig) -> int:
    if not cfg.omega_is_infinite:
        raise ValueError("fit needs omega=inf (the infinite-limit regime)")
    if cfg.rates != "uniform":
        raise ValueError("fit needs uniform rates")
    out = _Output(cfg.out)
    for line in _config_lines(cfg, "fit"):
        out.write(line)
    spec, basis, ops = _build_problem(cfg)
    axis = cfg.grid_gamma_tau
    samples = None if axis == RunConfig().grid_gamma_tau else axis.values()
    fit = fit_collision_exponents(
        spec, basis, beta_prime=cfg.temperature_value(),
        gamma_t_samples=samples, ops=ops)
    out.write("n,beta_prime,a1,a1_residual,a2,a2_residual,n_samples")
    out.write(",".join(_fmt(v) for v in
                       (cfg.n, cfg.temperature_value(), fit.a1,
                        fit.residual_a1, fit.a2, fit.residual_a2,
                        fit.n_samples)))
    out.finish()
    return 0


def _verify_checks(cfg: RunConfig, perturb: float):
    rng = np.random.default_rng(cfg.seed)

    def spectrum_check():
        worst = 0.0
        for n in range(2, 9):
            spec = ChainSpec(n)
            h = build_oqs_hamiltonian(spec)
            if perturb:
                h = h.copy()
                h[0, 1] += perturb
                h[1, 0] += perturb
            basis = diagonalize_oqs(h)
            ladder = np.array([(2 * k - n - 1) * math.pi
                               for k in range(1, n + 1)])
            worst = max(worst, float(np.abs(basis.energies - ladder).max()))
        return worst < 1e-9, f"max ladder residual {worst:.2e}"

    def mirror_check():
        worst = 0.0
        for n in range(2, 9):
            spec = ChainSpec(n)
            basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
            u = oqs_propagator(spec, basis, spec.transfer_time)
            worst = max(worst, float(
                np.abs(np.abs(u[::-1, :].diagonal()) - 1.0).max()))
        return worst < 1e-9, f"max mirror residual {worst:.2e}"

    def car_check():
        worst = 0.0
        for n in range(2, 9):
            site_ops = [site_annihilator(i, n) for i in range(1, n + 1)]
            eye = np.eye(1 << n)
            for i in range(n):
                for j in range(i, n):
                    acc = site_ops[i] @ site_ops[j] + site_ops[j] @ site_ops[i]
                    mix = (site_ops[i] @ site_ops[j].conj().T
                           + site_ops[j].conj().T @ site_ops[i])
                    worst = max(worst, float(np.abs(acc).max()),
                                float(np.abs(mix - (i == j) * eye).max()))
        return worst < 1e-10, f"max CAR residual {worst:.2e}"

    def hamiltonian_check():
        worst = 0.0
        for n in range(2, 9):
            omega = float(rng.uniform(0.0, 8.0))
            spec = ChainSpec(n, omega=omega)
            basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
            hm = build_full_hamiltonian(spec, basis, form="mode")
            hs = build_full_hamiltonian(spec, basis, form="spin")
            worst = max(worst, float(np.abs(hm - hs).max()))
        return worst < 1e-9, f"max spin-vs-mode residual {worst:.2e}"

    def gibbs_check():
        worst = 0.0
        for n in range(2, 9):
            beta = float(rng.uniform(0.1, 1.5))
            omega = float(rng.uniform(0.0, 4.0)) * math.pi
            spec = ChainSpec(n, omega=omega)
            basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
            ops = ModeOperators.build(spec, basis)
            gammas = rng.uniform(0.1, 1.0, size=n)
            rates = RateModel.finite_omega(gammas, beta, basis.energies, omega)
            rho = gibbs_state(spec, basis, beta, ops)
            resid = liouvillian_apply(rho, rates, ops.mode_ann,
                                      ops.hamiltonian())
            worst = max(worst, float(np.abs(resid).max()))
        return worst < 1e-8, f"max Gibbs fixed-point residual {worst:.2e}"

    def evolution_check():
        n = 4
        spec = ChainSpec(n, omega=2 * math.pi)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        ops = ModeOperators.build(spec, basis)
        rates = RateModel.finite_omega(rng.uniform(0.2, 0.8, size=n), 0.5,
                                       basis.energies, spec.omega)
        dim = ops.dim
        vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        vec /= np.linalg.norm(vec)
        rho0 = np.outer(vec, vec.conj())
        _, diag = evolve_with_diagnostics(rho0, 5.0, rates, ops.mode_ann,
                                          ops.hamiltonian())
        detail = (f"trace {diag.trace_error:.2e}, herm "
                  f"{diag.hermiticity_error:.2e}, min eig "
                  f"{diag.min_eigenvalue:.2e}")
        return diag.ok, detail

    def classical_check():
        n = 4
        spec = ChainSpec(n, omega=3.0)
        basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
        ops = ModeOperators.build(spec, basis)
        rates = RateModel.finite_omega(rng.uniform(0.2, 1.0, size=n), 0.4,
                                       basis.energies, spec.omega)
        transform = mode_occupation_transform(ops)
        q0 = rng.uniform(0.0, 1.0, size=1 << n)
        q0 /= q0.sum()
        rho0 = transform @ np.diag(q0.astype(complex)) @ transform.conj().T
        rho_t = evolve(rho0, 1.5, rates, ops.mode_ann)
        diag_quantum = np.real(np.diag(transform.conj().T @ rho_t @ transform))
        q_t = classical_populations_evolve(q0, 1.5, rates)
        worst = float(np.abs(diag_quantum - q_t).max())
        return worst < 1e-7, f"max classical-vs-quantum residual {worst:.2e}"

    def identity_channel_check():
        worst = 0.0
        for n in (4, 5):
            spec = ChainSpec(n)
            basis = diagonalize_oqs(build_oqs_hamiltonian(spec))
            ops = ModeOperators.build(spec, basis)
            rates = RateModel.finite_omega(uniform_gammas(n, 0.0), 0.0,
                                           basis.energies, 0.0)
            for scheme in ("a", "c"):
                ptm = transfer_channel(spec, basis, rates, scheme, ops=ops)
                worst = max(worst, float(
                    np.abs(ptm.matrix - np.eye(4)).max()))
        return worst < 1e-8, f"max lossless-channel residual {worst:.2e}"

    return [
        ("spectrum-ladder", spectrum_check),
        ("mirror-transfer", mirror_check),
        ("anticommutation", car_check),
        ("hamiltonian-forms", hamiltonian_check),
        ("gibbs-fixed-point", gibbs_check),
        ("evolution-diagnostics", evolution_check),
        ("classical-populations", classical_check),
        ("lossless-channel", identity_channel_check),
    ]


def cmd_verify(cfg: RunConfig, perturb: float = 0.0) -> int:
    out = _Output(cfg.out)
    checks = _verify_checks(cfg, perturb)
    failures = 0
    for name, check in checks:
        try:
            ok, detail = check()
        except Exception as err:
            ok, detail = False, f"exception: {err}"
        out.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failures += 0 if ok else 1
    out.write(f"{'OK' if failures == 0 else 'FAILED'}: "
              f"{failures} of {len(checks)} checks failed")
    out.finish()
    return 0 if failures == 0 else NUMERICAL_ERROR


# ---------------------------------------------------------------------------
# Entry point.

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--out", help="output path (default stdout)")
    parser.add_argument("--n", type=int, help="chain length")
    parser.add_argument("--omega", help="on-site energy, a float or 'inf'")
    parser.add_argument("--beta", help="inverse temperature (finite omega)")
    parser.add_argument("--beta-prime", dest="beta_prime",
                        help="rescaled inverse temperature (omega=inf)")
    parser.add_argument("--rates", help="uniform | quadratic | list:g1,g2,...")
    parser.add_argument("--gamma", type=float, help="rate scale")
    parser.add_argument("--scheme", choices=("a", "c", "both"))
    parser.add_argument("--grid",
                        help="axes, e.g. beta=0:2:20,gamma_tau=log:0.01:1:20")
    parser.add_argument("--jobs", type=int, help="parallel workers")
    parser.add_argument("--seed", type=int,
                        help="seed for randomized cross-checks")


def main(argv=None) -> int:
    parser = _Parser(prog="qwire",
                     description="spin-chain wire thermalization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("spectrum", "eigenmode table of the single-excitation block"),
        ("fidelity", "single-run transfer-map and fidelity report"),
        ("sweep", "fidelity sweep CSV over (beta, gamma*tau)"),
        ("threshold", "2/3-fidelity threshold curve CSV"),
        ("fit", "collision-exponent fit report"),
        ("verify", "run the numerical invariant suite"),
    ):
        cmd = sub.add_parser(name, help=text)
        _add_common(cmd)
        if name == "verify":
            cmd.add_argument("--perturb", type=float, default=0.0,
                             help="test hook: offset the first coupling")
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError) as err:
        print(f"qwire: configuration error: {err}", file=sys.stderr)
        return USAGE_ERROR
    handlers = {
        "spectrum": cmd_spectrum,
        "fidelity": cmd_fidelity,
        "sweep": cmd_sweep,
        "threshold": cmd_threshold,
        "fit": cmd_fit,
    }
    try:
        if args.command == "verify":
            return cmd_verify(cfg, perturb=args.perturb)
        return handlers[args.command](cfg)
    except ValueError as err:
        print(f"qwire: configuration error: {err}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
