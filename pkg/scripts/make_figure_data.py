#!/usr/bin/env python3
"""Generate the full set of figure-class CSV files.

Writes threshold curves and fidelity sweeps for every studied regime plus
the infinite-temperature difference curves and the collision-exponent fit
reports.  The published plots carry no numeric axis values, so the grids
below are this repository's reference choices; they are embedded in every
output header.

Usage: python scripts/make_figure_data.py [OUTDIR]   (default: out/)
"""

import math
import pathlib
import sys
import time

from qwire.cli import main as qwire_main

REGIMES = {
    # name: (n, omega, rates, beta axis, gamma*tau axis)
    "fig1_n6_omega_inf": (6, "inf", "uniform", "0:2:20", "0.05:1:20"),
    "fig2_n7_omega_inf": (7, "inf", "uniform", "0:2:20", "0.05:1:20"),
    "fig4_n6_omega_5.01pi": (6, repr(5.01 * math.pi), "quadratic",
                             "0:2:20", "0.00025:0.005:20"),
    "fig5_n6_omega_4pi": (6, repr(4.0 * math.pi), "quadratic",
                          "0:1:20", "0.0005:0.01:20"),
    "fig6_n6_omega_0": (6, "0", "quadratic", "0:0.15:20", "0.001:0.02:20"),
}

DIFF_CURVES = {  # infinite-temperature difference curves, one per length
    "fig3_diff_n6": (6, "0.025:1:40"),
    "fig3_diff_n7": (7, "0.025:1:40"),
}


def run(outdir: pathlib.Path) -> int:
    outdir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for name, (n, omega, rates, betas, gammas) in REGIMES.items():
        for kind in ("threshold", "sweep"):
            path = outdir / f"{name}_{kind}.csv"
            args = [kind, "--n", str(n), "--omega", omega, "--rates", rates,
                    "--grid", f"beta={betas},gamma_tau={gammas}",
                    "--out", str(path)]
            started = time.time()
            code = qwire_main(args)
            print(f"{path.name}: exit {code} ({time.time() - started:.1f}s)")
            failures += code != 0
    for name, (n, gammas) in DIFF_CURVES.items():
        path = outdir / f"{name}.csv"
        code = qwire_main(["sweep", "--n", str(n), "--omega", "inf",
                           "--grid", f"beta=0:0:1,gamma_tau={gammas}",
                           "--out", str(path)])
        print(f"{path.name}: exit {code}")
        failures += code != 0
    for n in (6, 7):
        path = outdir / f"fit_exponents_n{n}.csv"
        code = qwire_main(["fit", "--n", str(n), "--omega", "inf",
                           "--beta-prime", "0", "--out", str(path)])
        print(f"{path.name}: exit {code}")
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    target = pathlib.Path(sys.argv[1]) if len(sys.argv) > 1 else pathlib.Path("out")
    sys.exit(run(target))
