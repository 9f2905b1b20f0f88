"""Spin-chain quantum wire with thermal mode decoherence.

Simulates an engineered-coupling XX chain whose free evolution mirrors any
single-excitation state about the chain center, couples it to a heat bath
through its eigenmodes (Lindblad equation with detailed-balance pumping),
and compares the robustness of two logical-qubit encodings via the induced
qubit channel and its average fidelity.
"""

from qwire.chain import (
    ChainSpec,
    ModeBasis,
    build_oqs_hamiltonian,
    diagonalize_oqs,
    mirror_amplitude,
    oqs_propagator,
)
from qwire.dynamics import (
    IntegrationError,
    RateModel,
    antiparallel_probability,
    classical_populations_evolve,
    evolve,
    evolve_path,
    gibbs_state,
    liouvillian_apply,
    probability_exactly_one,
)
from qwire.fock import (
    ModeOperators,
    build_full_hamiltonian,
    mode_annihilator,
    site_annihilator,
)
from qwire.transfer import (
    PauliTransferMap,
    average_fidelity,
    decode_operator,
    decode_overlap,
    encode_operator,
    transfer_channel,
)
from qwire.analysis import (
    ChannelTrajectory,
    FitResult,
    SweepGrid,
    dominance_region,
    fit_collision_exponents,
    p1_upper_bound_check,
    perturbative_fidelity,
    pure_decay_fidelity,
    threshold_curve,
)

__version__ = "0.1.0"

__all__ = [
    "ChainSpec",
    "ModeBasis",
    "build_oqs_hamiltonian",
    "diagonalize_oqs",
    "oqs_propagator",
    "mirror_amplitude",
    "site_annihilator",
    "mode_annihilator",
    "ModeOperators",
    "build_full_hamiltonian",
    "RateModel",
    "IntegrationError",
    "liouvillian_apply",
    "evolve",
    "evolve_path",
    "classical_populations_evolve",
    "probability_exactly_one",
    "antiparallel_probability",
    "gibbs_state",
    "encode_operator",
    "decode_operator",
    "decode_overlap",
    "transfer_channel",
    "PauliTransferMap",
    "average_fidelity",
    "ChannelTrajectory",
    "SweepGrid",
    "FitResult",
    "perturbative_fidelity",
    "pure_decay_fidelity",
    "threshold_curve",
    "dominance_region",
    "fit_collision_exponents",
    "p1_upper_bound_check",
    "__version__",
]
