"""Quantum dissipative dynamics of the driven Duffing oscillator near its attractors.

The package is organised around the rotating-frame picture of a driven Kerr
resonator: truncated Fock-space linear algebra (`fock`), model parameters and
attractor steady states (`model`), the displaced/squeezed renormalized frame
(`renorm`), a two-parameter perturbation engine (`perturb`), superoperator and
steady-state machinery (`liouville`), physical observables (`observables`),
and a scenario-driven CLI (`cli`).

All energies are measured against the linear oscillator coefficient of the
rotating-frame Hamiltonian; the dimensionless knobs are the quantumness
parameter ``lam`` and the scaled drive ``beta`` (see `model.ModelParams`).
"""

from duffing_qdyn.fock import SqueezePair, ladder, displacement, squeeze, xi_from_pair
from duffing_qdyn.model import (
    Branch,
    ModelParams,
    AttractorSolution,
    classical_attractors,
    quasienergy,
    rwa_hamiltonian,
    solve_attractor,
    squeeze_params,
)

__version__ = "0.1.0"

__all__ = [
    "SqueezePair",
    "ladder",
    "displacement",
    "squeeze",
    "xi_from_pair",
    "Branch",
    "ModelParams",
    "AttractorSolution",
    "classical_attractors",
    "quasienergy",
    "rwa_hamiltonian",
    "solve_attractor",
    "squeeze_params",
    "__version__",
]
