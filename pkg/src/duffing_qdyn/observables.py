"""Physical outputs: orbital displacement, Bose ratios, effective occupation.

The laboratory-frame matrix element between well eigenstates |N> = D U |n'>
reduces to frame data plus perturbed-state matrix elements:

    <N|a|M> = v <n'|a|m'> + u <m'|a|n'>* + alpha <n'|m'>.

Effective occupations characterize a stationary distribution level by level,
N_eff(n) = p_{n+1} / (p_n - p_{n+1}); a geometric distribution gives a
constant, and the two lowest levels give the dephasing-renormalized
occupation Ntilde = p_1 / (p_0 - p_1) (0-indexed).
"""

from __future__ import annotations

import numpy as np

from duffing_qdyn.errors import UndefinedExtractionError
from duffing_qdyn.fock import SqueezePair, ladder
from duffing_qdyn.liouville import StationaryDistribution
from duffing_qdyn.model import Branch, ModelParams
from duffing_qdyn.perturb import StateTable, exact_well_levels, state_table


def a_matrix_element(
    n: int, m: int, states: StateTable, alpha: complex, pair: SqueezePair
) -> complex:
    """<N|a|M> between laboratory-frame well states, via the frame identity."""
    cn = states.state(n)
    cm = states.state(m)
    a, _ = ladder(states.coeffs.shape[0])
    down = np.vdot(cn, a @ cm)  # <n'|a|m'>
    up = np.vdot(cm, a @ cn)  # <m'|a|n'>
    overlap = np.vdot(cn, cm)
    return pair.v * down + pair.u * np.conj(up) + alpha * overlap


def orbital_displacement_series(
    params: ModelParams,
    branch: Branch,
    orders: tuple[int, ...] = (0, 2, 3),
    n_max: int = 8,
    dim: int | None = None,
) -> dict[int, np.ndarray]:
    """<N|a|N> per level for each perturbation order (order 0 is constant alpha)."""
    out: dict[int, np.ndarray] = {}
    for order in orders:
        if order == 0:
            table = state_table(params, branch, order=1, n_max=n_max, dim=dim)
            out[0] = np.full(n_max + 1, table.solution.alpha, dtype=complex)
            continue
        table = state_table(params, branch, order=order, n_max=n_max, dim=dim)
        sol = table.solution
        out[order] = np.array(
            [a_matrix_element(n, n, table, sol.alpha, sol.pair) for n in range(n_max + 1)]
        )
    return out


def orbital_displacement_exact(
    params: ModelParams, branch: Branch, n_max: int = 8, dim: int | None = None
) -> np.ndarray:
    """<N|a|N> from exact eigenvectors of the rotating-frame Hamiltonian."""
    d = params.dim if dim is None else dim
    _, _, states = exact_well_levels(params, branch, n_max + 1, dim=d, return_states=True)
    a, _ = ladder(states.shape[0])  # well solver may have grown the basis
    return np.array([np.vdot(states[:, n], a @ states[:, n]) for n in range(n_max + 1)])


def bose_ratio(pair: SqueezePair, nbar: float) -> float:
    """Adjacent-level population ratio in the harmonic approximation.

    p_{n+1}/p_n = Nbar / (1 + Nbar) with Nbar = nbar |v|^2 + (1+nbar)|u|^2.
    """
    pair.require_canonical()
    nbar_eff = nbar * abs(pair.v) ** 2 + (1.0 + nbar) * abs(pair.u) ** 2
    return nbar_eff / (1.0 + nbar_eff)


def effective_occupation(dist: StationaryDistribution | np.ndarray) -> np.ndarray:
    """Level-dependent occupation N_eff(n) = p_{n+1} / (p_n - p_{n+1}).

    Entries where the distribution is not strictly decreasing are NaN
    sentinels (emitted explicitly downstream, never dropped).
    """
    p = dist.p if isinstance(dist, StationaryDistribution) else np.asarray(dist, float)
    diff = p[:-1] - p[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        neff = p[1:] / diff
    return np.where(diff > 0, neff, np.nan)


def extract_ntilde(dist: StationaryDistribution | np.ndarray) -> float:
    """Two-level effective occupation p_1 / (p_0 - p_1) (0-indexed)."""
    p = dist.p if isinstance(dist, StationaryDistribution) else np.asarray(dist, float)
    if p[0] <= p[1]:
        raise UndefinedExtractionError(
            f"p_0 = {p[0]:.6g} <= p_1 = {p[1]:.6g}: occupation undefined"
        )
    return float(p[1] / (p[0] - p[1]))
