"""Two-parameter perturbation engine and the high-amplitude level series.

The engine expands the eigenproblem of H = H0 + gamma H1 + gamma^2 H2 in
powers of gamma, treating the first- and second-order perturbations
distinctly.  Eigenvalue coefficients eps^(j) and state coefficients xi^(j)
are produced to fourth order by the recursion

    eps1_n = <n|H1|n>,                xi1_kn = <k|H1|n> / (e_n - e_k)
    eps2_n = (H1 xi1 + H2)_nn,        xi2    = [(H1 xi1 + H2) - xi1 eps1] / denom
    eps3_n = (H1 xi2 + H2 xi1)_nn,    xi3    = [... - xi2 eps1 - xi1 eps2] / denom
    eps4_n = (H1 xi3 + H2 xi2)_nn,    xi4    = [... - xi3 eps1 - xi2 eps2 - xi1 eps3] / denom

with xi self-components identically zero.

For the driven Duffing attractors the ordered Hamiltonians of `renorm`
supply (H0, H1, H2).  The high-amplitude branch uses gamma = sqrt(lam); the
low-amplitude branch is regrouped exactly into the same shape with
H0 = h0 + beta h_beta (both diagonal), H1 = sqrt(beta) h_lam_beta and
H2 = h_lam.  The squeeze conjugation spreads basis state k over roughly
exp(2|xi|) (k + 4) Fock states, so the matrices must be built on a much
larger space than the levels of interest; `series_dim` picks a safe size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from duffing_qdyn.errors import DegeneracyError, InvalidInputError, MissingOrderError
from duffing_qdyn.fock import (
    SqueezePair,
    displacement,
    displacement_dim_guideline,
    pair_unitary,
    xi_from_pair,
)
from duffing_qdyn.model import (
    Branch,
    ModelParams,
    AttractorSolution,
    MODE_EXACT,
    rwa_hamiltonian,
    solve_attractor,
)
from duffing_qdyn.renorm import ordered_hamiltonian

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class PerturbationInput:
    """Inputs H = diag(h0_diag) + gamma h1 + gamma^2 h2 for the engine."""

    h0_diag: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    gamma: float
    max_order: int = 4
    delta_min: float | None = None

    def validate(self) -> None:
        d = len(self.h0_diag)
        for name, h in (("h1", self.h1), ("h2", self.h2)):
            if h.shape != (d, d):
                raise InvalidInputError(f"{name} shape {h.shape} != ({d}, {d})")
            defect = np.max(np.abs(h - h.conj().T))
            if defect > HERMITICITY_TOL:
                raise InvalidInputError(
                    f"{name} not Hermitian (defect {defect:.3g} > {HERMITICITY_TOL})"
                )
        if not 0 <= self.max_order <= 4:
            raise InvalidInputError(f"max_order must be in 0..4, got {self.max_order}")
        gaps = np.abs(np.diff(np.sort(self.h0_diag)))
        delta_min = self.delta_min
        if delta_min is None:
            span = float(np.max(self.h0_diag) - np.min(self.h0_diag))
            delta_min = 1e-6 * (span if span > 0 else 1.0)
        if gaps.size and np.min(gaps) < delta_min:
            order = np.argsort(self.h0_diag)
            i = int(np.argmin(gaps))
            pair = (int(order[i]), int(order[i + 1]))
            raise DegeneracyError(
                f"levels {pair} nearly degenerate (gap {np.min(gaps):.3g} < "
                f"{delta_min:.3g})",
                level_pair=pair,
            )


@dataclass(frozen=True)
class PerturbationResult:
    """Eigenvalue coefficients eps[n, j] (j = 0..4) and state maps xi[j-1][k, n]."""

    eps: np.ndarray
    xi: tuple[np.ndarray, ...]
    gamma: float
    max_order: int

    def eigenvalue(self, n: int, order: int | None = None, gamma: float | None = None) -> float:
        order = self.max_order if order is None else order
        if order > self.max_order:
            raise MissingOrderError(f"order {order} not computed (max {self.max_order})")
        g = self.gamma if gamma is None else gamma
        return float(sum(self.eps[n, j] * g ** j for j in range(order + 1)))

    def eigenvalues(self, order: int | None = None, gamma: float | None = None) -> np.ndarray:
        order = self.max_order if order is None else order
        if order > self.max_order:
            raise MissingOrderError(f"order {order} not computed (max {self.max_order})")
        g = self.gamma if gamma is None else gamma
        return self.eps[:, : order + 1] @ (g ** np.arange(order + 1))


def double_perturbation(inp: PerturbationInput) -> PerturbationResult:
    """Eigenvalue and eigenvector series to ``max_order`` (at most 4)."""
    inp.validate()
    e0 = np.asarray(inp.h0_diag, dtype=float)
    d = len(e0)
    h1 = inp.h1.astype(complex)
    h2 = inp.h2.astype(complex)

    denom = e0[None, :] - e0[:, None]
    resolvent = np.zeros((d, d))
    off = ~np.eye(d, dtype=bool)
    resolvent[off] = 1.0 / denom[off]

    eps = np.zeros((d, 5))
    eps[:, 0] = e0
    xi: list[np.ndarray] = []

    def real_diag(y, order):
        diag = np.diag(y)
        leak = float(np.max(np.abs(diag.imag)))
        if leak > 1e-10 * max(1.0, float(np.max(np.abs(diag)))):
            raise InvalidInputError(
                f"order-{order} eigenvalue coefficients not real (leak {leak:.3g})"
            )
        return diag.real

    if inp.max_order >= 1:
        eps[:, 1] = real_diag(h1, 1)
        xi.append(resolvent * h1)
    if inp.max_order >= 2:
        y = h1 @ xi[0] + h2
        eps[:, 2] = real_diag(y, 2)
        xi.append(resolvent * (y - xi[0] * eps[:, 1][None, :]))
    if inp.max_order >= 3:
        y = h1 @ xi[1] + h2 @ xi[0]
        eps[:, 3] = real_diag(y, 3)
        xi.append(
            resolvent * (y - xi[1] * eps[:, 1][None, :] - xi[0] * eps[:, 2][None, :])
        )
    if inp.max_order >= 4:
        y = h1 @ xi[2] + h2 @ xi[1]
        eps[:, 4] = real_diag(y, 4)
        xi.append(
            resolvent
            * (
                y
                - xi[2] * eps[:, 1][None, :]
                - xi[1] * eps[:, 2][None, :]
                - xi[0] * eps[:, 3][None, :]
            )
        )
    return PerturbationResult(
        eps=eps[:, : inp.max_order + 1], xi=tuple(xi), gamma=inp.gamma, max_order=inp.max_order
    )


def perturbed_state(
    result: PerturbationResult, n: int, gamma: float | None = None, order: int | None = None
) -> tuple[np.ndarray, float]:
    """Un-normalized series coefficients of level ``n`` and their norm.

    Returns (coeffs, norm); coeffs[n] = 1 by the expansion ansatz.
    """
    order = result.max_order if order is None else order
    if order > result.max_order:
        raise MissingOrderError(f"order {order} not computed (max {result.max_order})")
    g = result.gamma if gamma is None else gamma
    d = result.eps.shape[0]
    if not 0 <= n < d:
        raise MissingOrderError(f"level {n} outside computed range 0..{d - 1}")
    coeffs = np.zeros(d, dtype=complex)
    coeffs[n] = 1.0
    for j in range(1, order + 1):
        coeffs += g ** j * result.xi[j - 1][:, n]
    return coeffs, float(np.linalg.norm(coeffs))


def has_matrix_elements(
    k: int, l: int, alpha: complex, pair: SqueezePair, lam: float
) -> tuple[complex, complex]:
    """Closed-form matrix elements <l|h1|k> and <l|h2|k> of the HAS ordering.

    h1 couples l in {k-3, k-1, k+1, k+3}; h2 couples l in {k-4, k-2, k, k+2, k+4}.
    """
    if k < 0 or l < 0:
        raise InvalidInputError("levels must be non-negative")
    u, v = pair.u, pair.v
    ac, uc, vc = np.conj(alpha), np.conj(u), np.conj(v)
    u2, v2 = abs(u) ** 2, abs(v) ** 2
    uv2 = u2 * v2

    h1 = 0.0 + 0.0j
    if l == k - 1:
        h1 += -2.0 * math.sqrt(lam * k) * (
            alpha * v2 * uc * (2 * k - 1)
            + alpha * u2 * uc * (k + 1)
            + ac * v * u2 * (2 * k + 1)
            + ac * v * v2 * (k - 1)
            + (ac * v + alpha * uc) / 2.0
        )
    elif l == k + 1:
        h1 += -2.0 * math.sqrt(lam * (k + 1)) * (
            alpha * u2 * vc * (2 * k + 3)
            + alpha * v2 * vc * k
            + ac * u * v2 * (2 * k + 1)
            + ac * u * u2 * (k + 2)
            + (ac * u + alpha * vc) / 2.0
        )
    elif l == k - 3:
        h1 += -2.0 * uc * v * math.sqrt(lam * k * (k - 1) * (k - 2)) * (ac * v + alpha * uc)
    elif l == k + 3:
        h1 += -2.0 * vc * u * math.sqrt(lam * (k + 1) * (k + 2) * (k + 3)) * (
            ac * u + alpha * vc
        )

    h2 = 0.0 + 0.0j
    if l == k:
        h2 += -(2.0 * (2.0 * uv2 + u2 * u2) * k + (u2 * u2 + v2 * v2 + 4.0 * uv2) * k * k)
    elif l == k - 2:
        h2 += -2.0 * uc * v * math.sqrt(k * (k - 1)) * (k * u2 + (k - 1) * v2)
    elif l == k + 2:
        h2 += -2.0 * vc * u * math.sqrt((k + 1) * (k + 2)) * ((k + 2) * u2 + (k + 1) * v2)
    elif l == k - 4:
        h2 += -((uc * v) ** 2) * math.sqrt(k * (k - 1) * (k - 2) * (k - 3))
    elif l == k + 4:
        h2 += -((vc * u) ** 2) * math.sqrt((k + 1) * (k + 2) * (k + 3) * (k + 4))
    return h1, h2


def series_dim(pair: SqueezePair, n_max: int, dim: int | None = None) -> int:
    """Basis size for clean ordered-Hamiltonian matrix elements up to n_max.

    The squeeze conjugation spreads level k over ~exp(2|xi|)(k+4) Fock
    states; anything smaller corrupts the couplings near the edge.
    """
    if dim is not None:
        return dim
    spread = math.exp(2.0 * abs(xi_from_pair(pair)))
    return max(40, math.ceil(spread * (n_max + 12)) + 20)


def attractor_series(
    params: ModelParams,
    branch: Branch,
    n_max: int = 10,
    dim: int | None = None,
    max_order: int = 4,
) -> tuple[AttractorSolution, PerturbationResult]:
    """Attractor solution plus the eigenvalue/state series of its ordering."""
    sol = solve_attractor(params, branch)
    dim = series_dim(sol.pair, n_max, dim)
    oh = ordered_hamiltonian(params, sol.alpha, sol.pair, branch, dim)
    if branch is Branch.HAS:
        h0_diag = np.diag(oh.term("h0")).real
        h1 = oh.term("h1")
        h2 = oh.term("h2")
    else:
        beta = params.beta
        h0_diag = np.diag(oh.term("h0") + beta * oh.term("h_beta")).real
        h1 = math.sqrt(beta) * oh.term("h_lam_beta")
        h2 = oh.term("h_lam")
    inp = PerturbationInput(
        h0_diag=h0_diag, h1=h1, h2=h2, gamma=math.sqrt(params.lam), max_order=max_order
    )
    return sol, double_perturbation(inp)


def level_spacings(
    params: ModelParams,
    branch: Branch,
    n_max: int,
    order: int,
    dim: int | None = None,
) -> np.ndarray:
    """|E_{n+1} - E_n| for n < n_max from the series at the given order.

    Energies are in units of ``params.unit``; order 0 gives the constant
    ladder spacing of the ordering's diagonal zeroth-order Hamiltonian.
    """
    if order not in (0, 1, 2, 3, 4):
        raise MissingOrderError(f"order must be in 0..4, got {order}")
    _, result = attractor_series(params, branch, n_max=n_max, dim=dim, max_order=max(order, 1))
    energies = result.eigenvalues(order=order)[: n_max + 1]
    return np.abs(np.diff(energies))


@dataclass(frozen=True)
class StateTable:
    """Perturbed eigenstates of one attractor ordering, as column coefficients.

    ``coeffs[:, n]`` expands level n over the ladder basis of the ordered
    Hamiltonian (normalized; Loewdin-orthonormalized over the table span by
    default, which removes the O(gamma^(order+1)) non-orthogonality of the
    truncated series).
    """

    coeffs: np.ndarray
    order: int
    gamma: float
    solution: AttractorSolution
    raw_norms: np.ndarray = field(repr=False, default=None)

    @property
    def n_levels(self) -> int:
        return self.coeffs.shape[1]

    def state(self, n: int) -> np.ndarray:
        if not 0 <= n < self.n_levels:
            raise MissingOrderError(f"level {n} not in table (0..{self.n_levels - 1})")
        return self.coeffs[:, n]


def state_table(
    params: ModelParams,
    branch: Branch,
    order: int,
    n_max: int,
    dim: int | None = None,
    orthonormalize: bool = True,
) -> StateTable:
    """Series states for levels 0..n_max at the given order."""
    sol, result = attractor_series(
        params, branch, n_max=n_max, dim=dim, max_order=max(order, 1)
    )
    cols = []
    norms = []
    for n in range(n_max + 1):
        c, norm = perturbed_state(result, n, order=order)
        cols.append(c / norm)
        norms.append(norm)
    coeffs = np.column_stack(cols)
    if orthonormalize:
        overlap = coeffs.conj().T @ coeffs
        vals, vecs = np.linalg.eigh(overlap)
        inv_sqrt = (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T
        coeffs = coeffs @ inv_sqrt
    return StateTable(
        coeffs=coeffs,
        order=order,
        gamma=result.gamma,
        solution=sol,
        raw_norms=np.array(norms),
    )


def exact_well_levels(
    params: ModelParams,
    branch: Branch,
    n_levels: int,
    dim: int | None = None,
    return_states: bool = False,
):
    """Well levels of the exact rotating-frame Hamiltonian, by well index.

    Eigenstates are matched to well indices through their overlap with the
    displaced-squeezed ladder states D S |n>.  The high-amplitude well sits
    at the top of the spectrum, so after anchoring index 0 by overlap the
    remaining levels follow by descending energy; low-amplitude levels are
    matched greedily by overlap (they sit mid-spectrum but mix weakly).

    Returns (energies, overlaps) or (energies, overlaps, states).
    """
    d = params.dim if dim is None else dim
    sol = solve_attractor(params, branch, mode=MODE_EXACT)
    d = max(d, displacement_dim_guideline(sol.alpha) + 40)
    h = rwa_hamiltonian(params, d)
    vals, vecs = np.linalg.eigh(h)
    disp = displacement(sol.alpha, d)
    frame = disp @ pair_unitary(sol.pair, d, check_truncation=False)

    if branch is Branch.HAS:
        anchor_ov = np.abs(vecs.conj().T @ frame[:, 0]) ** 2
        idx0 = int(np.argmax(anchor_ov))
        if anchor_ov[idx0] <= 0.5:
            raise InvalidInputError(
                f"well anchor overlap {anchor_ov[idx0]:.3f} <= 0.5; increase dim"
            )
        # Inverted ladder: successive well levels descend from the anchor.
        order = np.argsort(vals)[::-1]
        start = int(np.where(order == idx0)[0][0])
        picks = order[start : start + n_levels]
    else:
        picks = []
        taken = set()
        for n in range(n_levels):
            ov = np.abs(vecs.conj().T @ frame[:, n]) ** 2
            for idx in np.argsort(ov)[::-1]:
                if int(idx) not in taken:
                    break
            if ov[idx] <= 0.5:
                raise InvalidInputError(
                    f"level {n} overlap {ov[idx]:.3f} <= 0.5; matching is ambiguous"
                )
            taken.add(int(idx))
            picks.append(int(idx))
        picks = np.array(picks)

    energies = vals[picks]
    overlaps = np.array(
        [abs(np.vdot(vecs[:, i], frame[:, n])) ** 2 for n, i in enumerate(picks)]
    )
    if return_states:
        return energies, overlaps, vecs[:, picks]
    return energies, overlaps


def exact_level_spacings(
    params: ModelParams, branch: Branch, n_max: int, dim: int | None = None
) -> np.ndarray:
    """|E_{n+1} - E_n| of the exact well levels, in units of ``params.unit``."""
    energies, _ = exact_well_levels(params, branch, n_max + 1, dim=dim)
    return np.abs(np.diff(energies)) / params.unit
