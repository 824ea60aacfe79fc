"""Displaced/squeezed (renormalized) frame of the driven Duffing oscillator.

Conjugating the rotating-frame Hamiltonian by the displacement D(alpha) and a
squeeze unitary U with U^dag a U = v a + u a^dag gives, up to a c-number,

    Hbar = dob * n + chb * n^2 + 2 chi U^dag (alpha a^dag^2 a + h.c.) U
           + chi F + U^dag (z a^dag + z* a) U + (xi2 a^dag^2 + xi2* a^2)

with n = a^dag a, F the quartic squeeze remnant, and (z, xi2) the residuals
of the exact steady conditions.  For solutions of the exact conditions both
residuals vanish; for the reorganized high-amplitude conditions they equal
the linear and quadratic pieces that the ordered expansion keeps as explicit
perturbations, so the ordered term sum always reconstructs `Hbar` exactly.

Bath coefficients in this frame: Nbar = nbar |v|^2 + (1+nbar)|u|^2 and
M = u v* (2 nbar + 1).  Dephasing at rate eta_ph renormalizes the ladder
occupation to Ntilde = Nbar + (eta_ph/kappa) |alpha* u + alpha v*|^2 and adds
pure-dephasing and two-photon channels (see `liouville`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from duffing_qdyn.errors import DegenerateLimitError, InvalidInputError
from duffing_qdyn.fock import SqueezePair, ladder, number_operator, pair_unitary
from duffing_qdyn.model import (
    MODE_EXACT,
    MODE_REORGANIZED,
    Branch,
    ModelParams,
    displacement_residual,
    squeeze_residual,
)

VALIDATE_TOL = 1e-8


@dataclass(frozen=True)
class RenormCoefficients:
    """Effective bath and Hamiltonian coefficients of the renormalized frame."""

    nbar_eff: float
    m_pair: complex
    ntilde: float | None = None
    pure_dephasing_weight: float | None = None
    two_photon_weight: float | None = None
    delta_omega_bar: float | None = None
    chi_bar: float | None = None


def bath_coefficients(params: ModelParams, pair: SqueezePair) -> RenormCoefficients:
    """Effective Bose occupation Nbar and squeezing number M."""
    pair.require_canonical()
    u2, v2 = abs(pair.u) ** 2, abs(pair.v) ** 2
    nbar_eff = params.nbar * v2 + (1.0 + params.nbar) * u2
    m_pair = pair.u * np.conj(pair.v) * (2.0 * params.nbar + 1.0)
    return RenormCoefficients(nbar_eff=nbar_eff, m_pair=m_pair)


def dephasing_coefficients(
    params: ModelParams, alpha: complex, pair: SqueezePair
) -> RenormCoefficients:
    """Adds the dephasing-renormalized occupation and channel weights.

    The ladder-channel weight |alpha* u + alpha v*|^2 enters the occupation as
    Ntilde = Nbar + (eta_ph/kappa) |...|^2; the returned channel weights are
    the eta_ph-linear coefficients of the pure-dephasing and two-photon
    dissipators (the Liouvillian assembly halves them exactly as it halves
    the kappa rates).
    """
    base = bath_coefficients(params, pair)
    if params.eta_ph > 0 and params.kappa == 0:
        raise DegenerateLimitError(
            "Ntilde diverges at kappa = 0 with finite dephasing"
        )
    u2, v2 = abs(pair.u) ** 2, abs(pair.v) ** 2
    mix = abs(np.conj(alpha) * pair.u + alpha * np.conj(pair.v)) ** 2
    ntilde = base.nbar_eff
    if params.eta_ph > 0:
        ntilde += params.eta_ph / params.kappa * mix
    return RenormCoefficients(
        nbar_eff=base.nbar_eff,
        m_pair=base.m_pair,
        ntilde=ntilde,
        pure_dephasing_weight=params.eta_ph * (v2 + u2) ** 2,
        two_photon_weight=params.eta_ph * u2 * v2,
    )


def hamiltonian_coefficients(
    params: ModelParams, alpha: complex, pair: SqueezePair
) -> tuple[float, float]:
    """Renormalized detuning and nonlinearity (dimensionful)."""
    lam = params.lam
    u, v = pair.u, pair.v
    u2, v2 = abs(u) ** 2, abs(v) ** 2
    uv2 = u2 * v2
    r = abs(alpha) ** 2
    cross = 2.0 * (np.conj(alpha) ** 2 * u * v).real
    dob = (1.0 - 4.0 * lam * r) * (v2 + u2) - 2.0 * lam * (2.0 * uv2 + u2 * u2 + cross)
    chb = -lam * (u2 * u2 + v2 * v2 + 4.0 * uv2)
    return dob * params.unit, chb * params.unit


def condition_residual_terms(
    params: ModelParams, alpha: complex, pair: SqueezePair
) -> tuple[complex, complex]:
    """Residuals (z, xi2) of the exact steady conditions (dimensionful).

    z is the leftover linear coefficient of the displaced Hamiltonian and xi2
    the leftover quadratic-anomalous coefficient after squeezing; both vanish
    for exact-mode solutions and reduce to chi*alpha and the two-photon h2
    piece for reorganized-mode ones.
    """
    lam = params.lam
    u, v = pair.u, pair.v
    r = abs(alpha) ** 2
    cond = (params.kappa_ratio / 2.0 + 1j * (1.0 - lam - 2.0 * lam * r)) * alpha
    cond += 1j * params.drive_ratio
    z = -1j * params.unit * cond
    g = (1.0 - 4.0 * lam * r - lam * (4.0 * abs(u) ** 2 + 2.0 * abs(v) ** 2)) * np.conj(v) * u
    g -= lam * (np.conj(alpha) ** 2 * u ** 2 + alpha ** 2 * np.conj(v) ** 2)
    xi2 = params.unit * g
    return z, xi2


def _validate_solution(params: ModelParams, alpha: complex, pair: SqueezePair) -> None:
    pair.require_canonical(1e-8)
    for mode in (MODE_EXACT, MODE_REORGANIZED):
        if (
            displacement_residual(params, alpha, mode) <= VALIDATE_TOL
            and squeeze_residual(params, alpha, pair, mode) <= VALIDATE_TOL
        ):
            return
    raise InvalidInputError(
        "(alpha, pair) does not solve the steady conditions in either variant: "
        f"exact residuals ({displacement_residual(params, alpha, MODE_EXACT):.3g}, "
        f"{squeeze_residual(params, alpha, pair, MODE_EXACT):.3g}), reorganized "
        f"({displacement_residual(params, alpha, MODE_REORGANIZED):.3g}, "
        f"{squeeze_residual(params, alpha, pair, MODE_REORGANIZED):.3g})"
    )


def _quartic_remnant(pair: SqueezePair, dim: int) -> np.ndarray:
    """F = 2(|v|^2+|u|^2)(v*u a^dag^3 a + h.c.) + (v*u)^2 a^dag^4 + h.c."""
    a, adag = ladder(dim)
    q = np.conj(pair.v) * pair.u
    p = abs(pair.v) ** 2 + abs(pair.u) ** 2
    a3 = a @ a @ a
    adag3 = adag @ adag @ adag
    f = 2.0 * p * (q * (adag3 @ a) + np.conj(q) * (adag @ a3))
    f += q ** 2 * (adag3 @ adag) + np.conj(q) ** 2 * (a3 @ a)
    return f


def renormalized_hamiltonian(
    params: ModelParams,
    alpha: complex,
    pair: SqueezePair,
    dim: int,
    validate: bool = True,
) -> np.ndarray:
    """Renormalized-frame Hamiltonian (dimensionful, Hermitian, c-number dropped).

    For inputs solving the exact steady conditions this equals the conjugated
    rotating-frame Hamiltonian up to a level-independent constant (and, at
    finite kappa, up to the linear piece that cancels against the transformed
    dissipators at the generator level).
    """
    if validate:
        _validate_solution(params, alpha, pair)
    chi = params.chi
    a, adag = ladder(dim)
    n = number_operator(dim)
    usq = pair_unitary(pair, dim, check_truncation=False)

    dob, chb = hamiltonian_coefficients(params, alpha, pair)
    h = dob * n + chb * (n @ n)

    cubic = 2.0 * chi * (alpha * (adag @ adag @ a) + np.conj(alpha) * (adag @ a @ a))
    z, xi2 = condition_residual_terms(params, alpha, pair)
    pre_squeeze = cubic + z * adag + np.conj(z) * a
    h += usq.conj().T @ pre_squeeze @ usq

    h += chi * _quartic_remnant(pair, dim)
    h += xi2 * (adag @ adag) + np.conj(xi2) * (a @ a)
    return 0.5 * (h + h.conj().T)  # strip rounding noise; Hermitian analytically


@dataclass(frozen=True)
class OrderedHamiltonian:
    """Term list of the renormalized Hamiltonian sorted by perturbative order.

    Terms are dimensionless (units of ``params.unit``); the weighted sum
    reconstructs `renormalized_hamiltonian` / unit exactly.
    """

    branch: Branch
    terms: tuple[tuple[str, np.ndarray, float], ...]

    def total(self) -> np.ndarray:
        out = np.zeros_like(self.terms[0][1])
        for _, op, weight in self.terms:
            out = out + weight * op
        return out

    def term(self, label: str) -> np.ndarray:
        for name, op, _ in self.terms:
            if name == label:
                return op
        raise KeyError(label)


def ordered_hamiltonian(
    params: ModelParams,
    alpha: complex,
    pair: SqueezePair,
    branch: Branch,
    dim: int,
    validate: bool = True,
) -> OrderedHamiltonian:
    """Perturbative splitting of the renormalized Hamiltonian.

    Low-amplitude branch: terms (h0, 1), (h_lam, lam), (h_beta, beta),
    (h_lam_beta, sqrt(lam*beta)) built on an exact-mode solution.
    High-amplitude branch: (h0, 1), (h1, gamma), (h2, gamma^2) with
    gamma = sqrt(lam), built on a reorganized-mode solution.
    """
    mode = MODE_REORGANIZED if branch is Branch.HAS else MODE_EXACT
    if validate:
        if (
            displacement_residual(params, alpha, mode) > VALIDATE_TOL
            or squeeze_residual(params, alpha, pair, mode) > VALIDATE_TOL
        ):
            raise InvalidInputError(
                f"(alpha, pair) does not solve the {mode} conditions required "
                f"for the {branch.value} ordering"
            )
    lam, beta = params.lam, params.beta
    u, v = pair.u, pair.v
    u2, v2 = abs(u) ** 2, abs(v) ** 2
    uv2 = u2 * v2
    r = abs(alpha) ** 2
    cross = 2.0 * (np.conj(alpha) ** 2 * u * v).real

    a, adag = ladder(dim)
    n = number_operator(dim)
    n2 = n @ n
    usq = pair_unitary(pair, dim, check_truncation=False)
    f_op = _quartic_remnant(pair, dim)
    cubic = alpha * (adag @ adag @ a) + np.conj(alpha) * (adag @ a @ a)
    linear = alpha * adag + np.conj(alpha) * a
    kerr = -2.0 * (2.0 * uv2 + u2 * u2) * n - (u2 * u2 + v2 * v2 + 4.0 * uv2) * n2 - f_op

    if branch is Branch.HAS:
        gamma = np.sqrt(lam)
        h0 = ((1.0 - 4.0 * lam * r) * (v2 + u2) - 2.0 * lam * cross) * n
        h1 = -gamma * (usq.conj().T @ (2.0 * cubic + linear) @ usq)
        q = np.conj(v) * u
        h2 = kerr - 2.0 * (2.0 * u2 + v2) * (
            q * (adag @ adag) + np.conj(q) * (a @ a)
        )
        terms = (("h0", h0, 1.0), ("h1", h1, gamma), ("h2", h2, gamma ** 2))
    elif branch is Branch.LAS:
        h0 = (v2 + u2) * n
        h_beta = (
            -(1.0 / beta) * (4.0 * lam * r * (v2 + u2) + 2.0 * lam * cross) * n
            if beta > 0
            else np.zeros_like(n)
        )
        h_lam_beta = (
            -2.0 * np.sqrt(lam / beta) * (usq.conj().T @ cubic @ usq)
            if beta > 0
            else np.zeros_like(n)
        )
        terms = (
            ("h0", h0, 1.0),
            ("h_lam", kerr, lam),
            ("h_beta", h_beta, beta),
            ("h_lam_beta", h_lam_beta, np.sqrt(lam * beta)),
        )
    else:
        raise InvalidInputError("ordered expansion exists for the LAS and HAS only")
    terms = tuple(
        (label, 0.5 * (op + op.conj().T), weight) for label, op, weight in terms
    )
    return OrderedHamiltonian(branch=branch, terms=terms)
