"""Model parameters, rotating-frame Hamiltonian, and attractor steady states.

The rotating-frame Hamiltonian is

    H = (delta_omega + chi) a^dag a + chi (a^dag a)^2 + epsilon (a^dag + a).

Dimensionless quantities are referred to the full linear coefficient
``unit = delta_omega + chi``:

    lam  = -chi / unit          (quantumness; lam > 0 in the supported regime)
    beta = 2 lam (epsilon/unit)^2   (scaled drive)

With these definitions the displaced-frame steady condition for alpha,

    [kappa/(2 unit) + i (1 - lam - 2 lam |alpha|^2)] alpha + i epsilon/unit = 0,

is exactly the condition that removes all linear terms from the displaced
generator, and the squeeze condition below removes the quadratic anomalous
terms.  The "reorganized" mode drops the O(lam) pieces of both conditions;
the dropped pieces reappear as explicit perturbation terms in the ordered
high-amplitude Hamiltonian (see `renorm.ordered_hamiltonian`).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

from duffing_qdyn.errors import (
    ConvergenceError,
    InvalidInputError,
    UnsupportedBranchError,
)
from duffing_qdyn.fock import SqueezePair, ladder, number_operator

RESIDUAL_TOL = 1e-10

MODE_EXACT = "exact"
MODE_REORGANIZED = "reorganized"
_MODES = (MODE_EXACT, MODE_REORGANIZED)


class Branch(enum.Enum):
    LAS = "las"
    SADDLE = "saddle"
    HAS = "has"


@dataclass(frozen=True)
class ModelParams:
    """Physical inputs of the driven, damped Duffing oscillator.

    All rates share the units of ``delta_omega``; ``nbar`` is the bath Bose
    occupation and ``dim`` the default Fock truncation for exact numerics.
    """

    delta_omega: float
    chi: float
    epsilon: float
    kappa: float = 0.0
    nbar: float = 0.0
    eta_ph: float = 0.0
    dim: int = 200

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidInputError(f"kappa must be >= 0, got {self.kappa}")
        if self.nbar < 0:
            raise InvalidInputError(f"nbar must be >= 0, got {self.nbar}")
        if self.eta_ph < 0:
            raise InvalidInputError(f"eta_ph must be >= 0, got {self.eta_ph}")
        if self.dim < 2:
            raise InvalidInputError(f"dim must be >= 2, got {self.dim}")
        if self.unit <= 0:
            raise InvalidInputError(
                f"delta_omega + chi = {self.unit:.6g} must be positive"
            )
        if self.lam <= 0:
            raise InvalidInputError(
                f"supported regime requires lam = -chi/(delta_omega+chi) > 0, "
                f"got {self.lam:.6g}"
            )

    @property
    def unit(self) -> float:
        """Energy unit: the a^dag a coefficient of the Hamiltonian."""
        return self.delta_omega + self.chi

    @property
    def lam(self) -> float:
        return -self.chi / self.unit

    @property
    def beta(self) -> float:
        return 2.0 * self.lam * (self.epsilon / self.unit) ** 2

    @property
    def kappa_ratio(self) -> float:
        return self.kappa / self.unit

    @property
    def eta_ratio(self) -> float:
        return self.eta_ph / self.unit

    @property
    def drive_ratio(self) -> float:
        return self.epsilon / self.unit

    @classmethod
    def from_dimensionless(
        cls,
        lam: float,
        beta: float,
        kappa_ratio: float = 0.0,
        nbar: float = 0.0,
        eta_ratio: float = 0.0,
        dim: int = 200,
        unit: float = 1.0,
    ) -> "ModelParams":
        """Build params from (lam, beta, kappa/unit, nbar, eta/unit).

        The drive sign is chosen so that the steady displacement of the
        low-amplitude state is real and positive.
        """
        if lam <= 0:
            raise InvalidInputError(f"lam must be > 0, got {lam}")
        if beta < 0:
            raise InvalidInputError(f"beta must be >= 0, got {beta}")
        chi = -lam * unit
        return cls(
            delta_omega=unit - chi,
            chi=chi,
            epsilon=-unit * math.sqrt(beta / (2.0 * lam)),
            kappa=kappa_ratio * unit,
            nbar=nbar,
            eta_ph=eta_ratio * unit,
            dim=dim,
        )

    def with_(self, **kwargs) -> "ModelParams":
        return replace(self, **kwargs)


def rwa_hamiltonian(params: ModelParams, dim: int | None = None) -> np.ndarray:
    """Rotating-frame Hamiltonian on a truncated Fock basis (Hermitian)."""
    d = params.dim if dim is None else dim
    a, adag = ladder(d)
    n = number_operator(d)
    h = (params.delta_omega + params.chi) * n + params.chi * (n @ n)
    h += params.epsilon * (a + adag)
    return h


def quasienergy(q, p, beta: float, soft: bool = True):
    """Classical quasienergy landscape g(Q, P) at scaled drive ``beta``.

    ``soft=True`` gives g = -(Q^2+P^2-1)^2/4 + sqrt(beta) Q; the hard
    nonlinearity flips the sign of both terms.
    """
    if beta < 0:
        raise InvalidInputError(f"beta must be >= 0, got {beta}")
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    g = -0.25 * (q * q + p * p - 1.0) ** 2 + math.sqrt(beta) * q
    out = g if soft else -g
    return out if out.ndim else float(out)


def quasienergy_critical_points(beta: float, soft: bool = True) -> list[dict]:
    """Critical points of the quasienergy surface, classified by the Hessian.

    All critical points sit on the P = 0 axis; Q solves (Q^2 - 1) Q = sqrt(beta).
    Returns dicts with keys q, p, g, kind in {"maximum", "minimum", "saddle"}.
    """
    if beta < 0:
        raise InvalidInputError(f"beta must be >= 0, got {beta}")
    roots = np.roots([1.0, 0.0, -1.0, -math.sqrt(beta)])
    points = []
    for q in sorted(r.real for r in roots if abs(r.imag) < 1e-12):
        g = quasienergy(q, 0.0, beta, soft=soft)
        # Hessian of the soft form: diag(-(3Q^2-1), -(Q^2-1)); hard flips signs.
        hqq = -(3.0 * q * q - 1.0)
        hpp = -(q * q - 1.0)
        if not soft:
            hqq, hpp = -hqq, -hpp
        if hqq * hpp < 0:
            kind = "saddle"
        elif hqq < 0:
            kind = "maximum"
        else:
            kind = "minimum"
        points.append({"q": q, "p": 0.0, "g": g, "kind": kind})
    return points


@dataclass(frozen=True)
class AttractorSolution:
    """One attractor branch: displacement alpha and squeeze pair (u, v).

    ``residuals`` holds the norms of the displacement and squeeze steady
    conditions; both are <= 1e-10 for returned solutions.  ``mode`` records
    which variant of the conditions was solved.
    """

    branch: Branch
    alpha: complex
    pair: SqueezePair | None
    residuals: tuple[float, float]
    mode: str = MODE_EXACT


def _check_mode(mode: str) -> None:
    if mode not in _MODES:
        raise InvalidInputError(f"mode must be one of {_MODES}, got {mode!r}")


def _linear_coefficient(params: ModelParams, mode: str) -> float:
    # Detuning-like coefficient of the displacement condition, in `unit`s.
    return 1.0 - params.lam if mode == MODE_EXACT else 1.0


def displacement_residual(params: ModelParams, alpha: complex, mode: str = MODE_EXACT) -> float:
    """|steady condition| for the displacement alpha (dimensionless)."""
    _check_mode(mode)
    c0 = _linear_coefficient(params, mode)
    lam = params.lam
    val = (params.kappa_ratio / 2.0 + 1j * (c0 - 2.0 * lam * abs(alpha) ** 2)) * alpha
    val += 1j * params.drive_ratio
    return abs(val)


def squeeze_residual(
    params: ModelParams, alpha: complex, pair: SqueezePair, mode: str = MODE_EXACT
) -> float:
    """|steady condition| for the squeeze pair (dimensionless)."""
    _check_mode(mode)
    lam = params.lam
    u, v = pair.u, pair.v
    c1 = 1.0 - 4.0 * lam * abs(alpha) ** 2
    if mode == MODE_EXACT:
        c1 -= lam * (4.0 * abs(u) ** 2 + 2.0 * abs(v) ** 2)
    val = c1 * np.conj(v) * u
    val -= lam * (np.conj(alpha) ** 2 * u ** 2 + alpha ** 2 * np.conj(v) ** 2)
    return abs(val)


def classical_attractors(params: ModelParams, mode: str = MODE_EXACT) -> list[AttractorSolution]:
    """All roots of the displacement steady condition, classified by |alpha|^2.

    The condition reduces to a cubic in r = |alpha|^2 (solved through its
    companion matrix); the phase of alpha follows from the linear relation.
    Three roots in the bistable regime, one outside it.
    """
    _check_mode(mode)
    lam, beta = params.lam, params.beta
    ktil = params.kappa_ratio / 2.0
    c0 = _linear_coefficient(params, mode)
    if beta == 0.0:
        return [
            AttractorSolution(Branch.LAS, 0.0 + 0.0j, None, (0.0, math.nan), mode)
        ]
    # |ktil + i(c0 - x)|^2 x = beta with x = 2 lam |alpha|^2: the O(1)
    # variable keeps the companion matrix well conditioned at small lam.
    coeffs = [1.0, -2.0 * c0, c0 * c0 + ktil * ktil, -beta]
    roots = np.roots(coeffs)
    real_roots = sorted(
        x.real for x in roots if abs(x.imag) <= 1e-9 * max(1.0, abs(x)) and x.real > 0
    )
    # Polish with Newton on the cubic; companion-matrix roots carry ~1e-12.
    poly = np.polynomial.Polynomial(coeffs[::-1])
    dpoly = poly.deriv()
    real_roots = [_newton_polish(poly, dpoly, x) for x in real_roots]
    # A root pair closer than double precision can resolve sits numerically
    # on the fold: the merging attractor/saddle pair is dropped.
    if len(real_roots) == 3 and any(
        real_roots[i + 1] - real_roots[i] <= 1e-6 for i in range(2)
    ):
        gaps = [real_roots[1] - real_roots[0], real_roots[2] - real_roots[1]]
        keep = 2 if gaps[0] < gaps[1] else 0
        real_roots = [real_roots[keep]]
    real_roots = [x / (2.0 * lam) for x in real_roots]
    solutions = []
    if len(real_roots) == 3:
        branches = [Branch.LAS, Branch.SADDLE, Branch.HAS]
    elif len(real_roots) == 1:
        # Monostable: label by which asymptote the surviving root continues.
        branches = [Branch.LAS if 2.0 * lam * real_roots[0] < 2.0 / 3.0 * c0 else Branch.HAS]
    else:
        raise ConvergenceError(
            f"expected 1 or 3 positive roots, got {len(real_roots)} (near a bifurcation?)",
            residual=math.nan,
        )
    for r, branch in zip(real_roots, branches):
        alpha = (-1j * params.drive_ratio) / (ktil + 1j * (c0 - 2.0 * lam * r))
        res = displacement_residual(params, alpha, mode)
        # Evaluating the condition at a true root costs ~eps(2 lam|alpha|^3
        # + |alpha|) in cancellations, which dominates for huge-amplitude
        # roots; physical parameter sets sit at ~1e-14.
        floor = 1.0 + 2.0 * lam * abs(alpha) ** 3 + abs(alpha)
        if not res <= 1e3 * RESIDUAL_TOL * floor:
            raise ConvergenceError(
                f"{branch.value} displacement residual {res:.3g} above tolerance", res
            )
        solutions.append(AttractorSolution(branch, alpha, None, (res, math.nan), mode))
    return solutions


def _newton_polish(poly, dpoly, r: float, steps: int = 4) -> float:
    best, best_val = r, abs(poly(r))
    for _ in range(steps):
        d = dpoly(r)
        if d == 0.0:
            break
        r = r - poly(r) / d
        val = abs(poly(r))
        if val < best_val:
            best, best_val = r, val
    return best


def _squeeze_ratio(c1: float, alpha: complex, lam: float) -> complex:
    # Root of lam conj(alpha)^2 w^2 - c1 w + lam alpha^2 = 0 (w = u/v) on the
    # branch continuously connected to w = 0 as lam -> 0.
    r2 = abs(alpha) ** 4
    disc = c1 * c1 - 4.0 * lam * lam * r2
    if disc < 0:
        raise ConvergenceError(
            f"squeeze condition has no solution in the real-v gauge "
            f"(discriminant {disc:.3g} < 0)",
            residual=math.sqrt(-disc),
        )
    if c1 == 0.0:
        raise ConvergenceError("squeeze condition degenerate (c1 = 0)", math.inf)
    # Multiply numerator and denominator to avoid cancellation: the small root.
    w = 2.0 * lam * alpha ** 2 / (c1 + math.copysign(math.sqrt(disc), c1))
    return w


def squeeze_params(params: ModelParams, alpha: complex, mode: str = MODE_EXACT) -> SqueezePair:
    """Squeeze pair (u, v) solving the quadratic-term steady condition.

    Returns the branch continuously connected to (u, v) = (0, 1) as lam -> 0,
    in the real-positive-v gauge.  In the exact mode the condition couples to
    |u|^2 and |v|^2; that reduces to a one-dimensional fixed point for |u/v|^2
    solved by damped iteration.
    """
    _check_mode(mode)
    lam = params.lam
    r = abs(alpha) ** 2

    def c1_of(x: float) -> float:
        c1 = 1.0 - 4.0 * lam * r
        if mode == MODE_EXACT:
            # |u|^2 = x v^2, |v|^2 = v^2, v^2 = 1/(1-x)
            c1 -= lam * (4.0 * x + 2.0) / (1.0 - x)
        return c1

    x = 0.0
    w = 0.0 + 0.0j
    for _ in range(200):
        w = _squeeze_ratio(c1_of(x), alpha, lam)
        x_new = abs(w) ** 2
        if x_new >= 1.0:
            raise ConvergenceError(f"squeeze ratio |u/v|^2 = {x_new:.3g} >= 1", x_new)
        if abs(x_new - x) <= 1e-16 * max(1.0, x_new):
            x = x_new
            break
        x = 0.5 * (x + x_new) if mode == MODE_EXACT else x_new
        if mode == MODE_REORGANIZED:
            break
    v = 1.0 / math.sqrt(1.0 - abs(w) ** 2)
    pair = SqueezePair(u=w * v, v=complex(v))
    res = squeeze_residual(params, alpha, pair, mode)
    if not res <= 1e2 * RESIDUAL_TOL:
        raise ConvergenceError(f"squeeze residual {res:.3g} above tolerance", res)
    return pair


def default_mode(branch: Branch) -> str:
    """Canonical steady-condition variant per branch."""
    return MODE_REORGANIZED if branch is Branch.HAS else MODE_EXACT


def solve_attractor(
    params: ModelParams, branch: Branch, mode: str | None = None
) -> AttractorSolution:
    """Displacement and squeeze pair for one attractor branch.

    Defaults to the exact conditions for the LAS and the reorganized ones for
    the HAS (whose dropped pieces feed the ordered perturbation expansion).
    """
    if branch is Branch.SADDLE:
        raise UnsupportedBranchError("squeezing is undefined on the saddle branch")
    mode = default_mode(branch) if mode is None else mode
    roots = classical_attractors(params, mode)
    match = [s for s in roots if s.branch is branch]
    if not match:
        raise InvalidInputError(
            f"branch {branch.value} does not exist at lam={params.lam:.4g}, "
            f"beta={params.beta:.4g}, kappa_ratio={params.kappa_ratio:.4g}"
        )
    sol = match[0]
    pair = squeeze_params(params, sol.alpha, mode)
    return AttractorSolution(
        branch=branch,
        alpha=sol.alpha,
        pair=pair,
        residuals=(sol.residuals[0], squeeze_residual(params, sol.alpha, pair, mode)),
        mode=mode,
    )
