"""Superoperators, steady states, time evolution, balance equation, spectra.

Density matrices are column-stacked (`order='F'`), so conjugation rules
take the Kronecker forms vec(A X B) = (B^T kron A) vec(X).  Dissipators use
the convention D[A]rho = 2 A rho A^dag - A^dag A rho - rho A^dag A, with the
generalized form L[A;B]rho = 2 A rho B - B A rho - rho A B; all channel
weights w mean a term w * D[...] (or w * L[...]) added to drho/dt, so the
thermal ladder carries weights kappa(1+N)/2 and kappa N/2.

The renormalized-frame assembly mirrors the displaced/squeezed master
equation: ladder channels with the effective occupation, the anomalous
two-photon pair weighted by kappa M / 2, and (optionally) dephasing either
in rotating-wave-reduced form or as the exactly transformed dissipator
D[(v a + u a^dag + alpha)^dag (v a + u a^dag + alpha)].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from duffing_qdyn.errors import (
    InvalidInputError,
    NonUniqueSteadyStateError,
    ReducibleRatesError,
    StiffnessError,
)
from duffing_qdyn.fock import ladder, number_operator
from duffing_qdyn.model import AttractorSolution, ModelParams
from duffing_qdyn.perturb import StateTable
from duffing_qdyn.renorm import (
    RenormCoefficients,
    bath_coefficients,
    dephasing_coefficients,
    renormalized_hamiltonian,
)


# Below this many vectorized entries squared matrices are solved densely.
_DENSE_SOLVE_LIMIT = 2700


def vectorize(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).flatten(order="F")


def unvectorize(vec: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vec, dtype=complex).reshape((dim, dim), order="F")


def _sp(op: np.ndarray) -> sp.csr_matrix:
    return sp.csr_matrix(np.asarray(op, dtype=complex))


def hamiltonian_superop(h: np.ndarray) -> sp.csr_matrix:
    """-i [H, rho] as a matrix on vectorized density operators."""
    hs = _sp(h)
    eye = sp.identity(hs.shape[0], dtype=complex, format="csr")
    return (-1j * (sp.kron(eye, hs) - sp.kron(hs.T, eye))).tocsr()


def dissipator_superop(a_op: np.ndarray) -> sp.csr_matrix:
    """D[A]rho = 2 A rho A^dag - A^dag A rho - rho A^dag A, vectorized."""
    a = _sp(a_op)
    eye = sp.identity(a.shape[0], dtype=complex, format="csr")
    ada = (a.conj().T @ a).tocsr()
    return (2.0 * sp.kron(a.conj(), a) - sp.kron(eye, ada) - sp.kron(ada.T, eye)).tocsr()


def generalized_superop(a_op: np.ndarray, b_op: np.ndarray) -> sp.csr_matrix:
    """L[A;B]rho = 2 A rho B - B A rho - rho B A, vectorized.

    This is the unique ordering for which L[A;A^dag] is the standard
    dissipator, (L[A;B]rho)^dag = L[B^dag;A^dag]rho^dag holds, and the trace
    is preserved for every (A, B).
    """
    a, b = _sp(a_op), _sp(b_op)
    if a.shape != b.shape:
        raise InvalidInputError(f"operator shapes differ: {a.shape} vs {b.shape}")
    eye = sp.identity(a.shape[0], dtype=complex, format="csr")
    ba = (b @ a).tocsr()
    return (2.0 * sp.kron(b.T, a) - sp.kron(eye, ba) - sp.kron(ba.T, eye)).tocsr()


@dataclass
class Superoperator:
    """Sparse Liouvillian acting on column-stacked density matrices."""

    dim: int
    matrix: sp.csr_matrix
    channels: list[tuple[str, complex]] = field(default_factory=list)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvectorize(self.matrix @ vectorize(rho), self.dim)

    def norm_estimate(self) -> float:
        return float(spla.norm(self.matrix, 1))


def generalized_lindblad(a_op: np.ndarray, b_op: np.ndarray) -> Superoperator:
    """The map rho -> 2 A rho B - B A rho - rho A B as a Superoperator."""
    mat = generalized_superop(a_op, b_op)
    return Superoperator(dim=a_op.shape[0], matrix=mat, channels=[("L[A;B]", 1.0)])


def build_liouvillian(h: np.ndarray | None, channels) -> Superoperator:
    """Assemble -i[H, .] plus weighted channels.

    ``channels`` is an iterable of (kind, payload, weight):
      - ("dissipator", A, w): w * D[A]
      - ("anomalous", a, m): m * L[a^dag; a^dag] + conj(m) * L[a; a]
      - ("generalized", (A, B), w): w * L[A; B]
    """
    mats = []
    manifest = []
    dim = None
    if h is not None:
        dim = h.shape[0]
        mats.append(hamiltonian_superop(h))
        manifest.append(("hamiltonian", 1.0))
    for kind, payload, weight in channels:
        if kind == "dissipator":
            op = payload
            term = weight * dissipator_superop(op)
            label = "D"
        elif kind == "anomalous":
            adag = payload.conj().T
            term = weight * generalized_superop(adag, adag)
            term = term + np.conj(weight) * generalized_superop(payload, payload)
            op = payload
            label = "anomalous"
        elif kind == "generalized":
            a_op, b_op = payload
            term = weight * generalized_superop(a_op, b_op)
            op = a_op
            label = "L[A;B]"
        else:
            raise InvalidInputError(f"unknown channel kind {kind!r}")
        if dim is None:
            dim = op.shape[0]
        elif op.shape[0] != dim:
            raise InvalidInputError(
                f"channel dimension {op.shape[0]} != Liouvillian dimension {dim}"
            )
        mats.append(term)
        manifest.append((label, weight))
    if not mats:
        raise InvalidInputError("empty Liouvillian")
    total = mats[0]
    for m in mats[1:]:
        total = total + m
    return Superoperator(dim=dim, matrix=total.tocsr(), channels=manifest)


def thermal_channels(a_op: np.ndarray, kappa: float, nbar: float):
    """Standard damping ladder: kappa(1+nbar)/2 D[a] + kappa nbar/2 D[a^dag]."""
    chans = [("dissipator", a_op, 0.5 * kappa * (1.0 + nbar))]
    if nbar > 0:
        chans.append(("dissipator", a_op.conj().T, 0.5 * kappa * nbar))
    return chans


def renormalized_liouvillian(
    params: ModelParams,
    solution: AttractorSolution,
    dim: int,
    dephasing: str | None = "rwa",
) -> Superoperator:
    """Generator of the displaced/squeezed master equation on ``dim`` levels.

    ``dephasing``: None ignores eta_ph, "rwa" keeps the rotating-wave-reduced
    channels, "exact" uses the fully transformed number dissipator (the
    neglected terms included, for error estimation).
    """
    alpha, pair = solution.alpha, solution.pair
    coeffs = (
        dephasing_coefficients(params, alpha, pair)
        if (dephasing and params.eta_ph > 0)
        else bath_coefficients(params, pair)
    )
    nbar_eff, m_pair = coeffs.nbar_eff, coeffs.m_pair
    bound = nbar_eff * (nbar_eff + 1.0) + 0.25
    if abs(m_pair) ** 2 > bound * (1.0 + 1e-12):
        warnings.warn(
            f"|M|^2 = {abs(m_pair)**2:.6g} exceeds Nbar(Nbar+1)+1/4 = {bound:.6g}",
            stacklevel=2,
        )
    a, adag = ladder(dim)
    h = renormalized_hamiltonian(params, alpha, pair, dim)
    channels = thermal_channels(a, params.kappa, nbar_eff)
    if abs(m_pair) > 0:
        channels.append(("anomalous", a, 0.5 * params.kappa * m_pair))
    if dephasing and params.eta_ph > 0:
        half_eta = 0.5 * params.eta_ph
        if dephasing == "exact":
            b_op = pair.v * a + pair.u * adag + alpha * np.eye(dim)
            channels.append(("dissipator", b_op.conj().T @ b_op, half_eta))
        elif dephasing == "rwa":
            u2, v2 = abs(pair.u) ** 2, abs(pair.v) ** 2
            mix = abs(np.conj(alpha) * pair.u + alpha * np.conj(pair.v)) ** 2
            n_op = number_operator(dim)
            channels.append(("dissipator", n_op, half_eta * (v2 + u2) ** 2))
            channels.append(("dissipator", a, half_eta * mix))
            channels.append(("dissipator", adag, half_eta * mix))
            channels.append(("dissipator", adag @ adag, half_eta * u2 * v2))
            channels.append(("dissipator", a @ a, half_eta * u2 * v2))
        else:
            raise InvalidInputError(f"unknown dephasing mode {dephasing!r}")
    return build_liouvillian(h, channels)


def bare_liouvillian(params: ModelParams, dim: int) -> Superoperator:
    """Laboratory-rotating-frame generator (no displacement or squeezing)."""
    from duffing_qdyn.model import rwa_hamiltonian

    a, _ = ladder(dim)
    channels = thermal_channels(a, params.kappa, params.nbar)
    if params.eta_ph > 0:
        channels.append(("dissipator", number_operator(dim), 0.5 * params.eta_ph))
    return build_liouvillian(rwa_hamiltonian(params, dim), channels)


def steady_state(
    liouv: Superoperator, check_unique: bool = True, residual_tol: float = 1e-10
) -> np.ndarray:
    """Unique stationary density matrix of the generator.

    Solved by sparse LU with the trace constraint replacing one row; the
    kernel uniqueness check inspects the two eigenvalues nearest zero.
    """
    d = liouv.dim
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    # Trace functional occupies the entries (i*d + i) of the first row.
    trace_row = np.zeros(d * d, dtype=complex)
    trace_row[np.arange(d) * (d + 1)] = 1.0
    if d * d <= _DENSE_SOLVE_LIMIT:
        mat = liouv.matrix.toarray()
        mat[0, :] = trace_row
        x = np.linalg.solve(mat, rhs)
    else:
        mat = liouv.matrix.tolil(copy=True)
        mat[0, :] = trace_row
        x = spla.spsolve(mat.tocsc(), rhs)
    rho = unvectorize(x, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real

    resid = float(np.linalg.norm(liouv.matrix @ vectorize(rho)))
    scale = max(1.0, float(abs(liouv.matrix).max()))
    if resid > residual_tol * scale:
        raise NonUniqueSteadyStateError(
            f"steady-state residual {resid:.3g} above {residual_tol:.1g} x scale"
        )
    min_eig = float(np.linalg.eigvalsh(rho).min())
    if min_eig < -1e-8:
        raise NonUniqueSteadyStateError(
            f"steady state not positive (min eigenvalue {min_eig:.3g})"
        )
    if check_unique:
        sigma = 1e-8 * scale
        try:
            vals = spla.eigs(
                liouv.matrix, k=2, sigma=sigma, which="LM", return_eigenvectors=False
            )
        except Exception:
            vals = None  # shift-invert can fail on tiny systems; residual already checked
        if vals is not None:
            gaps = np.sort(np.abs(vals))
            if gaps[1] <= 1e-8 * scale:
                raise NonUniqueSteadyStateError(
                    f"second eigenvalue {gaps[1]:.3g} within 1e-8 of zero: "
                    "kernel not unique"
                )
    return rho


def evolve(
    liouv: Superoperator,
    rho0: np.ndarray,
    t: float,
    method: str = "rk45",
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> np.ndarray:
    """Propagate rho0 to time t under the generator."""
    if t == 0:
        return np.array(rho0, dtype=complex)
    y0 = vectorize(rho0)
    if method == "expm":
        y = spla.expm_multiply(liouv.matrix * t, y0)
    elif method == "rk45":
        mat = liouv.matrix

        def rhs(_, y):
            return mat @ y

        sol = solve_ivp(rhs, (0.0, t), y0, method="RK45", rtol=rtol, atol=atol)
        if not sol.success:
            raise StiffnessError(
                f"integration failed ({sol.message}); retry with method='expm' "
                "or a smaller dimension"
            )
        y = sol.y[:, -1]
    else:
        raise InvalidInputError(f"unknown evolve method {method!r}")
    return unvectorize(y, liouv.dim)


def emission_spectrum(
    liouv: Superoperator,
    rho_st: np.ndarray,
    a_op: np.ndarray,
    omega_grid: np.ndarray,
    method: str = "resolvent",
    subtract_coherent: bool = True,
    t_max: float | None = None,
    n_times: int = 2048,
) -> np.ndarray:
    """Emission spectrum S(w) = 2 Re int_0^inf e^{-iwt} <adag(t) a(0)> dt.

    ``resolvent`` solves (i w - L) x = vec(a rho_st) per grid point; ``time``
    propagates the same initial condition and Fourier-transforms on a finite
    window (warning when the correlation has not decayed by the cutoff).
    With ``subtract_coherent`` the stationary amplitude <a> is removed, which
    drops only the coherent delta line at w = 0.
    """
    omega_grid = np.asarray(omega_grid, dtype=float)
    d = liouv.dim
    op = np.asarray(a_op, dtype=complex)
    if subtract_coherent:
        op = op - np.trace(op @ rho_st) * np.eye(d)
    init = vectorize(op @ rho_st)
    left = vectorize(op.conj())  # Tr(op^dag X) = vec((op^dag)^T) . vec(X)

    if method == "resolvent":
        out = np.empty_like(omega_grid)
        if d * d <= _DENSE_SOLVE_LIMIT:
            # Dense LAPACK beats SuperLU here: the frame Hamiltonian is dense,
            # so the sparse factorization fills in anyway.
            mat = liouv.matrix.toarray()
            eye = np.eye(d * d, dtype=complex)
            for i, w in enumerate(omega_grid):
                x = np.linalg.solve(1j * w * eye - mat, init)
                out[i] = 2.0 * np.real(left @ x)
        else:
            eye = sp.identity(d * d, dtype=complex, format="csc")
            mat = liouv.matrix.tocsc()
            for i, w in enumerate(omega_grid):
                x = spla.splu(1j * w * eye - mat).solve(init)
                out[i] = 2.0 * np.real(left @ x)
        return out
    if method == "time":
        if t_max is None:
            raise InvalidInputError("time mode requires t_max")
        times = np.linspace(0.0, t_max, n_times)
        states = spla.expm_multiply(
            liouv.matrix, init, start=0.0, stop=t_max, num=n_times, endpoint=True
        )
        corr = states @ left
        tail = abs(corr[-1])
        head = max(abs(corr[0]), 1e-300)
        if tail > 1e-3 * head:
            warnings.warn(
                f"correlation not decayed by t_max (tail/head = {tail / head:.2e}); "
                "spectrum carries a truncation bias of that order",
                stacklevel=2,
            )
        phases = np.exp(-1j * np.outer(omega_grid, times))
        return 2.0 * np.real(np.trapezoid(phases * corr[None, :], times, axis=1))
    raise InvalidInputError(f"unknown spectrum method {method!r}")


def spectrum_peak(
    liouv: Superoperator,
    rho_st: np.ndarray,
    a_op: np.ndarray,
    w_lo: float,
    w_hi: float,
    coarse: int = 13,
    refinements: int = 3,
    **kwargs,
) -> tuple[float, float]:
    """Location and height of the dominant spectral peak in [w_lo, w_hi].

    Coarse scan followed by window refinements around the running maximum,
    finished with a parabolic fit through the best three samples.
    """
    cache: dict[float, float] = {}

    def sample(grid):
        new = [w for w in grid if w not in cache]
        if new:
            vals = emission_spectrum(liouv, rho_st, a_op, np.array(new), **kwargs)
            cache.update(zip(new, vals))
        return np.array([cache[w] for w in grid])

    grid = list(np.linspace(w_lo, w_hi, coarse))
    vals = sample(grid)
    lo, hi = w_lo, w_hi
    for _ in range(refinements):
        best = grid[int(np.argmax(vals))]
        half = (hi - lo) / (coarse - 1)
        lo, hi = best - half, best + half
        grid = list(np.linspace(lo, hi, 7))
        vals = sample(grid)
    i = int(np.argmax(vals))
    if 0 < i < len(grid) - 1:
        x = np.array(grid[i - 1 : i + 2])
        y = vals[i - 1 : i + 2]
        a, b, c = np.polyfit(x, y, 2)
        if a < 0:
            w_peak = -b / (2.0 * a)
            return float(w_peak), float(np.polyval([a, b, c], w_peak))
    return float(grid[i]), float(vals[i])


@dataclass(frozen=True)
class StationaryDistribution:
    """Populations over renormalized-frame levels with their provenance."""

    p: np.ndarray
    source: str
    level_basis: str = "perturbed"

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.min() < -1e-10:
            raise InvalidInputError(f"negative probability {p.min():.3g}")
        if abs(p.sum() - 1.0) > 1e-10:
            raise InvalidInputError(f"probabilities sum to {p.sum():.12g}")


def balance_rates(
    states: StateTable,
    coeffs: RenormCoefficients,
    n_max: int | None = None,
) -> np.ndarray:
    """Transition-rate matrix W[n, m] (from level m to level n), in kappa units.

    W = M <m|a|n>* <n|a|m>* + M* <m|a|n> <n|a|m>
        + (1 + Nbar) |<n|a|m>|^2 + Nbar |<m|a|n>|^2,   n != m,

    with matrix elements between the perturbed states.  Entries are real up
    to roundoff; small negative values from the M terms are clipped to zero
    (a warning reports the count).
    """
    n_lev = states.n_levels if n_max is None else min(n_max + 1, states.n_levels)
    c = states.coeffs[:, :n_lev]
    a, _ = ladder(states.coeffs.shape[0])
    amat = c.conj().T @ a @ c  # amat[n, m] = <n|a|m>
    nbar_eff, m_pair = coeffs.nbar_eff, coeffs.m_pair
    down = amat
    up = amat.T  # up[n, m] = <m|a|n>
    w = (
        m_pair * np.conj(up) * np.conj(down)
        + np.conj(m_pair) * up * down
        + (1.0 + nbar_eff) * np.abs(down) ** 2
        + nbar_eff * np.abs(up) ** 2
    )
    w_real = w.real
    imag_leak = float(np.max(np.abs(w.imag)))
    if imag_leak > 1e-10:
        warnings.warn(f"rate matrix imaginary leakage {imag_leak:.3g}", stacklevel=2)
    np.fill_diagonal(w_real, 0.0)
    negative = w_real < 0
    if negative.any():
        worst = float(w_real.min())
        count = int(negative.sum())
        if worst < -1e-10:
            warnings.warn(
                f"clipped {count} negative rates (most negative {worst:.3g})",
                stacklevel=2,
            )
        w_real = np.where(negative, 0.0, w_real)
    return w_real


def balance_steady(w: np.ndarray) -> StationaryDistribution:
    """Stationary distribution of dp_n/dt = kappa sum_m (W_nm p_m - W_mn p_n)."""
    w = np.asarray(w, dtype=float)
    n = w.shape[0]
    from scipy.sparse.csgraph import connected_components

    n_comp, _ = connected_components(sp.csr_matrix(w > 0), connection="strong")
    if n_comp != 1:
        raise ReducibleRatesError(
            f"rate graph splits into {n_comp} strongly connected components"
        )
    gen = w - np.diag(w.sum(axis=0))
    gen[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    p = np.linalg.solve(gen, rhs)
    p = np.where(np.abs(p) < 1e-14, 0.0, p)
    return StationaryDistribution(p=p / p.sum(), source="balance")


def steady_populations(
    rho: np.ndarray, states: StateTable, n_max: int | None = None
) -> StationaryDistribution:
    """Diagonal of a density matrix in the perturbed-level basis, renormalized."""
    n_lev = states.n_levels if n_max is None else min(n_max + 1, states.n_levels)
    c = states.coeffs[:, :n_lev]
    d = rho.shape[0]
    cd = c[:d, :] if c.shape[0] >= d else np.vstack([c, np.zeros((d - c.shape[0], n_lev))])
    p = np.real(np.einsum("in,ij,jn->n", cd.conj(), rho, cd))
    p = np.clip(p, 0.0, None)
    return StationaryDistribution(p=p / p.sum(), source="full-liouvillian")
