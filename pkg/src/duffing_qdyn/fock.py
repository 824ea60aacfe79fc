"""Truncated Fock-space linear algebra.

Operators are plain complex ``numpy`` arrays on the basis |0>, ..., |dim-1>.
Displacement and squeezing unitaries are built by exponentiating their
anti-Hermitian generators through an eigendecomposition, which keeps them
unitary to machine precision on the retained space.

Bogoliubov pairs (u, v) with |v|^2 - |u|^2 = 1 describe the transformation
U^dag a U = v a + u a^dag of a squeezing unitary U.  Throughout the package
pairs are kept in the gauge where v is real and positive; every such pair is
realised by a single squeeze unitary ``squeeze(xi)`` with
v = cosh|xi| and u = -(xi/|xi|) sinh|xi|.  (The opposite-phase convention
u = -(xi*/|xi|) sinh|xi| fails the numerical transform test; see README.)
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from duffing_qdyn.errors import InvalidDimensionError, InvalidPairError, TruncationError

CANONICAL_TOL = 1e-10


def ladder(dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and creation operators on a ``dim``-dimensional Fock space.

    a|n> = sqrt(n)|n-1>, adag = a^dag, and adag @ a = diag(0, ..., dim-1).
    """
    if dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be >= 2, got {dim}")
    a = np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)
    return a, a.conj().T


def number_operator(dim: int) -> np.ndarray:
    """Diagonal number operator a^dag a."""
    if dim < 2:
        raise InvalidDimensionError(f"Fock dimension must be >= 2, got {dim}")
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def displacement_dim_guideline(alpha: complex) -> int:
    """Smallest dimension for which D(alpha) is well represented (heuristic)."""
    r = abs(alpha)
    return max(2, math.ceil(r * r + 6.0 * r))


def squeeze_dim_guideline(xi: complex) -> int:
    """Smallest dimension for which S(xi) is well represented (heuristic)."""
    return max(2, math.ceil(4.0 * math.cosh(2.0 * abs(xi))))


def _expm_antihermitian(generator: np.ndarray) -> np.ndarray:
    # generator must satisfy G^dag = -G; exp(G) = V exp(i k) V^dag with K = -iG.
    k = -1j * generator
    vals, vecs = eigh(k)
    return (vecs * np.exp(1j * vals)) @ vecs.conj().T


def displacement(alpha: complex, dim: int, *, check_truncation: bool = True) -> np.ndarray:
    """Displacement unitary exp(alpha a^dag - alpha* a).

    Raises `TruncationError` when the heuristic |alpha|^2 + 6|alpha| <= dim is
    violated; pass ``check_truncation=False`` to override.
    """
    a, adag = ladder(dim)
    if check_truncation:
        needed = displacement_dim_guideline(alpha)
        if dim < needed:
            raise TruncationError(
                f"dim={dim} too small for displacement alpha={alpha:.6g}", needed
            )
    return _expm_antihermitian(alpha * adag - np.conj(alpha) * a)


def squeeze(xi: complex, dim: int, *, check_truncation: bool = True) -> np.ndarray:
    """Squeezing unitary exp((xi* a^2 - xi a^dag^2)/2)."""
    a, adag = ladder(dim)
    if check_truncation:
        needed = squeeze_dim_guideline(xi)
        if dim < needed:
            raise TruncationError(f"dim={dim} too small for squeeze xi={xi:.6g}", needed)
    return _expm_antihermitian(0.5 * (np.conj(xi) * (a @ a) - xi * (adag @ adag)))


@dataclass(frozen=True)
class SqueezePair:
    """Bogoliubov coefficients (u, v) with |v|^2 - |u|^2 = 1."""

    u: complex
    v: complex

    def canonical_defect(self) -> float:
        return abs(abs(self.v) ** 2 - abs(self.u) ** 2 - 1.0)

    def require_canonical(self, tol: float = CANONICAL_TOL) -> None:
        defect = self.canonical_defect()
        if not defect <= tol:
            raise InvalidPairError(
                f"pair (u={self.u:.6g}, v={self.v:.6g}) violates |v|^2-|u|^2=1 "
                f"by {defect:.3g}"
            )

    @classmethod
    def identity(cls) -> "SqueezePair":
        return cls(0.0 + 0.0j, 1.0 + 0.0j)


def pair_from_xi(xi: complex) -> SqueezePair:
    """Bogoliubov pair of the squeeze unitary: v = cosh|xi|, u = -(xi/|xi|) sinh|xi|."""
    r = abs(xi)
    if r == 0.0:
        return SqueezePair.identity()
    return SqueezePair(u=-(xi / r) * math.sinh(r), v=complex(math.cosh(r)))


def xi_from_pair(pair: SqueezePair, tol: float = CANONICAL_TOL) -> complex:
    """Inverse of `pair_from_xi`: the xi whose squeeze unitary realises ``pair``.

    The pair must be canonical and in the real-v gauge (v real positive up to
    ``tol``); pairs produced by the steady-state solvers satisfy this.
    """
    pair.require_canonical(tol)
    if abs(pair.v.imag) > math.sqrt(tol) or pair.v.real <= 0:
        raise InvalidPairError(
            f"pair has v={pair.v:.6g}; xi extraction requires the real-positive-v gauge"
        )
    r = math.asinh(abs(pair.u))
    if r == 0.0:
        return 0.0 + 0.0j
    phase = -pair.u / abs(pair.u)
    return r * phase


def pair_unitary(pair: SqueezePair, dim: int, *, check_truncation: bool = True) -> np.ndarray:
    """Squeeze unitary U with U^dag a U = v a + u a^dag for a real-v-gauge pair."""
    return squeeze(xi_from_pair(pair), dim, check_truncation=check_truncation)
