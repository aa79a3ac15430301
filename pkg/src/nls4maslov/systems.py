"""First-order Hamiltonian systems for the eigenvalue problems of L+, L- and N.

Each system is written as w' = A(x; lambda) w with A = [[0, B], [C, 0]],
B constant symmetric and C(x; lambda) symmetric, so A^T J + J A = 0.

Coordinates:
  L+ : (u'' + s u, u, u', u''')
  L- : (v'' + s v, -v, -v', v''')
  N  : (u1, v1, u2, v2, u3, v3, u4, v4) built from the two above.
The profile enters only through q(x) = phi(x)^(2p), and A is affine in q:
A(x; lam) = A_const(lam) + q(x) D.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegeneracyError, DomainError
from .profiles import Parameters, WaveProfile


class Kind(str, Enum):
    LPLUS = "LPlus"
    LMINUS = "LMinus"
    N = "N"

    @property
    def half_dim(self) -> int:
        return 4 if self is Kind.N else 2


def symplectic_J(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def _blocks_const(kind: Kind, params: Parameters, lam: float):
    s, beta = params.sigma2, params.beta
    s2 = float(s * s)
    if kind is Kind.LPLUS:
        B = np.array([[s, 1.0], [1.0, 0.0]])
        C = np.array([[1.0, -s], [-s, s2 - beta - lam]])
    elif kind is Kind.LMINUS:
        B = np.array([[-s, 1.0], [1.0, 0.0]])
        C = np.array([[-1.0, -s], [-s, beta - s2 + lam]])
    else:
        B = np.array(
            [[s, 0, 1, 0], [0, -s, 0, 1], [1, 0, 0, 0], [0, 1, 0, 0]], dtype=float
        )
        C = np.array(
            [
                [1, 0, -s, 0],
                [0, -1, 0, -s],
                [-s, 0, s2 - beta, lam],
                [0, -s, lam, beta - s2],
            ],
            dtype=float,
        )
    return B, C


def _potential_block(kind: Kind, params: Parameters) -> np.ndarray:
    """dC/dq: where phi^(2p) enters C."""
    k = 2 * params.power_p + 1
    n = kind.half_dim
    E = np.zeros((n, n))
    if kind is Kind.LPLUS:
        E[1, 1] = k
    elif kind is Kind.LMINUS:
        E[1, 1] = -1.0
    else:
        E[2, 2] = k
        E[3, 3] = -1.0
    return E


def _lambda_block(kind: Kind) -> np.ndarray:
    """dC/dlambda."""
    n = kind.half_dim
    E = np.zeros((n, n))
    if kind is Kind.LPLUS:
        E[1, 1] = -1.0
    elif kind is Kind.LMINUS:
        E[1, 1] = 1.0
    else:
        E[2, 3] = E[3, 2] = 1.0
    return E


def _assemble(B, C):
    n = B.shape[0]
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = B
    A[n:, :n] = C
    return A


def asymptotic_matrix(kind, params: Parameters, lam: float) -> np.ndarray:
    """A_infinity(lambda), the limit of A(x; lambda) as |x| -> infinity."""
    return _assemble(*_blocks_const(Kind(kind), params, lam))


class LinearSystem:
    """Coefficient-matrix generator for one of L+, L-, N around a given profile."""

    def __init__(self, kind, profile: WaveProfile):
        self.kind = Kind(kind)
        self.profile = profile
        self.params = profile.params
        self.n = self.kind.half_dim
        self.dim = 2 * self.n
        self.J = symplectic_J(self.n)
        self.B = _blocks_const(self.kind, self.params, 0.0)[0]
        D = np.zeros((self.dim, self.dim))
        D[self.n :, : self.n] = _potential_block(self.kind, self.params)
        self.D = D
        Al = np.zeros((self.dim, self.dim))
        Al[self.n :, : self.n] = _lambda_block(self.kind)
        self.A_lambda = Al
        self.E = _potential_block(self.kind, self.params)

    def C_const(self, lam: float) -> np.ndarray:
        return _blocks_const(self.kind, self.params, lam)[1]

    def __repr__(self):
        return f"LinearSystem({self.kind.value}, {self.profile.name})"

    def constant_part(self, lam: float) -> np.ndarray:
        return asymptotic_matrix(self.kind, self.params, lam)

    def C(self, x: float, lam: float) -> np.ndarray:
        _, C = _blocks_const(self.kind, self.params, lam)
        q = float(self.profile.potential(x)[0])
        return C + q * _potential_block(self.kind, self.params)

    def coefficient_matrix(self, x: float, lam: float) -> np.ndarray:
        q = float(self.profile.potential(x)[0])
        return self.constant_part(lam) + q * self.D

    def coefficient_derivatives(self, x: float, lam: float, order: int):
        """[A, A', ..., A^(order)] at x, from the potential's Taylor jet."""
        qj = self.profile.potential_jet(x, order)
        out = [self.constant_part(lam) + qj[0] * self.D]
        out.extend(qj[j] * self.D for j in range(1, order + 1))
        return out


def coefficient_matrix(system: LinearSystem, x: float, lam: float) -> np.ndarray:
    return system.coefficient_matrix(x, lam)


# ---------------------------------------------------------------------------
# Essential spectrum and spatial eigenvalues


@dataclass(frozen=True)
class EssentialSpectrum:
    """For L+/L-: the half line (-inf, right_endpoint].
    For N: the imaginary rays {i t : |t| >= gap}."""

    kind: Kind
    right_endpoint: float | None = None
    gap: float | None = None

    def contains(self, lam: float) -> bool:
        if self.kind is Kind.N:
            return False  # lambda is real throughout; N's essential spectrum is imaginary
        return lam <= self.right_endpoint


def _dispersion_max(params: Parameters) -> float:
    # max_k (-k^4 + s k^2 - beta)
    s = params.sigma2
    return (0.25 if s == 1 else 0.0) - params.beta


def essential_spectrum(kind, params: Parameters) -> EssentialSpectrum:
    kind = Kind(kind)
    edge = _dispersion_max(params)
    if kind is Kind.N:
        return EssentialSpectrum(kind, gap=-edge)
    return EssentialSpectrum(kind, right_endpoint=edge)


def _sort_mu(vals):
    vals = np.asarray(vals, dtype=complex)
    order = np.lexsort((np.round(vals.imag, 12), np.round(vals.real, 12)))
    return vals[order]


def spatial_eigen(lam: float, params: Parameters, kind) -> np.ndarray:
    """Roots mu of det(A_inf(lambda) - mu) = 0, sorted by real then imaginary part."""
    kind = Kind(kind)
    if essential_spectrum(kind, params).contains(lam):
        raise DomainError(f"lambda = {lam} lies in the essential spectrum of {kind.value}")
    s, beta = params.sigma2, params.beta
    if kind is Kind.N:
        shifts = [1j * lam, -1j * lam]
    else:
        shifts = [complex(lam)]
    roots = []
    for sh in shifts:
        disc = np.sqrt(complex(s * s - 4.0 * (beta + sh)))
        for sgn in (1.0, -1.0):
            mu = np.sqrt((-s + sgn * disc) / 2.0)
            roots.extend([mu, -mu])
    mus = _sort_mu(roots)
    if np.min(np.abs(mus.real)) < 1e-12:
        raise DomainError(f"spatial eigenvalue on the imaginary axis at lambda = {lam}")
    return mus


def _schur_graph(A, n, sign):
    from scipy.linalg import schur

    _, Q, sdim = schur(A, output="real", sort="lhp" if sign < 0 else "rhp")
    if sdim != n:
        raise DegeneracyError(f"expected {n} eigenvalues in the half plane, got {sdim}")
    Q1, Q2 = Q[:n, :n], Q[n:, :n]
    if np.linalg.cond(Q1) > 1e12:
        raise DegeneracyError("asymptotic subspace is not a graph over the first block")
    S = np.linalg.solve(Q1.T, Q2.T).T
    return 0.5 * (S + S.T)


def _graph_block(kind, params, lam, sign, strict=True):
    kind = Kind(kind)
    n = kind.half_dim
    mus = spatial_eigen(lam, params, kind)
    A = asymptotic_matrix(kind, params, lam)
    if not strict:
        # invariant subspace via ordered real Schur form; fine even when defective
        return _schur_graph(A, n, sign)
    target = mus[:n] if sign < 0 else mus[n:]
    scale = max(1.0, float(np.max(np.abs(target))))
    gaps = np.abs(target[:, None] - target[None, :]) + np.eye(n) * 1e300
    if gaps.min() < 1e-7 * scale:
        raise DegeneracyError(f"coincident spatial eigenvalues at lambda = {lam}")
    evals, evecs = np.linalg.eig(A)
    pick = evals.real < 0 if sign < 0 else evals.real > 0
    if pick.sum() != n:
        raise DegeneracyError(f"expected {n} eigenvalues in the half plane, got {pick.sum()}")
    P = evecs[:, pick]
    P1, P2 = P[:n], P[n:]
    if np.linalg.cond(P1) > 1e12:
        raise DegeneracyError("asymptotic subspace is not a graph over the first block")
    S = np.linalg.solve(P1.T, P2.T).T
    if np.max(np.abs(S.imag)) > 1e-10 * max(1.0, np.max(np.abs(S.real))):
        raise DegeneracyError("graph block has a non-negligible imaginary part")
    S = S.real
    return 0.5 * (S + S.T)


def stable_frame(lam: float, kind, params: Parameters, strict: bool = True) -> np.ndarray:
    """Symmetric S(lambda) with span (I; S) the decaying subspace of A_inf(lambda).

    ``strict`` builds S from eigenvectors and rejects coincident spatial
    eigenvalues; otherwise an ordered Schur basis is used, which stays valid
    across the isolated lambda where two eigenvalues merge.
    """
    return _graph_block(kind, params, lam, -1, strict)


def unstable_frame(lam: float, kind, params: Parameters, strict: bool = True) -> np.ndarray:
    """Symmetric U(lambda) with span (I; U) the growing subspace of A_inf(lambda)."""
    return _graph_block(kind, params, lam, +1, strict)


def graph_frame(S: np.ndarray) -> np.ndarray:
    n = S.shape[0]
    return np.vstack([np.eye(n), S])
