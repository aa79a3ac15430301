"""Inhomogeneous problems -L_- v = phi_x and L_+ u = phi, and the integrals I1, I2.

    L_+ = -d^4 - sigma2 d^2 - beta + (2p+1) phi^(2p)
    L_- = -d^4 - sigma2 d^2 - beta + phi^(2p)

Both operators have a one-dimensional kernel (phi_x and phi). The right-hand
sides are orthogonal to the kernel, so solutions exist; they are unique up to
adding a kernel element, which does not change I1 = int phi_x v and
I2 = int phi u. Discretization: sixth-order centred differences on a uniform
grid with zero ghost values beyond +-L, and a bordered system
[[L, k], [k^T, 0]] that pins the kernel component.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DegenerateCaseError, PreconditionError, SolverError
from .profiles import WaveProfile

D2_STENCIL = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
D4_STENCIL = np.array([7 / 240, -2 / 5, 169 / 60, -122 / 15, 91 / 8, -122 / 15, 169 / 60, -2 / 5, 7 / 240])


class SolveKind(str, Enum):
    LPLUS_PHI = "LPlusPhi"  # L+ u = phi
    LMINUS_PHIX = "LMinusPhiX"  # -L- v = phi_x


@dataclass(frozen=True)
class Discretization:
    h: float = 0.01
    pad: float = 10.0
    solver_tol: float = 1e-8
    fredholm_tol: float = 1e-8
    half_width: float | None = None

    def grid(self, profile: WaveProfile) -> np.ndarray:
        L = self.half_width if self.half_width is not None else profile.support_halfwidth + self.pad
        n = int(round(L / self.h))
        return self.h * np.arange(-n, n + 1)


@dataclass
class InhomogeneousSolution:
    kind: SolveKind
    grid: np.ndarray
    values: np.ndarray
    rhs: np.ndarray
    kernel: np.ndarray
    residual_norm: float  # max |L u - f| / (||L|| ||u|| + ||f||)
    kernel_overlap: float

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True)
class CorrectionData:
    I1: float
    I2: float
    c: int | None


def _banded(stencil, N):
    half = stencil.size // 2
    return sp.diags([np.full(N - abs(o), stencil[o + half]) for o in range(-half, half + 1)],
                    list(range(-half, half + 1)), shape=(N, N), format="csr")


def fd_operator(which: str, profile: WaveProfile, x: np.ndarray):
    """Sparse discretization of L_+ (``which="plus"``) or L_- (``"minus"``) on the grid x."""
    h = float(x[1] - x[0])
    N = x.size
    pr = profile.params
    q = profile.potential(x)
    coef = 2 * pr.power_p + 1 if which == "plus" else 1.0
    D4 = _banded(D4_STENCIL, N) / h**4
    D2 = _banded(D2_STENCIL, N) / h**2
    return (-D4 - pr.sigma2 * D2 + sp.diags(coef * q - pr.beta)).tocsr()


def _trapz(y, h):
    return float(h * (np.sum(y) - 0.5 * (y[0] + y[-1])))


def solve_inhomogeneous(kind, profile: WaveProfile, disc: Discretization = Discretization(),
                        rhs=None) -> InhomogeneousSolution:
    """Solve L+ u = phi or -L- v = phi_x (or the same operator with a custom rhs)."""
    kind = SolveKind(kind)
    x = disc.grid(profile)
    d = profile.eval(x)
    phi, phix = d[0], d[1]
    h = float(x[1] - x[0])
    if kind is SolveKind.LPLUS_PHI:
        op = fd_operator("plus", profile, x)
        kernel = phix
        f = phi if rhs is None else np.asarray(rhs, dtype=float)
    else:
        op = -fd_operator("minus", profile, x)
        kernel = phi
        f = phix if rhs is None else np.asarray(rhs, dtype=float)
    kn = np.sqrt(_trapz(kernel**2, h))
    fn = np.sqrt(_trapz(f**2, h))
    if kn == 0.0:
        raise DegenerateCaseError("profile is identically zero; the kernel is trivial")
    overlap = _trapz(f * kernel, h) / (kn * max(fn, 1e-300))
    if abs(overlap) > disc.fredholm_tol:
        raise PreconditionError(
            f"right-hand side is not orthogonal to the kernel (normalized overlap {overlap:.3e})"
        )
    N = x.size
    k = kernel / kn
    M = sp.bmat([[op, sp.csr_matrix(k[:, None])], [sp.csr_matrix(k[None, :]), None]], format="csc")
    sol = spsolve(M, np.concatenate([f, [0.0]]))
    u, c = sol[:N], sol[N]
    if not np.all(np.isfinite(u)):
        raise SolverError("bordered system is singular")
    # normwise backward error; the absolute residual sits at ||L_h|| * eps ~ h^-4 * 1e-16
    opnorm = float(np.max(np.abs(op).sum(axis=1)))
    res = float(np.max(np.abs(op @ u - f))) / (opnorm * float(np.max(np.abs(u))) + float(np.max(np.abs(f))))
    if res > disc.solver_tol:
        raise SolverError(f"relative residual {res:.2e} exceeds tolerance (border coefficient {c:.2e})")
    return InhomogeneousSolution(kind, x, u, f, kernel, res, float(overlap))


def compute_integrals(profile: WaveProfile, solutions=None, disc: Discretization = Discretization(),
                      zero_tol: float = 1e-10) -> CorrectionData:
    """I1 = int phi_x v and I2 = int phi u by the trapezoid rule on the solver grid."""
    if solutions is None:
        from .bundles import pmap

        solutions = pmap(lambda kd: solve_inhomogeneous(kd, profile, disc),
                         [SolveKind.LMINUS_PHIX, SolveKind.LPLUS_PHI])
    by_kind = {s.kind: s for s in solutions}
    v = by_kind[SolveKind.LMINUS_PHIX]
    u = by_kind[SolveKind.LPLUS_PHI]
    I1 = _trapz(v.rhs * v.values, v.h)
    I2 = _trapz(u.rhs * u.values, u.h)
    try:
        c = correction_term(I1, I2, zero_tol)
    except DegenerateCaseError:
        c = None
    return CorrectionData(float(I1), float(I2), c)


def correction_term(I1: float, I2: float, zero_tol: float = 1e-10) -> int:
    """Corner correction from the signs of I1 and I2."""
    if abs(I1) <= zero_tol or abs(I2) <= zero_tol:
        raise DegenerateCaseError(
            f"I1 = {I1:.3e}, I2 = {I2:.3e}: a vanishing integral needs a higher-order corner form, "
            "which is not supported"
        )
    if I1 > 0 and I2 < 0:
        return 1
    if I1 < 0 and I2 > 0:
        return -1
    return 0
