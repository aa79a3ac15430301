"""Unstable/stable bundles, detection functions and crossing location.

Frames are propagated on a uniform grid with a fixed-step sixth-order
Runge-Kutta method (see ``_kernels``). Whenever a column norm exceeds the
renormalization threshold the frame is replaced by the Q factor of a QR
decomposition whose R has positive diagonal, which keeps the subspace and
every determinant sign intact.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import _kernels
from .errors import DomainError, IntegrationError
from .systems import (
    Kind,
    LinearSystem,
    essential_spectrum,
    graph_frame,
    spatial_eigen,
    stable_frame,
    unstable_frame,
)


class Edge(str, Enum):
    GAMMA1 = "Gamma1"
    GAMMA2 = "Gamma2"
    GAMMA3 = "Gamma3"
    GAMMA4 = "Gamma4"


@dataclass(frozen=True)
class IntegrationConfig:
    h: float = 0.01
    renorm_threshold: float = 1e6
    tail_pad: float = 10.0
    decay_lengths: float = 40.0
    backend: str | None = None


DEFAULT_CONFIG = IntegrationConfig()


def thread_count() -> int:
    raw = os.environ.get("MASLOV_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return max(1, min(8, os.cpu_count() or 1))


def pmap(fn, items):
    """Order-preserving map, threaded up to MASLOV_THREADS workers."""
    items = list(items)
    workers = min(thread_count(), len(items))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# frames


@dataclass
class LagrangianFrame:
    X: np.ndarray
    Y: np.ndarray
    x: float = math.nan
    lam: float = math.nan
    log_scale: float = 0.0

    @classmethod
    def from_matrix(cls, Z, x=math.nan, lam=math.nan, log_scale=0.0):
        Z = np.asarray(Z, dtype=float)
        n = Z.shape[0] // 2
        return cls(Z[:n].copy(), Z[n:].copy(), x, lam, log_scale)

    @classmethod
    def graph(cls, S, x=math.nan, lam=math.nan):
        return cls.from_matrix(graph_frame(np.asarray(S, dtype=float)), x, lam)

    @property
    def Z(self) -> np.ndarray:
        return np.vstack([self.X, self.Y])

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def lagrangian_defect(self) -> float:
        Z = self.Z
        return float(np.linalg.norm(self.X.T @ self.Y - self.Y.T @ self.X) / np.linalg.norm(Z) ** 2)


def _orthonormal(Z):
    Q, _ = np.linalg.qr(np.asarray(Z, dtype=float))
    return Q


def intersection_dimension(frameA, frameB, tol: float = 1e-6) -> int:
    """dim(span A  cap  span B) from the singular values of [A | B].

    Both frames are orthonormalized first, so the small singular values are
    sines of half principal angles and ``tol`` is scale free.
    """
    A = frameA.Z if isinstance(frameA, LagrangianFrame) else np.asarray(frameA)
    B = frameB.Z if isinstance(frameB, LagrangianFrame) else np.asarray(frameB)
    M = np.hstack([_orthonormal(A), _orthonormal(B)])
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s < tol * s[0]))


def intersection_basis(frameA, frameB, tol: float = 1e-6):
    """Coefficient vectors (a, b) with A a = B b spanning the intersection."""
    A = frameA.Z if isinstance(frameA, LagrangianFrame) else np.asarray(frameA)
    B = frameB.Z if isinstance(frameB, LagrangianFrame) else np.asarray(frameB)
    k = A.shape[1]
    M = np.hstack([A, -B])
    _, s, Vt = np.linalg.svd(M)
    d = intersection_dimension(A, B, tol)
    null = Vt[M.shape[1] - d :].T
    return null[:k], null[k:]


def _orthonormal_with_sign(Z):
    """Q with span Q = span Z and sign(det R), where Z = Q R (stacked frames allowed)."""
    Q, R = np.linalg.qr(Z)
    sign = np.sign(np.prod(np.diagonal(R, axis1=-2, axis2=-1), axis=-1))
    return Q, sign


def normalized_det(Z, V):
    """det[Z | V] / sqrt(det Z^T Z det V^T V); zero exactly when the planes meet.

    Evaluated through orthonormal bases, which equals the Gram-normalized
    determinant but stays accurate for badly scaled frames.
    """
    Qz, sz = _orthonormal_with_sign(np.asarray(Z, dtype=float))
    Qv, sv = _orthonormal_with_sign(np.asarray(V, dtype=float))
    M = np.concatenate([Qz, np.broadcast_to(Qv, Qz.shape[:-1] + Qv.shape[-1:])], axis=-1)
    return np.linalg.det(M) * sz * sv


def graph_detection(Z, S):
    """det(S X - Y) / sqrt(det Z^T Z) for frames Z = (X; Y)."""
    Q, sz = _orthonormal_with_sign(np.asarray(Z, dtype=float))
    n = S.shape[0]
    return np.linalg.det(S @ Q[..., :n, :] - Q[..., n:, :]) * sz


# ---------------------------------------------------------------------------
# grid helpers


def x_start_for(system: LinearSystem, lam: float, cfg: IntegrationConfig = DEFAULT_CONFIG) -> float:
    """Distance from the origin at which the dichotomy initialization is applied."""
    mus = spatial_eigen(lam, system.params, system.kind)
    rate = float(np.min(np.abs(mus.real)))
    return max(system.profile.support_halfwidth + cfg.tail_pad, cfg.decay_lengths / rate)


def _grid(anchor: float, far: float, h: float):
    """Uniform grid from ``far`` to ``anchor`` ending exactly at anchor."""
    n = max(1, int(math.ceil(abs(anchor - far) / h - 1e-9)))
    step = math.copysign(h, anchor - far)
    start = anchor - n * step
    return start, step, n


def _potential_table(profile, start, step, n):
    nodes = _kernels.node_positions(start, step, n)
    return profile.potential(nodes.ravel()).reshape(nodes.shape)


# ---------------------------------------------------------------------------
# bundle paths


@dataclass
class BundlePath:
    system: LinearSystem
    lam: float
    xs: np.ndarray
    frames: np.ndarray
    renorm_flags: np.ndarray
    r_factors: np.ndarray
    kind: str  # "unstable" or "stable"
    cfg: IntegrationConfig = field(default_factory=IntegrationConfig)

    @property
    def step(self) -> float:
        return float(self.xs[1] - self.xs[0])

    @property
    def end(self) -> LagrangianFrame:
        return LagrangianFrame.from_matrix(self.frames[-1], x=float(self.xs[-1]), lam=self.lam)

    @property
    def renorm_events(self):
        idx = np.nonzero(self.renorm_flags)[0]
        return [(float(self.xs[i]), float(np.sign(np.linalg.det(self.r_factors[i])))) for i in idx]

    def frame(self, i) -> LagrangianFrame:
        return LagrangianFrame.from_matrix(self.frames[i], x=float(self.xs[i]), lam=self.lam)

    def lagrangian_drift(self) -> float:
        n = self.system.n
        X, Y = self.frames[:, :n], self.frames[:, n:]
        W = np.swapaxes(X, 1, 2) @ Y
        defect = np.linalg.norm(W - np.swapaxes(W, 1, 2), axis=(1, 2))
        scale = np.sum(self.frames**2, axis=(1, 2))
        return float(np.max(defect / scale))

    def frame_at(self, x: float) -> np.ndarray:
        """Frame at an arbitrary x inside the path, by a partial step from the nearest earlier sample."""
        s = self.step
        t = (x - self.xs[0]) / s
        i = int(min(max(math.floor(t + 1e-12), 0), len(self.xs) - 1))
        delta = x - self.xs[i]
        Z = self.frames[i]
        if abs(delta) < 1e-15:
            return Z.copy()
        sysm, lam = self.system, self.lam
        A0 = sysm.constant_part(lam)
        D = sysm.D
        prof = sysm.profile

        def f(xx, W):
            return (A0 + float(prof.potential(xx)[0]) * D) @ W

        return _kernels.rk6_step(f, float(self.xs[i]), Z, delta)

    def solution(self, coeff_end) -> np.ndarray:
        """Samples w(x_i) of the solution equal to frames[-1] @ coeff_end at the last sample."""
        c = np.array(coeff_end, dtype=float)
        out = np.empty((len(self.xs), self.frames.shape[1]) + c.shape[1:])
        for i in range(len(self.xs) - 1, -1, -1):
            out[i] = self.frames[i] @ c
            if self.renorm_flags[i]:
                c = np.linalg.solve(self.r_factors[i], c)
        return out


def _integrate(system, lam, far, anchor, init_block, kind, cfg):
    start, step, n = _grid(anchor, far, cfg.h)
    q = _potential_table(system.profile, start, step, n)
    Z0 = graph_frame(init_block)
    frames, R, flags = _kernels.propagate(
        system.B, system.C_const(lam), system.E, q, Z0, step, cfg.renorm_threshold, cfg.backend
    )
    if not np.all(np.isfinite(frames)):
        raise IntegrationError(f"non-finite frame while integrating {kind} bundle at lambda = {lam}")
    xs = start + step * np.arange(n + 1)
    xs[-1] = anchor
    return BundlePath(system, float(lam), xs, frames, flags, R, kind, cfg)


def _check_lambda(system, lam):
    if essential_spectrum(system.kind, system.params).contains(lam):
        raise DomainError(f"lambda = {lam} lies in the essential spectrum of {system.kind.value}")


def integrate_unstable(system: LinearSystem, lam: float, x_end: float, x_start: float | None = None,
                       cfg: IntegrationConfig = DEFAULT_CONFIG) -> BundlePath:
    """E^u(x, lambda) from (I; U(lambda)) at x_start up to x_end."""
    _check_lambda(system, lam)
    if x_start is None:
        x_start = -x_start_for(system, lam, cfg)
    U = unstable_frame(lam, system.kind, system.params, strict=False)
    return _integrate(system, lam, x_start, x_end, U, "unstable", cfg)


def integrate_stable(system: LinearSystem, lam: float, x_end: float, x_start: float | None = None,
                     cfg: IntegrationConfig = DEFAULT_CONFIG) -> BundlePath:
    """E^s(x, lambda) from (I; S(lambda)) at x_start > 0 leftward to x_end."""
    _check_lambda(system, lam)
    if x_start is None:
        x_start = x_start_for(system, lam, cfg)
    S = stable_frame(lam, system.kind, system.params, strict=False)
    return _integrate(system, lam, x_start, x_end, S, "stable", cfg)


# ---------------------------------------------------------------------------
# detection functions


def detection_values(path: BundlePath, reference) -> np.ndarray:
    """Normalized detection value at every sample of ``path``.

    ``reference`` is either a symmetric block S (graph reference (I; S)), for
    which the value is det(S X - Y) / sqrt(det Z^T Z), or a general frame V,
    for which it is det[Z | V] normalized by both Gram determinants. The
    normalization is positive and renormalization invariant, so zeros and
    signs match the raw determinant.
    """
    ref = np.asarray(reference.Z if isinstance(reference, LagrangianFrame) else reference, dtype=float)
    if ref.shape[0] == ref.shape[1] and ref.shape[0] == path.system.n:
        return graph_detection(path.frames, ref)
    return normalized_det(path.frames, ref)


def detection_function(path: BundlePath, reference):
    """Return x -> normalized detection value, evaluated with dense stepping."""
    ref = np.asarray(reference.Z if isinstance(reference, LagrangianFrame) else reference, dtype=float)
    graph = ref.shape[0] == ref.shape[1] and ref.shape[0] == path.system.n

    def D(x):
        Z = path.frame_at(float(x))
        return float(graph_detection(Z, ref) if graph else normalized_det(Z, ref))

    return D


@dataclass(frozen=True)
class CrossingLocation:
    coordinate: float
    dim: int
    which_edge: Edge
    at_endpoint: bool = False
    touch: bool = False

    def to_dict(self):
        return {
            "coordinate": self.coordinate,
            "dim": self.dim,
            "edge": self.which_edge.value,
            "at_endpoint": self.at_endpoint,
            "touch": self.touch,
        }


def _candidate_cells(vals, dip_tol):
    """Indices i with a sign change on [i, i+1] and indices of small local minima of |vals|."""
    v = np.asarray(vals)
    changes = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0].tolist()
    zeros = np.nonzero(v == 0.0)[0].tolist()
    a = np.abs(v)
    dips = []
    if v.size >= 3:
        inner = np.nonzero((a[1:-1] < a[:-2]) & (a[1:-1] <= a[2:]) & (a[1:-1] < dip_tol))[0] + 1
        for i in inner:
            if np.sign(v[i - 1]) == np.sign(v[i + 1]) and np.sign(v[i]) == np.sign(v[i - 1]):
                dips.append(int(i))
    return changes, zeros, dips


def _refine_sign_change(g, a, b, xtol):
    return brentq(g, a, b, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)


def _refine_dip(g, a, b, xtol):
    res = minimize_scalar(lambda t: abs(g(t)), bounds=(min(a, b), max(a, b)), method="bounded",
                          options={"xatol": xtol})
    return float(res.x), float(abs(res.fun))


def locate_conjugate_points(system: LinearSystem, ell: float, epsilon: float = 1e-3,
                            reference=None, lam: float = 0.0, path: BundlePath | None = None,
                            cfg: IntegrationConfig = DEFAULT_CONFIG, xtol: float = 1e-11,
                            dim_tol: float = 1e-6, dip_tol: float = 1e-3):
    """Roots of the detection function of E^u(x, lam) against ``reference`` on [x_start, ell - eps].

    The reference defaults to the asymptotic stable plane (I; S(lam)).
    Returns (crossings, path).
    """
    if reference is None:
        reference = stable_frame(lam, system.kind, system.params, strict=False)
    x_end = ell - epsilon
    if path is None or abs(path.xs[-1] - x_end) > 1e-12:
        path = integrate_unstable(system, lam, x_end, cfg=cfg)
    vals = detection_values(path, reference)
    D = detection_function(path, reference)
    ref_frame = reference if isinstance(reference, LagrangianFrame) else np.asarray(reference)
    ref_Z = ref_frame.Z if isinstance(ref_frame, LagrangianFrame) else (
        graph_frame(ref_frame) if ref_frame.shape[0] == ref_frame.shape[1] else ref_frame)
    xs = path.xs
    changes, zeros, dips = _candidate_cells(vals, dip_tol)
    found = []
    for i in changes:
        x0 = _refine_sign_change(D, xs[i], xs[i + 1], xtol)
        found.append((x0, False))
    for i in zeros:
        found.append((float(xs[i]), False))
    for i in dips:
        x0, val = _refine_dip(D, xs[i - 1], xs[i + 1], xtol)
        Z0 = path.frame_at(x0)
        if intersection_dimension(Z0, ref_Z, dim_tol) > 0:
            found.append((x0, True))
    out = []
    for x0, touch in sorted(found):
        if out and abs(out[-1].coordinate - x0) < 10 * xtol:
            continue
        Z0 = path.frame_at(x0)
        d = max(1, intersection_dimension(Z0, ref_Z, dim_tol))
        at_end = abs(x0 - x_end) < 2 * xtol or abs(x0 - xs[0]) < 2 * xtol
        out.append(CrossingLocation(float(x0), d, Edge.GAMMA1, at_end, touch))
    return out, path


# ---------------------------------------------------------------------------
# lambda direction


def _far_points(system, lams, cfg):
    return max(x_start_for(system, float(l), cfg) for l in lams)


def bundle_frames_at(system: LinearSystem, lams, ell: float, cfg: IntegrationConfig = DEFAULT_CONFIG):
    """Frames of E^u(ell, lam) and E^s(ell, lam) for every lam, integrated as a batch."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    for l in lams:
        _check_lambda(system, float(l))
    far = _far_points(system, lams, cfg)
    out = []
    for sign, block_fn in ((-1.0, unstable_frame), (1.0, stable_frame)):
        start, step, n = _grid(ell, sign * far, cfg.h)
        q = _potential_table(system.profile, start, step, n)
        C0s = np.array([system.C_const(float(l)) for l in lams])
        Z0s = np.array([graph_frame(block_fn(float(l), system.kind, system.params, strict=False))
                        for l in lams])
        Zf, _ = _kernels.propagate_batch(system.B, C0s, system.E, q, Z0s, step,
                                         cfg.renorm_threshold, None, cfg.backend)
        out.append(Zf)
    return out[0], out[1]


def lambda_detection(system, lams, ell, cfg=DEFAULT_CONFIG):
    Zu, Zs = bundle_frames_at(system, lams, ell, cfg)
    M = np.concatenate([Zu, Zs], axis=-1)
    gu = np.linalg.det(np.swapaxes(Zu, 1, 2) @ Zu)
    gs = np.linalg.det(np.swapaxes(Zs, 1, 2) @ Zs)
    return np.linalg.det(M) / np.sqrt(gu * gs), Zu, Zs


def default_lambda_grid(lo, hi, n=200):
    """Geometric near the lower end (small eigenvalues cluster there), uniform above."""
    if hi <= lo:
        return np.array([lo])
    mid = min(hi, max(lo * 10, 0.05 * hi))
    g = np.geomspace(lo, mid, max(n // 4, 8)) if mid > lo else np.array([lo])
    u = np.linspace(mid, hi, n)
    return np.unique(np.concatenate([g, u]))


def locate_lambda_crossings(system: LinearSystem, ell: float, lam_interval, n_grid: int = 120,
                            cfg: IntegrationConfig = DEFAULT_CONFIG, xtol: float = 1e-11,
                            dim_tol: float = 1e-6, dip_tol: float = 1e-3, max_levels: int = 4):
    """Eigenvalue crossings of (E^u(ell, lam), E^s(ell, lam)) on [lo, hi].

    Sign changes of the normalized determinant are counted on a grid and on a
    grid twice as fine; disagreement triggers further doubling. Even-order
    touches show up as small local minima and are confirmed through the
    intersection dimension.
    """
    lo, hi = map(float, lam_interval)
    grid = default_lambda_grid(lo, hi, n_grid)
    vals, _, _ = lambda_detection(system, grid, ell, cfg)
    for _ in range(max_levels):
        mids = 0.5 * (grid[1:] + grid[:-1])
        mvals, _, _ = lambda_detection(system, mids, ell, cfg)
        fine = np.empty(2 * grid.size - 1)
        fvals = np.empty_like(fine)
        fine[0::2], fine[1::2] = grid, mids
        fvals[0::2], fvals[1::2] = vals, mvals
        c1 = len(_candidate_cells(vals, dip_tol)[0])
        c2 = len(_candidate_cells(fvals, dip_tol)[0])
        grid, vals = fine, fvals
        if c1 == c2:
            break
    else:
        raise IntegrationError("lambda grid could not resolve the sign changes of the detection function")

    def g(lam):
        return float(lambda_detection(system, [lam], ell, cfg)[0][0])

    changes, zeros, dips = _candidate_cells(vals, dip_tol)
    found = []
    for i in changes:
        found.append((_refine_sign_change(g, grid[i], grid[i + 1], xtol), False))
    for i in zeros:
        found.append((float(grid[i]), False))
    for i in dips:
        l0, _ = _refine_dip(g, grid[i - 1], grid[i + 1], xtol)
        _, Zu, Zs = lambda_detection(system, [l0], ell, cfg)
        if intersection_dimension(Zu[0], Zs[0], dim_tol) > 0:
            found.append((l0, True))
    out = []
    for l0, touch in sorted(found):
        _, Zu, Zs = lambda_detection(system, [l0], ell, cfg)
        d = max(1, intersection_dimension(Zu[0], Zs[0], dim_tol))
        at_end = abs(l0 - lo) < 2 * xtol or abs(l0 - hi) < 2 * xtol
        out.append(CrossingLocation(float(l0), d, Edge.GAMMA2, at_end, touch))
    return out

