"""Hot loops: fixed-step sixth-order Runge-Kutta propagation of frames.

The linear systems have the form Z' = A Z with A = [[0, B], [C0 + q(x) E, 0]].
The potential q is tabulated at the Runge-Kutta nodes ahead of time, so the
stepping loop only does small dense arithmetic on the two blocks. Two
interchangeable backends exist:

* ``numba``  - compiled loops (default when numba imports),
* ``numpy``  - plain numpy; single paths loop in Python, batches vectorize
               over the batch axis.

Set ``NLS4MASLOV_BACKEND=numpy`` to force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

# Butcher's 7-stage, order-6 explicit method.
RK_C = np.array([0.0, 1 / 3, 2 / 3, 1 / 3, 1 / 2, 1 / 2, 1.0])
RK_A = np.zeros((7, 7))
RK_A[1, 0] = 1 / 3
RK_A[2, 1] = 2 / 3
RK_A[3, :3] = [1 / 12, 1 / 3, -1 / 12]
RK_A[4, :4] = [-1 / 16, 9 / 8, -3 / 16, -3 / 8]
RK_A[5, :5] = [0.0, 9 / 8, -3 / 8, -3 / 4, 1 / 2]
RK_A[6, :6] = [9 / 44, -9 / 11, 63 / 44, 18 / 11, 0.0, -16 / 11]
RK_B = np.array([11 / 120, 0.0, 27 / 40, 27 / 40, -4 / 15, -4 / 15, 11 / 120])

# distinct node offsets and the node used by each stage
NODE_OFFSETS = np.array([0.0, 1 / 3, 1 / 2, 2 / 3, 1.0])
STAGE_NODE = np.array([0, 1, 3, 1, 2, 2, 4], dtype=np.int64)


def node_positions(x0: float, h: float, nsteps: int) -> np.ndarray:
    """x-values at which the potential must be tabulated, shape (nsteps, 5)."""
    base = x0 + h * np.arange(nsteps)
    return base[:, None] + h * NODE_OFFSETS[None, :]


def _resolve_backend():
    want = os.environ.get("NLS4MASLOV_BACKEND", "").strip().lower()
    if want == "numpy" or not HAVE_NUMBA:
        return "numpy"
    return "numba"


# ---------------------------------------------------------------------------
# numpy backend


def _qr_positive(Z):
    Q, R = np.linalg.qr(Z)
    d = np.sign(np.diagonal(R, axis1=-2, axis2=-1)).copy()
    d[d == 0] = 1.0
    Q = Q * d[..., None, :]
    R = R * d[..., :, None]
    return Q, R


def _rhs_numpy(B, C0, E, qv, Z):
    n = B.shape[0]
    top = Z[..., :n, :]
    bot = Z[..., n:, :]
    return np.concatenate([B @ bot, C0 @ top + qv * (E @ top)], axis=-2)


def propagate_numpy(B, C0, E, q, Z0, h, threshold):
    nsteps = q.shape[0]
    m, k = Z0.shape
    Zs = np.empty((nsteps + 1, m, k))
    Rs = np.zeros((nsteps + 1, k, k))
    flags = np.zeros(nsteps + 1, dtype=np.bool_)
    Z = np.array(Z0, dtype=float)
    Zs[0] = Z
    K = np.empty((7, m, k))
    for i in range(nsteps):
        qi = q[i]
        for s in range(7):
            arg = Z.copy()
            for j in range(s):
                if RK_A[s, j] != 0.0:
                    arg += (h * RK_A[s, j]) * K[j]
            K[s] = _rhs_numpy(B, C0, E, qi[STAGE_NODE[s]], arg)
        Z = Z + h * np.tensordot(RK_B, K, axes=1)
        if np.max(np.sqrt(np.sum(Z * Z, axis=0))) > threshold:
            Z, R = _qr_positive(Z)
            Rs[i + 1] = R
            flags[i + 1] = True
        Zs[i + 1] = Z
    return Zs, Rs, flags


def _detect_numpy(S, Z):
    n = S.shape[-1]
    X, Y = Z[..., :n, :], Z[..., n:, :]
    num = np.linalg.det(S @ X - Y)
    gram = np.linalg.det(np.swapaxes(Z, -1, -2) @ Z)
    return num / np.sqrt(gram)


def propagate_batch_numpy(B, C0s, E, q, Z0s, h, threshold, Sref, want_trace):
    nsteps = q.shape[0]
    nb, m, k = Z0s.shape
    Z = np.array(Z0s, dtype=float)
    trace = np.zeros((nb, nsteps + 1)) if want_trace else np.zeros((nb, 0))
    if want_trace:
        trace[:, 0] = _detect_numpy(Sref, Z)
    K = np.empty((7, nb, m, k))
    for i in range(nsteps):
        qi = q[i]
        for s in range(7):
            arg = Z.copy()
            for j in range(s):
                if RK_A[s, j] != 0.0:
                    arg += (h * RK_A[s, j]) * K[j]
            K[s] = _rhs_numpy(B, C0s, E, qi[STAGE_NODE[s]], arg)
        Z = Z + h * np.tensordot(RK_B, K, axes=1)
        norms = np.max(np.sqrt(np.sum(Z * Z, axis=1)), axis=1)
        big = norms > threshold
        if big.any():
            Z[big] = _qr_positive(Z[big])[0]
        if want_trace:
            trace[:, i + 1] = _detect_numpy(Sref, Z)
    return Z, trace


# ---------------------------------------------------------------------------
# numba backend

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, nogil=True)

    @_njit
    def _step_nb(B, C0, E, qrow, Z, h, K, arg, Cq, rka, rkb, stage_node):
        m, k = Z.shape
        n = m // 2
        for s in range(7):
            qv = qrow[stage_node[s]]
            for r in range(n):
                for t in range(n):
                    Cq[r, t] = C0[r, t] + qv * E[r, t]
            for r in range(m):
                for c in range(k):
                    v = Z[r, c]
                    for j in range(s):
                        v += h * rka[s, j] * K[j, r, c]
                    arg[r, c] = v
            for r in range(n):
                for c in range(k):
                    top = 0.0
                    bot = 0.0
                    for t in range(n):
                        top += B[r, t] * arg[n + t, c]
                        bot += Cq[r, t] * arg[t, c]
                    K[s, r, c] = top
                    K[s, n + r, c] = bot
        for r in range(m):
            for c in range(k):
                acc = 0.0
                for s in range(7):
                    acc += rkb[s] * K[s, r, c]
                Z[r, c] += h * acc

    @_njit
    def _max_colnorm_nb(Z):
        m, k = Z.shape
        best = 0.0
        for c in range(k):
            acc = 0.0
            for r in range(m):
                acc += Z[r, c] * Z[r, c]
            if acc > best:
                best = acc
        return np.sqrt(best)

    @_njit
    def _qr_positive_nb(Z):
        Q, R = np.linalg.qr(Z)
        k = R.shape[0]
        for i in range(k):
            if R[i, i] < 0.0:
                for r in range(Q.shape[0]):
                    Q[r, i] = -Q[r, i]
                for c in range(R.shape[1]):
                    R[i, c] = -R[i, c]
        return Q, R

    @_njit
    def _detect_nb(S, Z):
        n = S.shape[0]
        k = Z.shape[1]
        M = np.empty((n, k))
        for r in range(n):
            for c in range(k):
                acc = -Z[n + r, c]
                for t in range(n):
                    acc += S[r, t] * Z[t, c]
                M[r, c] = acc
        G = Z.T @ Z
        return np.linalg.det(M) / np.sqrt(np.linalg.det(G))

    @_njit
    def propagate_numba(B, C0, E, q, Z0, h, threshold, rka, rkb, stage_node):
        nsteps = q.shape[0]
        m, k = Z0.shape
        Zs = np.empty((nsteps + 1, m, k))
        Rs = np.zeros((nsteps + 1, k, k))
        flags = np.zeros(nsteps + 1, dtype=np.bool_)
        Z = Z0.copy()
        Zs[0] = Z
        K = np.empty((7, m, k))
        arg = np.empty((m, k))
        Cq = np.empty((m // 2, m // 2))
        for i in range(nsteps):
            _step_nb(B, C0, E, q[i], Z, h, K, arg, Cq, rka, rkb, stage_node)
            if _max_colnorm_nb(Z) > threshold:
                Q, R = _qr_positive_nb(Z)
                Z[:, :] = Q
                Rs[i + 1] = R
                flags[i + 1] = True
            Zs[i + 1] = Z
        return Zs, Rs, flags

    @_njit
    def propagate_batch_numba(B, C0s, E, q, Z0s, h, threshold, Sref, want_trace, rka, rkb, stage_node):
        nsteps = q.shape[0]
        nb, m, k = Z0s.shape
        Zf = np.empty((nb, m, k))
        ntr = nsteps + 1 if want_trace else 0
        trace = np.zeros((nb, ntr))
        K = np.empty((7, m, k))
        arg = np.empty((m, k))
        Cq = np.empty((m // 2, m // 2))
        for b in range(nb):
            Z = Z0s[b].copy()
            C0 = C0s[b].copy()
            if want_trace:
                trace[b, 0] = _detect_nb(Sref[b], Z)
            for i in range(nsteps):
                _step_nb(B, C0, E, q[i], Z, h, K, arg, Cq, rka, rkb, stage_node)
                if _max_colnorm_nb(Z) > threshold:
                    Q, R = _qr_positive_nb(Z)
                    Z[:, :] = Q
                if want_trace:
                    trace[b, i + 1] = _detect_nb(Sref[b], Z)
            Zf[b] = Z
        return Zf, trace


# ---------------------------------------------------------------------------
# dispatch


def propagate(B, C0, E, q, Z0, h, threshold=1e6, backend=None):
    """Integrate one frame across the tabulated grid, storing every sample.

    Returns (frames, R_factors, renorm_flags): frames[i] is the (possibly
    renormalized) frame after i steps; when renorm_flags[i] is set the frame
    was replaced by Q with Z = Q R, R upper triangular with positive diagonal.
    """
    backend = backend or _resolve_backend()
    B, C0, E, q, Z0 = (np.ascontiguousarray(a, dtype=float) for a in (B, C0, E, q, Z0))
    if backend == "numba":
        return propagate_numba(B, C0, E, q, Z0, float(h), float(threshold), RK_A, RK_B, STAGE_NODE)
    return propagate_numpy(B, C0, E, q, Z0, float(h), float(threshold))


def propagate_batch(B, C0s, E, q, Z0s, h, threshold=1e6, Sref=None, backend=None):
    """Integrate many frames sharing one potential table; keep only final frames.

    With ``Sref`` (one graph block per member) also return the normalized
    detection value det(S X - Y) / sqrt(det Z^T Z) at every grid point.
    """
    backend = backend or _resolve_backend()
    B, C0s, E, q, Z0s = (np.ascontiguousarray(a, dtype=float) for a in (B, C0s, E, q, Z0s))
    want = Sref is not None
    n = Z0s.shape[1] // 2
    S = (
        np.ascontiguousarray(Sref, dtype=float)
        if want
        else np.zeros((Z0s.shape[0], n, n))
    )
    if backend == "numba":
        return propagate_batch_numba(
            B, C0s, E, q, Z0s, float(h), float(threshold), S, want, RK_A, RK_B, STAGE_NODE
        )
    return propagate_batch_numpy(B, C0s, E, q, Z0s, float(h), float(threshold), S, want)


def rk6_step(f, x, Z, h):
    """One step of the same method for an arbitrary right-hand side f(x, Z)."""
    K = []
    for s in range(7):
        arg = Z.copy()
        for j in range(s):
            if RK_A[s, j] != 0.0:
                arg = arg + (h * RK_A[s, j]) * K[j]
        K.append(f(x + RK_C[s] * h, arg))
    return Z + h * sum(RK_B[s] * K[s] for s in range(7))
