"""Independent finite-difference oracles for the tests.

Nothing here imports the package's discretizations: profiles come from a
Newton iteration on the standing-wave equation, Morse indices from dense
eigenvalues of the discretized L+ and L-, and the real spectrum of N from the
dense 2x2 block operator.
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh, spsolve

# sixth-order centred weights for the second and fourth derivative
W2 = np.array([1 / 90, -3 / 20, 3 / 2, -49 / 18, 3 / 2, -3 / 20, 1 / 90])
W4 = np.array([7 / 240, -2 / 5, 169 / 60, -122 / 15, 91 / 8, -122 / 15, 169 / 60, -2 / 5, 7 / 240])


def stencil_matrix(w, n, h, order):
    half = len(w) // 2
    return sp.diags([np.full(n - abs(k), w[k + half]) for k in range(-half, half + 1)],
                    list(range(-half, half + 1)), format="csr") / h**order


def operators(x):
    h = x[1] - x[0]
    return stencil_matrix(W2, x.size, h, 2), stencil_matrix(W4, x.size, h, 4)


def newton_profile(beta, sigma2, guess, x, p=1, iters=60, tol=1e-9):
    """Solve phi'''' + sigma2 phi'' + beta phi - phi^(2p+1) = 0, bordered by the translation mode."""
    D2, D4 = operators(x)
    h = x[1] - x[0]
    phi = guess.astype(float).copy()
    for it in range(iters):
        F = D4 @ phi + sigma2 * (D2 @ phi) + beta * phi - phi ** (2 * p + 1)
        J = (D4 + sigma2 * D2 + sp.diags(beta - (2 * p + 1) * phi ** (2 * p))).tocsc()
        k = np.gradient(phi, h)
        k /= np.linalg.norm(k)
        M = sp.bmat([[J, sp.csr_matrix(k[:, None])], [sp.csr_matrix(k[None, :]), None]], format="csc")
        d = spsolve(M, np.concatenate([-F, [0.0]]))[: x.size]
        phi += (1.0 if it > 5 else 0.5) * d
        if np.max(np.abs(d)) < tol:
            return phi
    raise RuntimeError("Newton iteration did not converge")


def two_hump(beta=2.0, sigma2=-1, h=0.02, half_width=30.0, separation=0.8):
    """Two-hump standing wave continued from two shifted copies of sqrt(2 beta) sech(sqrt(beta) x)."""
    m = int(round(half_width / h))
    x = h * np.arange(-m, m + 1)
    one = np.sqrt(2 * beta) / np.cosh(np.sqrt(beta) * x)
    one = newton_profile(beta, sigma2, one, x)
    guess = np.interp(x - separation, x, one) + np.interp(x + separation, x, one)
    return x, newton_profile(beta, sigma2, guess, x)


def positive_eigenvalues(beta, sigma2, phi, x, p=1, k=8, floor=1e-5):
    """Positive eigenvalues of the discretized L+ and L- (largest first)."""
    D2, D4 = operators(x)
    out = []
    for c in (2 * p + 1, 1):
        L = (-D4 - sigma2 * D2 + sp.diags(c * phi ** (2 * p) - beta)).tocsc()
        w = eigsh(L, k=k, sigma=float(np.max(c * phi ** (2 * p))), which="LM", return_eigenvectors=False)
        out.append(np.sort(w[w > floor])[::-1])
    return out


def morse_indices(beta, sigma2, phi, x, p=1):
    plus, minus = positive_eigenvalues(beta, sigma2, phi, x, p)
    return len(plus), len(minus)


def n_real_positive_eigenvalues(beta, sigma2, phi, x, p=1, floor=1e-3):
    """Dense eigenvalues of N = [[0, -L-], [L+, 0]]; returns the real ones above ``floor``."""
    D2, D4 = operators(x)
    base = (-D4 - sigma2 * D2).toarray() - beta * np.eye(x.size)
    Lp = base + np.diag((2 * p + 1) * phi ** (2 * p))
    Lm = base + np.diag(phi ** (2 * p))
    n = x.size
    N = np.zeros((2 * n, 2 * n))
    N[:n, n:] = -Lm
    N[n:, :n] = Lp
    ev = np.linalg.eigvals(N)
    real = ev[np.abs(ev.imag) < 1e-6 * max(1.0, np.max(np.abs(ev.real)))].real
    return np.sort(real[real > floor])[::-1]


def integrals_by_continuation(beta, sigma2, phi, x, dbeta=1e-3):
    """I2 = (1/2) d/dbeta int phi^2, from Newton continuation of the profile in beta."""
    h = x[1] - x[0]
    mass = []
    for b in (beta - dbeta, beta + dbeta):
        ph = newton_profile(b, sigma2, phi, x)
        mass.append(h * np.sum(ph**2))
    return 0.5 * (mass[1] - mass[0]) / (2 * dbeta)


def i1_by_bordered_solve(beta, sigma2, phi, x, p=1):
    """I1 = int phi_x v with -L- v = phi_x, solved with the kernel phi bordered out."""
    D2, D4 = operators(x)
    h = x[1] - x[0]
    Lm = (-D4 - sigma2 * D2 + sp.diags(phi ** (2 * p) - beta)).tocsc()
    k = phi / np.linalg.norm(phi)
    dphi = D1(x) @ phi
    M = sp.bmat([[-Lm, sp.csr_matrix(k[:, None])], [sp.csr_matrix(k[None, :]), None]], format="csc")
    v = spsolve(M, np.concatenate([dphi, [0.0]]))[: x.size]
    return h * np.sum(dphi * v)


def D1(x):
    w = np.array([-1 / 60, 3 / 20, -3 / 4, 0.0, 3 / 4, -3 / 20, 1 / 60])
    return stencil_matrix(w, x.size, x[1] - x[0], 1)
