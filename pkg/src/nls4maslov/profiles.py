"""Standing-wave profiles phi(x) and their derivatives.

A profile solves  phi'''' + sigma2 phi'' + beta phi - phi^(2p+1) = 0  and decays
at both ends. Three sources are supported: closed-form sech-power solutions
(the cubic one is the Karlsson-Hook soliton), splines through sampled data,
and the zero solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import make_interp_spline

from .errors import (
    ParameterError,
    ProfileParseError,
    ProfileValidationError,
    SmoothnessError,
)

DECAY_TOL = 1e-12


@dataclass(frozen=True)
class Parameters:
    beta: float
    sigma2: int
    power_p: int = 1

    def __post_init__(self):
        if self.sigma2 not in (-1, 0, 1):
            raise ParameterError(f"sigma2 must be -1, 0 or 1, got {self.sigma2}")
        if int(self.power_p) != self.power_p or self.power_p < 1:
            raise ParameterError(f"power_p must be a positive integer, got {self.power_p}")
        b = self.beta
        if not np.isfinite(b) or b <= 0:
            raise ParameterError(f"beta must be positive, got {b}")
        if self.sigma2 == -1 and b == 0.25:
            raise ParameterError("beta = 1/4 with sigma2 = -1 makes the spatial eigenvalues collide")
        if self.sigma2 == 1 and b <= 0.25:
            raise ParameterError("sigma2 = +1 requires beta > 1/4")

    @property
    def nonlinear_order(self) -> int:
        """Exponent 2p of the potential phi^(2p)."""
        return 2 * self.power_p


# ---------------------------------------------------------------------------
# Taylor-jet helpers


def _to_taylor(derivs):
    d = np.asarray(derivs, dtype=float)
    return d / np.array([math.factorial(j) for j in range(d.size)])


def _from_taylor(coef):
    c = np.asarray(coef, dtype=float)
    return c * np.array([math.factorial(j) for j in range(c.size)])


def _taylor_power(coef, k):
    out = np.zeros_like(coef)
    out[0] = 1.0
    for _ in range(k):
        out = np.convolve(out, coef)[: coef.size]
    return out


def power_jet(derivs, k):
    """Derivatives of phi**k at a point from the derivatives of phi there."""
    return _from_taylor(_taylor_power(_to_taylor(derivs), k))


def extend_jet_by_ode(derivs, params: Parameters, order: int):
    """Continue a jet (phi, phi', phi'', phi''') to ``order`` using the profile equation.

    Differentiating phi'''' = -sigma2 phi'' - beta phi + phi^(2p+1) repeatedly
    gives every higher derivative of a genuine solution.
    """
    d = list(np.asarray(derivs, dtype=float)[:4])
    s2, beta, p = params.sigma2, params.beta, params.power_p
    while len(d) <= order:
        m = len(d) - 4  # we are computing phi^(m+4)
        nl = power_jet(d[: m + 1], 2 * p + 1)[m]
        d.append(-s2 * d[m + 2] - beta * d[m] + nl)
    return np.array(d[: order + 1])


# ---------------------------------------------------------------------------
# Profiles


class WaveProfile:
    """Base class. Subclasses implement ``eval`` and ``jet``."""

    params: Parameters
    support_halfwidth: float
    name: str = "profile"

    def eval(self, x):
        """Return an array of shape (5, len(x)) holding phi and its first four derivatives."""
        raise NotImplementedError

    def jet(self, x0: float, order: int) -> np.ndarray:
        """Derivatives phi^(j)(x0) for j = 0..order."""
        raise NotImplementedError

    def phi(self, x):
        return self.eval(np.atleast_1d(x))[0]

    def potential(self, x):
        """phi(x)^(2p), the only way the profile enters the linear systems."""
        return self.phi(x) ** self.params.nonlinear_order

    def potential_jet(self, x0: float, order: int) -> np.ndarray:
        return power_jet(self.jet(x0, order), self.params.nonlinear_order)

    def max_potential(self) -> float:
        L = self.support_halfwidth
        xs = np.linspace(-L, L, 8001)
        return float(np.max(self.potential(xs)))


class SechPowerProfile(WaveProfile):
    """phi(x) = A sech(B x)^m with derivatives from exact polynomial recursion in tanh."""

    def __init__(self, amplitude, rate, exponent, params: Parameters, name="sech-power"):
        self.A = float(amplitude)
        self.B = float(rate)
        self.m = float(exponent)
        self.params = params
        self.name = name
        # |phi| <= A 2^m e^{-m B |x|}
        self.support_halfwidth = float(
            max(math.log(self.A * 2.0**self.m / DECAY_TOL) / (self.m * self.B), 1.0)
        )
        self._polys = [np.array([1.0])]

    def _poly(self, k):
        # d/dx [sech^m P(T)] = B sech^m [ -m T P + (1 - T^2) P' ]
        while len(self._polys) <= k:
            P = self._polys[-1]
            nxt = npoly.polyadd(
                npoly.polymul([0.0, -self.m], P),
                npoly.polymul([1.0, 0.0, -1.0], npoly.polyder(P)),
            )
            self._polys.append(self.B * np.atleast_1d(nxt))
        return self._polys[k]

    def _derivs(self, x, order):
        x = np.asarray(x, dtype=float)
        T = np.tanh(self.B * x)
        base = self.A / np.cosh(np.clip(self.B * x, -700, 700)) ** self.m
        return np.array([base * npoly.polyval(T, self._poly(k)) for k in range(order + 1)])

    def eval(self, x):
        return self._derivs(np.atleast_1d(x), 4)

    def phi(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.A / np.cosh(np.clip(self.B * x, -700, 700)) ** self.m

    def jet(self, x0, order):
        return self._derivs(np.array([x0]), order)[:, 0]


def power_law_profile(p: int = 1) -> SechPowerProfile:
    """Exact solution A sech^(2/p)(B x) for sigma2 = -1 and the matching beta."""
    m = 2.0 / p
    B2 = 1.0 / (m**2 + (m + 2) ** 2)
    beta = B2 * m**2 - B2**2 * m**4
    A = (B2**2 * m * (m + 1) * (m + 2) * (m + 3)) ** (1.0 / (2 * p))
    params = Parameters(beta=beta, sigma2=-1, power_p=p)
    return SechPowerProfile(A, math.sqrt(B2), m, params, name=f"sech-power-p{p}")


def kh_profile() -> SechPowerProfile:
    """Karlsson-Hook soliton sqrt(3/10) sech^2(x / (2 sqrt 5)), beta = 4/25, sigma2 = -1."""
    params = Parameters(beta=4.0 / 25.0, sigma2=-1, power_p=1)
    return SechPowerProfile(math.sqrt(0.3), 1.0 / (2.0 * math.sqrt(5.0)), 2.0, params, name="kh")


class ZeroProfile(WaveProfile):
    """The trivial solution; the linear systems reduce to their constant limits."""

    def __init__(self, params: Parameters, support_halfwidth: float = 10.0):
        self.params = params
        self.support_halfwidth = float(support_halfwidth)
        self.name = "zero"

    def eval(self, x):
        return np.zeros((5, np.atleast_1d(x).size))

    def jet(self, x0, order):
        return np.zeros(order + 1)

    def phi(self, x):
        return np.zeros(np.atleast_1d(x).size)


class SampledProfile(WaveProfile):
    """Quintic spline through samples; zero outside the sampled interval."""

    def __init__(self, x, values, params: Parameters, name="sampled"):
        x = np.asarray(x, dtype=float)
        y = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ProfileValidationError("x and values must be 1-D arrays of equal length")
        if x.size < 12:
            raise ProfileValidationError(
                f"need at least 12 samples for a quintic spline, got {x.size}"
            )
        if not np.all(np.diff(x) > 0):
            raise ProfileValidationError("x column must be strictly increasing")
        self.params = params
        self.name = name
        self.x_min, self.x_max = float(x[0]), float(x[-1])
        self._spline = make_interp_spline(x, y, k=5)
        self._derivatives = [self._spline.derivative(k) if k else self._spline for k in range(5)]
        big = np.nonzero(np.abs(y) >= DECAY_TOL)[0]
        cap = min(-self.x_min, self.x_max)
        if big.size == 0:
            L = 0.0
        else:
            L = max(abs(x[big[0]]), abs(x[big[-1]]))
            if big[0] > 0:
                L = max(L, abs(x[big[0] - 1]))
            if big[-1] < x.size - 1:
                L = max(L, abs(x[big[-1] + 1]))
        self.support_halfwidth = float(min(max(L, 1.0), cap)) if cap > 0 else float(max(L, 1.0))

    def eval(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        inside = (x >= self.x_min) & (x <= self.x_max)
        out = np.zeros((5, x.size))
        if inside.any():
            xi = x[inside]
            for k in range(5):
                out[k, inside] = self._derivatives[k](xi)
        return out

    def phi(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.zeros(x.size)
        inside = (x >= self.x_min) & (x <= self.x_max)
        out[inside] = self._spline(x[inside])
        return out

    def jet(self, x0, order):
        base = self.eval(np.array([x0]))[:, 0]
        if order <= 4:
            return base[: order + 1]
        return extend_jet_by_ode(base[:4], self.params, order)


def _parse_profile_text(text: str, source: str):
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise ProfileParseError(f"{source}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            vals = [float(v) for v in parts]
        except ValueError as exc:
            raise ProfileParseError(f"{source}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise ProfileParseError(f"{source}:{lineno}: non-finite entry")
        rows.append(vals)
    if not rows:
        raise ProfileParseError(f"{source}: no data rows")
    return np.array(rows)


def load_sampled_profile(path, params: Parameters) -> SampledProfile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ProfileParseError(f"{path}: not UTF-8 text ({exc})") from None
    data = _parse_profile_text(text, str(path))
    return SampledProfile(data[:, 0], data[:, 1], params, name=path.name)


def write_sampled_profile(path, x, values, header: str | None = None):
    lines = []
    if header:
        lines.extend("# " + h for h in header.splitlines())
    lines.extend(f"{a:.17g} {b:.17g}" for a, b in zip(x, values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def residual_norm(profile: WaveProfile, grid) -> float:
    """max |phi'''' + sigma2 phi'' + beta phi - phi^(2p+1)| over the grid."""
    pr = profile.params
    d = profile.eval(np.asarray(grid, dtype=float))
    r = d[4] + pr.sigma2 * d[2] + pr.beta * d[0] - d[0] ** (2 * pr.power_p + 1)
    return float(np.max(np.abs(r))) if r.size else 0.0


def with_params(profile: WaveProfile, params: Parameters) -> WaveProfile:
    """Shallow copy of ``profile`` carrying different parameters (used for residual probes)."""
    import copy

    clone = copy.copy(profile)
    object.__setattr__(clone, "params", params)
    return clone
