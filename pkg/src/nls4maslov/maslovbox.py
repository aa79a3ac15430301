"""The Maslov box: edge indices, Morse indices, the corner term and the verdicts.

The box is the boundary of [-inf, ell] x [0, lambda_inf] in the (x, lambda)
plane, traversed by the pair (E^u(x, lam), E^s(ell, lam)).

    Gamma1: lam = 0, x from -inf to ell
    Gamma2: x = ell, lam from 0 to lambda_inf
    Gamma3: lam = lambda_inf
    Gamma4: x = -inf

Gamma3 and Gamma4 are checked to be empty. The corner (ell, 0) is always a
crossing (the kernel); its contribution is the arrival along Gamma1 plus the
departure along Gamma2. Homotopy invariance forces

    Gamma1(open) + corner + Gamma2(open) = 0

for every system, which is verified in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .bundles import (
    DEFAULT_CONFIG,
    CrossingLocation,
    IntegrationConfig,
    bundle_frames_at,
    integrate_stable,
    integrate_unstable,
    locate_conjugate_points,
    locate_lambda_crossings,
    normalized_det,
    pmap,
)
from .errors import DegenerateCaseError, InconsistencyError, MaslovError, PreconditionError
from .forms import (
    FORM_TOL,
    MAX_ORDER,
    contribution,
    crossing_form_series,
    partial_signatures,
    relative_crossing_form_lambda,
)
from .profiles import WaveProfile
from .solves import CorrectionData, Discretization, compute_integrals, correction_term
from .systems import Kind, LinearSystem, graph_frame, stable_frame, unstable_frame

KH_ELL = 6.0
ELL_ENVELOPE = 0.1  # default ell: where |phi| last exceeds this fraction of its maximum


@dataclass(frozen=True)
class MaslovBoxConfig:
    ell: float | None = None
    lambda_inf: float | None = None
    epsilon: float = 1e-3
    n_lambda: int = 120
    n_gamma4: int = 60
    max_escalations: int = 4
    form_tol: float = FORM_TOL
    max_order: int = MAX_ORDER
    zero_tol: float = 1e-10
    gamma4_tol: float = 1e-8
    integration: IntegrationConfig = DEFAULT_CONFIG
    disc: Discretization = Discretization()

    def resolved(self, profile: WaveProfile) -> "MaslovBoxConfig":
        """Copy with ell and lambda_inf filled in from the profile."""
        ell = self.ell if self.ell is not None else default_ell(profile)
        lam = self.lambda_inf if self.lambda_inf is not None else default_lambda_inf(profile)
        if not (ell > 0 and lam > 0 and self.epsilon > 0):
            raise PreconditionError(f"ell, lambda_inf and epsilon must be positive ({ell}, {lam}, {self.epsilon})")
        return replace(self, ell=float(ell), lambda_inf=float(lam))


def default_ell(profile: WaveProfile) -> float:
    """6 for the KH profile; otherwise the last x where |phi| >= 10% of its maximum."""
    if getattr(profile, "name", "") == "kh":
        return KH_ELL
    L = profile.support_halfwidth
    xs = np.linspace(-L, L, 20001)
    a = np.abs(profile.phi(xs))
    if a.max() == 0.0:
        return 1.0
    big = np.nonzero(a >= ELL_ENVELOPE * a.max())[0]
    return float(max(abs(xs[big[0]]), abs(xs[big[-1]]), 1.0))


def default_lambda_inf(profile: WaveProfile) -> float:
    """beta + (2p+1) max phi^(2p) + 1, a bound on the bounded part of the operators plus margin."""
    p = profile.params
    return float(p.beta + (2 * p.power_p + 1) * profile.max_potential() + 1.0)


# ---------------------------------------------------------------------------
# edges


@dataclass
class EdgeCrossing:
    location: CrossingLocation
    contribution: int
    signatures: list

    def to_dict(self):
        d = self.location.to_dict()
        d["contribution"] = self.contribution
        d["signatures"] = [list(s) for s in self.signatures]
        return d


@dataclass
class EdgeResult:
    kind: Kind
    edge: str
    crossings: list = field(default_factory=list)

    @property
    def index(self) -> int:
        return int(sum(c.contribution for c in self.crossings))

    @property
    def count(self) -> int:
        return int(sum(c.location.dim for c in self.crossings))

    def to_dict(self):
        return {"index": self.index, "count": self.count,
                "crossings": [c.to_dict() for c in self.crossings]}


def _system(kind, profile):
    return LinearSystem(kind, profile)


def _stable_at(system, lam, ell, cfg):
    return integrate_stable(system, lam, ell, cfg=cfg.integration).frames[-1]


def gamma1(system: LinearSystem, cfg: MaslovBoxConfig) -> EdgeResult:
    """Crossings of E^u(x, 0) with E^s(ell, 0) on (-inf, ell - eps], with their x-forms."""
    Es = _stable_at(system, 0.0, cfg.ell, cfg)
    cps, path = locate_conjugate_points(system, cfg.ell, cfg.epsilon, reference=Es, cfg=cfg.integration)
    out = EdgeResult(system.kind, "Gamma1")
    for c in cps:
        s = crossing_form_series(system, path.frame_at(c.coordinate), Es, c.coordinate,
                                 max_order=cfg.max_order, tol=cfg.form_tol)
        pos = "final" if c.at_endpoint else "interior"
        out.crossings.append(EdgeCrossing(c, contribution(s, pos).value, s.signatures))
    return out


def conjugate_points(system: LinearSystem, cfg: MaslovBoxConfig):
    """Conjugate points against the asymptotic stable plane S(0) on (-inf, ell - eps]."""
    cps, _ = locate_conjugate_points(system, cfg.ell, cfg.epsilon, cfg=cfg.integration)
    return cps


def gamma2(system: LinearSystem, cfg: MaslovBoxConfig, lo: float | None = None) -> EdgeResult:
    """Eigenvalue crossings on [eps, lambda_inf] at x = ell, with their relative lambda-forms."""
    lo = cfg.epsilon if lo is None else lo
    found = locate_lambda_crossings(system, cfg.ell, (lo, cfg.lambda_inf), n_grid=cfg.n_lambda,
                                    cfg=cfg.integration)
    out = EdgeResult(system.kind, "Gamma2")
    for c in found:
        s = relative_crossing_form_lambda(system, cfg.ell, c.coordinate, cfg=cfg.integration,
                                          tol=cfg.form_tol, max_order=min(cfg.max_order, 4))
        pos = "final" if abs(c.coordinate - cfg.lambda_inf) < 1e-9 else "interior"
        out.crossings.append(EdgeCrossing(c, contribution(s, pos).value, s.signatures))
    return out


def gamma3(system: LinearSystem, cfg: MaslovBoxConfig) -> list:
    """Crossings of E^u(x, lambda_inf) with E^s(ell, lambda_inf); expected empty."""
    Es = _stable_at(system, cfg.lambda_inf, cfg.ell, cfg)
    cps, _ = locate_conjugate_points(system, cfg.ell, 0.0, reference=Es, lam=cfg.lambda_inf,
                                     cfg=cfg.integration)
    return cps


def gamma4(system: LinearSystem, cfg: MaslovBoxConfig):
    """min over lam in [0, lambda_inf] of the normalized det[U(lam) | E^s(ell, lam)], and sign changes."""
    lams = np.linspace(0.0, cfg.lambda_inf, cfg.n_gamma4)
    _, Zs = bundle_frames_at(system, lams, cfg.ell, cfg.integration)
    vals = np.array([
        float(normalized_det(graph_frame(unstable_frame(float(l), system.kind, system.params, strict=False)), Z))
        for l, Z in zip(lams, Zs)
    ])
    changes = int(np.sum(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0))
    return float(np.min(np.abs(vals))), changes


def arrival(system: LinearSystem, cfg: MaslovBoxConfig) -> int:
    """Contribution of the final crossing x = ell of Gamma1."""
    Zu = integrate_unstable(system, 0.0, cfg.ell, cfg=cfg.integration).frames[-1]
    Es = _stable_at(system, 0.0, cfg.ell, cfg)
    s = crossing_form_series(system, Zu, Es, cfg.ell, max_order=cfg.max_order, tol=cfg.form_tol)
    return contribution(s, "final").value


def departure(system: LinearSystem, cfg: MaslovBoxConfig, I1=None, I2=None, chains=False) -> int:
    """Contribution of the initial crossing lam = 0 of Gamma2."""
    s = relative_crossing_form_lambda(system, cfg.ell, 0.0, I1=I1, I2=I2, cfg=cfg.integration,
                                      tol=cfg.form_tol, max_order=min(cfg.max_order, 4),
                                      use_chains_for_order2=chains)
    return contribution(s, "initial").value


# ---------------------------------------------------------------------------
# Morse indices and the corner


def morse_index(kind, profile: WaveProfile, config: MaslovBoxConfig | None = None):
    """(count via conjugate points, count via the lambda sweep) for L+ or L-.

    The two must agree; a mismatch raises InconsistencyError.
    """
    kind = Kind(kind)
    if kind is Kind.N:
        raise PreconditionError("morse_index is defined for LPlus and LMinus")
    cfg = (config or MaslovBoxConfig()).resolved(profile)
    system = _system(kind, profile)
    by_conj = int(sum(c.dim for c in conjugate_points(system, cfg)))
    by_sweep = gamma2(system, cfg).count
    if by_conj != by_sweep:
        raise InconsistencyError(
            f"{kind.value}: {by_conj} conjugate points but {by_sweep} positive eigenvalues "
            f"(ell = {cfg.ell}, lambda_inf = {cfg.lambda_inf}); refine the grids"
        )
    return by_conj, by_sweep


def corner_from_integrals(I1: float, I2: float, zero_tol: float = 1e-10) -> int:
    """1 - n_-(diag(2 I1, 2 I2)): arrival 1 plus the departure of the second-order corner form."""
    if abs(I1) <= zero_tol or abs(I2) <= zero_tol:
        raise DegenerateCaseError(
            f"I1 = {I1:.3e}, I2 = {I2:.3e}: a vanishing integral needs a higher-order corner form"
        )
    _, nneg, _ = partial_signatures(np.diag([2.0 * I1, 2.0 * I2]), 0.0, 1.0)
    return 1 - nneg


@dataclass(frozen=True)
class CornerResult:
    value: int
    arrival: int
    departure: int
    from_integrals: int
    table: int

    @property
    def table_agrees(self) -> bool:
        return self.table == self.value


def corner_analysis(profile: WaveProfile, I1: float, I2: float,
                    config: MaslovBoxConfig | None = None) -> CornerResult:
    """Corner term of N two ways: bundle forms (arrival + chain departure) and the integrals."""
    cfg = (config or MaslovBoxConfig()).resolved(profile)
    from_ints = corner_from_integrals(I1, I2, cfg.zero_tol)
    table = correction_term(I1, I2, cfg.zero_tol)
    system = _system(Kind.N, profile)
    arr, dep = pmap(lambda f: f(), [lambda: arrival(system, cfg),
                                    lambda: departure(system, cfg, chains=True)])
    value = arr + dep
    if value != from_ints:
        raise InconsistencyError(
            f"corner term from bundle forms ({arr} + {dep}) differs from 1 - n_-(diag(2 I1, 2 I2)) = {from_ints}"
        )
    return CornerResult(int(value), int(arr), int(dep), int(from_ints), int(table))


def corner_contribution(profile: WaveProfile, I1: float, I2: float,
                        config: MaslovBoxConfig | None = None) -> int:
    return corner_analysis(profile, I1, I2, config).value


# ---------------------------------------------------------------------------
# verdicts


class VKVerdict(str, Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    NOT_APPLICABLE = "not_applicable"


def jones_grillakis_unstable(P: int, Q: int) -> bool:
    return abs(P - Q) >= 2


def vk_verdict(P: int, Q: int, c: int) -> VKVerdict:
    """For P = 1, Q = 0 the count n_+(N) = 1 - c is exact."""
    if P != 1 or Q != 0:
        return VKVerdict.NOT_APPLICABLE
    return VKVerdict.STABLE if 1 - c == 0 else VKVerdict.UNSTABLE


def lower_bound(P: int, Q: int, c: int) -> int:
    return abs(P - Q - c)


# ---------------------------------------------------------------------------
# report


@dataclass
class StabilityReport:
    P: int
    Q: int
    p_c: int
    q_c: int
    I1: float
    I2: float
    c: int
    lower_bound: int
    n_plus_N_detected: int
    verdicts: dict
    consistency: dict
    edges: dict
    parameters: dict
    valid: bool = True
    failures: list = field(default_factory=list)

    def to_dict(self):
        return _round_tree({
            "P": self.P, "Q": self.Q, "p_c": self.p_c, "q_c": self.q_c,
            "I1": self.I1, "I2": self.I2, "c": self.c,
            "lower_bound": self.lower_bound, "n_plus_N_detected": self.n_plus_N_detected,
            "verdicts": self.verdicts, "consistency": self.consistency,
            "edges": self.edges, "parameters": self.parameters,
            "valid": self.valid, "failures": list(self.failures),
        })


def _round(v, digits=10):
    if isinstance(v, float):
        if not math.isfinite(v) or v == 0.0:
            return v
        return float(f"{v:.{digits}g}")
    return v


def _round_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return _round(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return _round(obj)


def _escalate(profile, cfg: MaslovBoxConfig):
    """Grow lambda_inf until Gamma3 is empty and ell until Gamma4 is empty, for every system."""
    systems = [_system(k, profile) for k in Kind]
    notes = []
    for _ in range(cfg.max_escalations + 1):
        g3 = pmap(lambda s: len(gamma3(s, cfg)), systems)
        g4 = pmap(lambda s: gamma4(s, cfg), systems)
        bad3 = any(n > 0 for n in g3)
        bad4 = any(ch > 0 or m < cfg.gamma4_tol for m, ch in g4)
        if not bad3 and not bad4:
            return cfg, {"gamma3_crossings": {s.kind.value: n for s, n in zip(systems, g3)},
                         "gamma4_min_detection": {s.kind.value: m for s, (m, _) in zip(systems, g4)},
                         "escalations": notes}
        if bad3:
            notes.append(f"lambda_inf {cfg.lambda_inf} -> {2 * cfg.lambda_inf}")
            cfg = replace(cfg, lambda_inf=2 * cfg.lambda_inf)
        if bad4:
            notes.append(f"ell {cfg.ell} -> {cfg.ell + 1}")
            cfg = replace(cfg, ell=cfg.ell + 1.0)
    raise InconsistencyError(f"Gamma3/Gamma4 still not empty after escalation ({'; '.join(notes)})")


def assemble_report(profile: WaveProfile, config: MaslovBoxConfig | None = None) -> StabilityReport:
    """Run the whole box for L+, L- and N and collect the counts, identities and verdicts."""
    cfg = (config or MaslovBoxConfig()).resolved(profile)
    cfg, emptiness = _escalate(profile, cfg)
    sp, sm, sn = (_system(k, profile) for k in (Kind.LPLUS, Kind.LMINUS, Kind.N))

    jobs = {
        "integrals": lambda: compute_integrals(profile, disc=cfg.disc, zero_tol=cfg.zero_tol),
        "g1_plus": lambda: gamma1(sp, cfg),
        "g1_minus": lambda: gamma1(sm, cfg),
        "g1_N": lambda: gamma1(sn, cfg),
        "conj_plus": lambda: conjugate_points(sp, cfg),
        "conj_minus": lambda: conjugate_points(sm, cfg),
        "g2_plus": lambda: gamma2(sp, cfg),
        "g2_minus": lambda: gamma2(sm, cfg),
        "g2_N": lambda: gamma2(sn, cfg),
        "arr_plus": lambda: arrival(sp, cfg),
        "arr_minus": lambda: arrival(sm, cfg),
        "dep_plus": lambda: departure(sp, cfg),
        "dep_minus": lambda: departure(sm, cfg),
    }
    names = list(jobs)
    res = dict(zip(names, pmap(lambda n: jobs[n](), names)))

    cd: CorrectionData = res["integrals"]
    corner = corner_analysis(profile, cd.I1, cd.I2, cfg)
    failures = []

    p_c = int(sum(c.dim for c in res["conj_plus"]))
    q_c = int(sum(c.dim for c in res["conj_minus"]))
    P, Q = res["g2_plus"].count, res["g2_minus"].count
    if P != p_c:
        failures.append(f"P = p_c ({P} vs {p_c})")
    if Q != q_c:
        failures.append(f"Q = q_c ({Q} vs {q_c})")
    interchange = {"LPlus": [p_c, res["g1_plus"].count], "LMinus": [q_c, res["g1_minus"].count]}
    if p_c != res["g1_plus"].count or q_c != res["g1_minus"].count:
        failures.append("reference-plane interchange S(0) vs E^s(ell, 0)")

    g1N = res["g1_N"].index
    if g1N != Q - P:
        failures.append(f"Gamma1 index of N equals Q - P ({g1N} vs {Q - P})")
    g2N = res["g2_N"].index
    homotopy = {
        "LPlus": res["g1_plus"].index + res["arr_plus"] + res["dep_plus"] + res["g2_plus"].index,
        "LMinus": res["g1_minus"].index + res["arr_minus"] + res["dep_minus"] + res["g2_minus"].index,
        "N": g1N + corner.value + g2N,
    }
    for k, v in homotopy.items():
        if v != 0:
            failures.append(f"homotopy sum for {k} is {v}")
    lb = lower_bound(P, Q, corner.value)
    n_detected = res["g2_N"].count
    if n_detected < lb:
        failures.append(f"detected N crossings {n_detected} below the lower bound {lb}")
    vk = vk_verdict(P, Q, corner.value)
    verdicts = {
        "jones_grillakis_unstable": jones_grillakis_unstable(P, Q),
        "vk_verdict": vk.value,
        "spectrum_on_imaginary_axis": vk is VKVerdict.STABLE,
    }
    consistency = {
        "homotopy_sum": homotopy,
        "gamma1_N_index": g1N,
        "Q_minus_P": Q - P,
        "reference_interchange": interchange,
        "corner": {"arrival": corner.arrival, "departure": corner.departure,
                   "from_integrals": corner.from_integrals, "sign_table": corner.table,
                   "sign_table_agrees": corner.table_agrees},
        **emptiness,
    }
    edges = {
        "Gamma1": {"LPlus": res["g1_plus"].to_dict(), "LMinus": res["g1_minus"].to_dict(),
                   "N": res["g1_N"].to_dict()},
        "Gamma2": {"LPlus": res["g2_plus"].to_dict(), "LMinus": res["g2_minus"].to_dict(),
                   "N": res["g2_N"].to_dict()},
    }
    pr = profile.params
    parameters = {"profile": getattr(profile, "name", "profile"), "beta": pr.beta, "sigma2": pr.sigma2,
                  "power": pr.power_p, "ell": cfg.ell, "lambda_inf": cfg.lambda_inf,
                  "epsilon": cfg.epsilon}
    return StabilityReport(P, Q, p_c, q_c, cd.I1, cd.I2, corner.value, lb, n_detected, verdicts,
                           consistency, edges, parameters, valid=not failures, failures=failures)
