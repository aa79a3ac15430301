"""Command line entry point: run the Maslov box and write the artifacts.

    nls4maslov run --profile kh --out results/

writes report.json, consistency.json and, with --curves, the eigenvalue-curve
tables curves_lplus.csv / curves_lminus.csv and a gnuplot script plot.gp.
Exit codes: 0 ok, 1 computation inconsistency, 2 configuration or IO error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .bundles import (
    DEFAULT_CONFIG,
    IntegrationConfig,
    detection_function,
    integrate_unstable,
    locate_conjugate_points,
    pmap,
)
from .errors import (
    DomainError,
    MaslovError,
    ParameterError,
    PreconditionError,
    ProfileParseError,
    ProfileValidationError,
)
from .maslovbox import MaslovBoxConfig, assemble_report
from .profiles import Parameters, WaveProfile, kh_profile, load_sampled_profile
from .systems import Kind, LinearSystem, essential_spectrum, stable_frame

log = logging.getLogger("nls4maslov")

EXIT_OK, EXIT_INCONSISTENT, EXIT_CONFIG = 0, 1, 2
CONFIG_ERRORS = (ParameterError, ProfileParseError, ProfileValidationError, PreconditionError, DomainError)
ROOT_TOL = 1e-8


@dataclass
class RunConfig:
    profile: str = "kh"
    beta: float | None = None
    sigma2: int | None = None
    power: int = 1
    out: str = "."
    curves: bool = False
    check: bool = False
    quiet: bool = False
    box: dict = field(default_factory=dict)  # MaslovBoxConfig overrides
    integration: dict = field(default_factory=dict)  # IntegrationConfig overrides
    curve_lambda: tuple | None = None  # (lo, hi)
    curve_n_lambda: int = 81


class ConfigError(Exception):
    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = path


def resolve_profile(cfg: RunConfig) -> WaveProfile:
    if cfg.profile == "kh":
        if cfg.beta is not None or cfg.sigma2 is not None or cfg.power != 1:
            log.warning("the kh profile fixes beta = 4/25, sigma2 = -1, p = 1; overrides ignored")
        return kh_profile()
    path = Path(cfg.profile)
    if not path.is_file():
        raise ConfigError(f"profile file not found: {path}", str(path))
    if cfg.beta is None or cfg.sigma2 is None:
        raise ConfigError("a sampled profile needs --beta and --sigma2")
    return load_sampled_profile(path, Parameters(float(cfg.beta), int(cfg.sigma2), int(cfg.power)))


def box_config(cfg: RunConfig) -> MaslovBoxConfig:
    integ = replace(DEFAULT_CONFIG, **cfg.integration) if cfg.integration else DEFAULT_CONFIG
    try:
        return replace(MaslovBoxConfig(integration=integ), **cfg.box)
    except TypeError as exc:
        raise ConfigError(f"unknown configuration key: {exc}") from None


# ---------------------------------------------------------------------------
# eigenvalue curves


def _curve_lambdas(profile: WaveProfile, cfg: RunConfig):
    if cfg.curve_lambda is not None:
        lo, hi = map(float, cfg.curve_lambda)
    else:
        edge = essential_spectrum(Kind.LPLUS, profile.params).right_endpoint
        lo, hi = max(-0.1, 0.6 * edge), 1.5
    return np.linspace(lo, hi, cfg.curve_n_lambda)


def _column(system, lam, box: MaslovBoxConfig):
    """x-roots of det(S(lam) X - Y) along E^u(x, lam) for x <= ell, with their residuals."""
    cps, path = locate_conjugate_points(system, box.ell, 0.0, lam=float(lam), cfg=box.integration)
    D = detection_function(path, stable_frame(float(lam), system.kind, system.params, strict=False))
    return [(float(lam), c.coordinate, abs(D(c.coordinate))) for c in cps]


def _link(columns):
    """Greedy continuation: each root joins the curve whose last point is nearest in x."""
    curves = []
    open_ends = []
    for col in columns:
        new_ends = []
        used = set()
        for row in sorted(col, key=lambda r: r[1]):
            best, dist = None, np.inf
            for ci, (lam_prev, x_prev) in open_ends:
                d = abs(row[1] - x_prev)
                if ci not in used and d < dist:
                    best, dist = ci, d
            if best is None or dist > 1.0:
                curves.append([row])
                best = len(curves) - 1
            else:
                curves[best].append(row)
            used.add(best)
            new_ends.append((best, (row[0], row[1])))
        open_ends = new_ends
    return curves


def trace_curves(profile: WaveProfile, kind, box: MaslovBoxConfig, lams):
    """Rows (lambda, x, residual) of the zero set of the detection function, ordered curve by curve."""
    box = box.resolved(profile)
    system = LinearSystem(kind, profile)
    lams = [l for l in lams if not essential_spectrum(system.kind, system.params).contains(float(l))]
    columns = pmap(lambda l: _column(system, l, box), lams)
    rows = []
    for curve in _link(columns):
        rows.extend(curve)
    return [r for r in rows if r[2] <= ROOT_TOL]


def write_curves(path: Path, rows, operator: str):
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda", "x", "operator"])
        for lam, x, _ in rows:
            w.writerow([f"{lam:.12g}", f"{x:.12g}", operator])


PLOT_SCRIPT = """\
# Eigenvalue curves: zero set of det(S(lambda) X(x, lambda) - Y(x, lambda)).
set datafile separator ","
set terminal pngcairo size 1200,500
set output "curves.png"
set multiplot layout 1,2
set xlabel "x"
set ylabel "lambda"
set xzeroaxis
set title "L+"
plot "curves_lplus.csv" every ::1 using 2:1 with points pt 7 ps 0.4 notitle
set title "L-"
plot "curves_lminus.csv" every ::1 using 2:1 with points pt 7 ps 0.4 notitle
unset multiplot
"""


# ---------------------------------------------------------------------------
# consistency suite


def consistency_suite(profile: WaveProfile, box: MaslovBoxConfig, report) -> dict:
    """Rerun with perturbed numerical knobs; P, Q, c and the lower bound must not move."""
    key = (report.P, report.Q, report.c, report.lower_bound)
    variants = {
        "ell_plus_1": replace(box, ell=report.parameters["ell"] + 1.0),
        "epsilon_1e-2": replace(box, epsilon=1e-2),
        "epsilon_1e-4": replace(box, epsilon=1e-4),
        "renorm_threshold_1e4": replace(box, integration=replace(box.integration, renorm_threshold=1e4)),
    }
    names = list(variants)
    reps = [assemble_report(profile, variants[n]) for n in names]
    checks = {}
    for n, r in zip(names, reps):
        got = (r.P, r.Q, r.c, r.lower_bound)
        checks[n] = {"passed": bool(r.valid and got == key), "P_Q_c_lower_bound": list(got),
                     "valid": r.valid, "failures": r.failures}
    drift = 0.0
    for kind in Kind:
        path = integrate_unstable(LinearSystem(kind, profile), 0.0, report.parameters["ell"],
                                  cfg=box.integration)
        drift = max(drift, path.lagrangian_drift())
    checks["lagrangian_drift"] = {"passed": drift <= 1e-8, "max": drift}
    return checks


# ---------------------------------------------------------------------------
# entry point


def _parser():
    p = argparse.ArgumentParser(prog="nls4maslov", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the Maslov box for one profile")
    r.add_argument("--config", help="JSON file with run options; command-line flags take precedence")
    r.add_argument("--profile", help='"kh" or a path to a two-column sample file (x, phi)')
    r.add_argument("--beta", type=float)
    r.add_argument("--sigma2", type=int, choices=(-1, 0, 1))
    r.add_argument("--power", type=int)
    r.add_argument("--ell", type=float)
    r.add_argument("--lambda-inf", dest="lambda_inf", type=float)
    r.add_argument("--epsilon", type=float)
    r.add_argument("--out")
    r.add_argument("--curves", action="store_true", default=None, help="write eigenvalue-curve CSVs and plot.gp")
    r.add_argument("--check", action="store_true", default=None, help="run the robustness suite")
    r.add_argument("--quiet", action="store_true", default=None)
    return p


def _load_config(args) -> RunConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}", str(path)) from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})", str(path)) from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object", str(path))
    cfg = RunConfig()
    box = dict(data.pop("box", {}))
    integ = dict(data.pop("integration", {}))
    for k in ("ell", "lambda_inf", "epsilon"):
        if k in data:
            box[k] = data.pop(k)
    for k, v in data.items():
        if not hasattr(cfg, k):
            raise ConfigError(f"unknown configuration key: {k}")
        setattr(cfg, k, v)
    for k in ("profile", "beta", "sigma2", "power", "out", "curves", "check", "quiet"):
        v = getattr(args, k)
        if v is not None:
            setattr(cfg, k, v)
    for k in ("ell", "lambda_inf", "epsilon"):
        v = getattr(args, k)
        if v is not None:
            box[k] = v
    cfg.box, cfg.integration = box, integ
    if cfg.curve_lambda is not None:
        cfg.curve_lambda = tuple(cfg.curve_lambda)
    return cfg


def _dump(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fail(code, kind, message, path=None):
    err = {"error": kind, "message": message, "exit_code": code}
    if path is not None:
        err["path"] = path
    sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
    return code


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    if not out.is_dir():
        return _fail(EXIT_CONFIG, "ConfigError", f"output directory does not exist: {out}", str(out))
    try:
        profile = resolve_profile(cfg)
        box = box_config(cfg).resolved(profile)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", str(exc), exc.path)
    except CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))

    t0 = time.perf_counter()
    try:
        report = assemble_report(profile, box)
        checks = consistency_suite(profile, box, report) if cfg.check else {}
        curves = {}
        if cfg.curves:
            lams = _curve_lambdas(profile, cfg)
            for kind, name in ((Kind.LPLUS, "lplus"), (Kind.LMINUS, "lminus")):
                curves[name] = trace_curves(profile, kind, box, lams)
    except CONFIG_ERRORS as exc:
        return _fail(EXIT_CONFIG, type(exc).__name__, str(exc))
    except MaslovError as exc:
        return _fail(EXIT_INCONSISTENT, type(exc).__name__, str(exc))
    elapsed = time.perf_counter() - t0

    try:
        _dump(out / "report.json", report.to_dict())
        consistency = {"identities": report.to_dict()["consistency"], "valid": report.valid,
                       "failures": report.failures, "suite": checks}
        _dump(out / "consistency.json", consistency)
        if cfg.curves:
            write_curves(out / "curves_lplus.csv", curves["lplus"], "L+")
            write_curves(out / "curves_lminus.csv", curves["lminus"], "L-")
            (out / "plot.gp").write_text(PLOT_SCRIPT, encoding="utf-8")
    except OSError as exc:
        return _fail(EXIT_CONFIG, "OSError", str(exc), getattr(exc, "filename", None))

    suite_ok = all(c["passed"] for c in checks.values())
    if not cfg.quiet:
        v = report.verdicts
        print(f"P = {report.P}  Q = {report.Q}  p_c = {report.p_c}  q_c = {report.q_c}")
        print(f"I1 = {report.I1:.6g}  I2 = {report.I2:.6g}  c = {report.c}  lower bound = {report.lower_bound}")
        print(f"Jones-Grillakis unstable: {v['jones_grillakis_unstable']}  VK verdict: {v['vk_verdict']}")
        print(f"valid: {report.valid}  suite: {'ok' if suite_ok else 'FAILED'}  ({elapsed:.1f} s)")
    if not report.valid:
        return _fail(EXIT_INCONSISTENT, "InconsistencyError", "; ".join(report.failures))
    if not suite_ok:
        bad = [k for k, c in checks.items() if not c["passed"]]
        return _fail(EXIT_INCONSISTENT, "InconsistencyError", f"robustness checks failed: {', '.join(bad)}")
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", str(exc), exc.path)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
