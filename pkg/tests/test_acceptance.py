"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

import test_forms as forms_cases
from nls4maslov.bundles import integrate_unstable
from nls4maslov.cli import consistency_suite, main
from nls4maslov.forms import analytic_path_index, rotating_line
from nls4maslov.maslovbox import MaslovBoxConfig, assemble_report
from nls4maslov.profiles import Parameters
from nls4maslov.systems import Kind, LinearSystem, asymptotic_matrix, essential_spectrum, stable_frame
from test_systems import VALID, closed_form_S


class Clauses:
    """Collects named checks, prints one PASS/FAIL line and fails on any miss."""

    def __init__(self, name):
        self.name = name
        self.results = []

    def check(self, label, ok):
        self.results.append((label, bool(ok)))

    def finish(self):
        bad = [label for label, ok in self.results if not ok]
        status = "PASS" if not bad else "FAIL"
        detail = "" if not bad else "  failed: " + "; ".join(bad)
        print(f"\n[{status}] {self.name}{detail}")
        assert not bad, f"{self.name}: {'; '.join(bad)}"


def test_criterion_1_kh_reproduction(tmp_path):
    c = Clauses("criterion 1: KH Morse indices from conjugate points and the lambda sweep")
    t0 = time.perf_counter()
    code = main(["run", "--profile", "kh", "--out", str(tmp_path), "--quiet"])
    elapsed = time.perf_counter() - t0
    rep = json.loads((tmp_path / "report.json").read_text())
    c.check("exit code 0", code == 0)
    c.check("ell = 6", rep["parameters"]["ell"] == 6.0)
    c.check("p_c = 1, q_c = 0", (rep["p_c"], rep["q_c"]) == (1, 0))
    c.check("P = 1, Q = 0", (rep["P"], rep["Q"]) == (1, 0))
    c.check("all integers", all(isinstance(rep[k], int) for k in ("P", "Q", "p_c", "q_c")))
    c.check(f"runtime {elapsed:.1f} s <= 60 s", elapsed <= 60.0)
    c.finish()


def test_criterion_2_kh_verdict(kh_report):
    r = kh_report
    c = Clauses("criterion 2: KH integrals, corner term and VK verdict")
    c.check(f"I1 = {r.I1:.6g} > 0", r.I1 > 0)
    c.check("c = 1", r.c == 1)
    c.check("lower bound = 0", r.lower_bound == 0)
    c.check("VK verdict stable", r.verdicts["vk_verdict"] == "stable")
    n_sweep = r.edges["Gamma2"]["N"]
    c.check("N sweep on [1e-3, lambda_inf] finds no crossings",
            r.parameters["epsilon"] == 1e-3 and n_sweep["count"] == 0 and r.n_plus_N_detected == 0)
    # the literal sign clause; computed I2 is positive with two independent routes
    c.check(f"I2 = {r.I2:.6g} < 0", r.I2 < 0)
    c.finish()


def test_criterion_3_homotopy_sum(kh_report, two_hump_report):
    c = Clauses("criterion 3: Gamma1 + c + Gamma2 = 0 for KH and a sampled two-hump profile")
    for label, r in (("KH", kh_report), ("two-hump", two_hump_report)):
        e = r.edges
        for kind in ("LPlus", "LMinus", "N"):
            total = r.consistency["homotopy_sum"][kind]
            c.check(f"{label} {kind} sum {total} == 0", isinstance(total, int) and total == 0)
        n_total = e["Gamma1"]["N"]["index"] + r.c + e["Gamma2"]["N"]["index"]
        c.check(f"{label} N identity recomputed from edges ({n_total})", n_total == 0)
        c.check(f"{label} report valid", r.valid)
    c.check("two-hump is a multi-hump case (P = 3)", two_hump_report.P == 3)
    c.finish()


def test_criterion_4_crossing_form_oracles(kh):
    c = Clauses("criterion 4: generic crossing forms reproduce the closed forms")

    def run(label, fn, *args):
        try:
            fn(*args)
            c.check(label, True)
        except AssertionError as exc:
            c.check(f"{label} ({exc})", False)

    run("KH conjugate point first order", forms_cases.test_first_order_lplus_kh_conjugate_point, kh)
    run("KH third-order value", forms_cases.test_kh_third_order_values)
    run("pure quartic third order", forms_cases.test_pure_quartic_third_order)
    for pr in forms_cases.PARAMS:
        for kind in ("LPlus", "LMinus"):
            run(f"{kind} first order {pr}", forms_cases.test_first_order_closed_form, kind, pr)
            run(f"{kind} third order and 2-D case {pr}", forms_cases.test_third_order_closed_forms, kind, pr)
    for case in forms_cases.VANISHING:
        run(f"vanishing profile order {case[1]}", forms_cases.test_vanishing_profile_case1, *case)
    for case in forms_cases.VANISHING_DEEP:
        run(f"vanishing profile cases 2/3 to order {case[2]}",
            forms_cases.test_vanishing_profile_cases_2_and_3, *case)
    c.finish()


def test_criterion_5_structural_invariants(kh, two_hump, kh_report, two_hump_report):
    c = Clauses("criterion 5: structural invariants")
    drift = 0.0
    for prof, ell in ((kh, 6.0), (two_hump, 5.5)):
        for kind in Kind:
            for lam in (0.0, 0.3, 1.5):
                path = integrate_unstable(LinearSystem(kind, prof), lam, ell)
                drift = max(drift, path.lagrangian_drift())
    c.check(f"Lagrangian drift {drift:.2e} <= 1e-8", drift <= 1e-8)

    closure = []
    for r in (kh_report, two_hump_report):
        for edge in ("Gamma1", "Gamma2"):
            for kind in ("LPlus", "LMinus", "N"):
                for x in r.edges[edge][kind]["crossings"]:
                    closure.append(sum(a + b for a, b in x["signatures"]) == x["dim"])
    c.check(f"dimension closure at all {len(closure)} crossings", closure and all(closure))

    k = np.arange(-10000, 10001) * 1e-3
    ess, frames, sbs = 0.0, 0.0, 0.0
    for sigma2, beta in VALID:
        pr = Parameters(beta, sigma2)
        scan = np.max(-(k**4) + sigma2 * k**2 - beta)
        for kind in ("LPlus", "LMinus"):
            ess = max(ess, abs(essential_spectrum(kind, pr).right_endpoint - scan))
            S = stable_frame(0.0, kind, pr)
            frames = max(frames, np.max(np.abs(S - closed_form_S(kind, pr))))
            A = asymptotic_matrix(kind, pr, 0.0)
            sbs = max(sbs, np.max(np.abs(A[2:, :2] - S @ A[:2, 2:] @ S)))
    c.check(f"essential spectrum vs dispersion scan {ess:.1e} <= 1e-6", ess <= 1e-6)
    c.check(f"S(0) closed form {frames:.1e} <= 1e-12", frames <= 1e-12)
    c.check(f"C = SBS {sbs:.1e} <= 1e-12", sbs <= 1e-12)
    c.finish()


def test_criterion_6_synthetic_maslov_oracle():
    c = Clauses("criterion 6: rotating line and constant path")
    V = np.array([[1.0], [0.0]])
    idx, _ = analytic_path_index(rotating_line, V, -math.pi / 4, math.pi + math.pi / 4)
    c.check(f"rotating line index {idx} == -2", idx == -2)
    const, _ = analytic_path_index(lambda t, K: [V] + [np.zeros((2, 1))] * K, V, 0.0, 1.0)
    c.check(f"constant path index {const} == 0", const == 0)
    c.finish()


def test_criterion_7_robustness_and_determinism(kh, kh_report):
    c = Clauses("criterion 7: invariance under numerical knobs and byte-identical reports")
    box = MaslovBoxConfig().resolved(kh)
    suite = consistency_suite(kh, box, kh_report)
    for name, res in suite.items():
        c.check(f"{name}", res["passed"])
    c.check("epsilon 1e-3 baseline valid", kh_report.valid and kh_report.parameters["epsilon"] == 1e-3)
    again = assemble_report(kh)
    a = json.dumps(kh_report.to_dict(), sort_keys=True, indent=2)
    b = json.dumps(again.to_dict(), sort_keys=True, indent=2)
    c.check("byte-identical report on rerun", a == b)
    c.finish()
