import csv
import json
from collections import defaultdict

import numpy as np
import pytest

from nls4maslov.bundles import detection_function, integrate_unstable
from nls4maslov.cli import EXIT_CONFIG, EXIT_OK, RunConfig, main, resolve_profile, trace_curves
from nls4maslov.maslovbox import MaslovBoxConfig
from nls4maslov.profiles import Parameters, ZeroProfile, kh_profile
from nls4maslov.systems import LinearSystem, stable_frame

from conftest import TWO_HUMP_ELL


@pytest.fixture(scope="module")
def kh_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("kh")
    code = main(["run", "--profile", "kh", "--out", str(out), "--curves", "--check", "--quiet"])
    return code, out


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def read_csv(path):
    with path.open(encoding="utf-8") as fh:
        return list(csv.reader(fh))


def stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_kh_run_artifacts(kh_run):
    code, out = kh_run
    assert code == EXIT_OK
    for name in ("report.json", "consistency.json", "curves_lplus.csv", "curves_lminus.csv", "plot.gp"):
        assert (out / name).is_file()
    rep = read_json(out / "report.json")
    assert (rep["P"], rep["Q"], rep["p_c"], rep["q_c"], rep["c"]) == (1, 0, 1, 0, 1)
    assert rep["parameters"]["ell"] == 6.0 and rep["valid"] is True
    con = read_json(out / "consistency.json")
    assert con["valid"] is True
    assert all(c["passed"] for c in con["suite"].values())
    assert con["suite"]["lagrangian_drift"]["max"] <= 1e-8


def test_curve_tables_are_roots(kh_run):
    _, out = kh_run
    kh = kh_profile()
    for name, kind, op in (("curves_lplus.csv", "LPlus", "L+"), ("curves_lminus.csv", "LMinus", "L-")):
        rows = read_csv(out / name)
        assert rows[0] == ["lambda", "x", "operator"]
        assert len(rows) > 1 and all(r[2] == op for r in rows[1:])
        by_lam = defaultdict(list)
        for lam, x, _ in rows[1:]:
            by_lam[float(lam)].append(float(x))
        system = LinearSystem(kind, kh)
        for lam, xs in by_lam.items():
            path = integrate_unstable(system, lam, 6.0)
            D = detection_function(path, stable_frame(lam, kind, kh.params, strict=False))
            assert max(abs(D(x)) for x in xs) <= 1e-8


def test_lplus_curve_crosses_zero_at_conjugate_point(kh_run):
    _, out = kh_run
    rep = read_json(out / "report.json")
    x0 = rep["edges"]["Gamma1"]["LPlus"]["crossings"][0]["coordinate"]
    rows = [(float(a), float(b)) for a, b, _ in read_csv(out / "curves_lplus.csv")[1:]]
    lams = sorted({l for l, _ in rows})
    at_zero = [x for l, x in rows if l == min(lams, key=abs)]
    assert min(abs(x - x0) for x in at_zero) < 0.2


def test_report_is_deterministic(kh_run, tmp_path):
    _, out = kh_run
    assert main(["run", "--profile", "kh", "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    assert (tmp_path / "report.json").read_bytes() == (out / "report.json").read_bytes()


def test_missing_output_directory(tmp_path, capsys):
    missing = tmp_path / "nope"
    assert main(["run", "--profile", "kh", "--out", str(missing), "--quiet"]) == EXIT_CONFIG
    err = stderr_json(capsys)
    assert err["exit_code"] == 2 and err["path"] == str(missing)


def test_missing_profile_file(tmp_path, capsys):
    prof = tmp_path / "absent.txt"
    code = main(["run", "--profile", str(prof), "--beta", "1", "--sigma2", "-1", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG
    assert stderr_json(capsys)["path"] == str(prof)


def test_sampled_profile_needs_parameters(two_hump_file, tmp_path, capsys):
    assert main(["run", "--profile", str(two_hump_file), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert stderr_json(capsys)["error"] == "ConfigError"


def test_bad_flag_exits_with_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--sigma2", "3", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_config_file_errors(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"profile": "kh", "colour": "red"}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "colour" in stderr_json(capsys)["message"]
    cfg.write_text("{not json")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == EXIT_CONFIG
    cfg.write_text(json.dumps({"box": {"nonsense": 1}}))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invalid_numeric_option(tmp_path, capsys):
    assert main(["run", "--profile", "kh", "--epsilon", "0", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert stderr_json(capsys)["exit_code"] == 2


def test_config_file_and_flag_precedence(kh_run, tmp_path):
    _, ref = kh_run
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"profile": "kh", "ell": 5.0, "quiet": True}))
    assert main(["run", "--config", str(cfg), "--ell", "7", "--out", str(tmp_path)]) == EXIT_OK
    rep = read_json(tmp_path / "report.json")
    base = read_json(ref / "report.json")
    assert rep["parameters"]["ell"] == 7.0
    for k in ("P", "Q", "p_c", "q_c", "c", "lower_bound"):
        assert rep[k] == base[k]


def test_zero_profile_has_no_curves():
    prof = ZeroProfile(Parameters(0.3, -1))
    box = MaslovBoxConfig(ell=3.0)
    for kind in ("LPlus", "LMinus"):
        assert trace_curves(prof, kind, box, np.linspace(0.0, 1.0, 6)) == []


def test_resolve_profile_kh_ignores_overrides(caplog):
    prof = resolve_profile(RunConfig(profile="kh", beta=1.0))
    assert prof.params.beta == pytest.approx(0.16)
    assert "overrides ignored" in caplog.text


def test_sampled_two_hump_run(two_hump_file, tmp_path):
    code = main(["run", "--profile", str(two_hump_file), "--beta", "2", "--sigma2", "-1",
                 "--ell", str(TWO_HUMP_ELL), "--out", str(tmp_path), "--quiet"])
    assert code == EXIT_OK
    rep = read_json(tmp_path / "report.json")
    assert (rep["P"], rep["Q"], rep["c"], rep["lower_bound"]) == (3, 1, 1, 1)
    assert rep["verdicts"]["jones_grillakis_unstable"] is True
    assert rep["consistency"]["homotopy_sum"] == {"LMinus": 0, "LPlus": 0, "N": 0}
