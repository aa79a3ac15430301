import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nls4maslov.errors import ParameterError, ProfileParseError, ProfileValidationError
from nls4maslov.profiles import (
    Parameters,
    ZeroProfile,
    kh_profile,
    load_sampled_profile,
    power_law_profile,
    residual_norm,
    with_params,
    write_sampled_profile,
)


def test_kh_peak_value(kh):
    assert kh.phi(0.0)[0] == pytest.approx(math.sqrt(0.3), abs=1e-15)
    assert kh.phi(0.0)[0] == pytest.approx(0.5477226, abs=1e-7)


def test_kh_decays(kh):
    assert abs(kh.phi(200.0)[0]) < 1e-15
    assert abs(kh.phi(-200.0)[0]) < 1e-15
    L = kh.support_halfwidth
    xs = np.concatenate([np.linspace(-L - 50, -L, 200), np.linspace(L, L + 50, 200)])
    assert np.max(np.abs(kh.phi(xs))) <= 1e-12


def test_kh_parameters(kh):
    assert kh.params == Parameters(4 / 25, -1, 1)


@pytest.mark.parametrize("x0", [0.0, 1.0, 5.0])
def test_kh_residual_at_points(kh, x0):
    assert residual_norm(kh, [x0]) <= 1e-12


def test_kh_residual_on_grid(kh):
    assert residual_norm(kh, np.linspace(-20, 20, 401)) <= 1e-10
    assert residual_norm(kh, np.linspace(-30, 30, 1201)) <= 1e-10


def test_zero_profile_residual():
    for beta in (0.1, 0.7, 3.0):
        assert residual_norm(ZeroProfile(Parameters(beta, -1)), np.linspace(-5, 5, 11)) == 0.0


def test_wrong_beta_residual(kh):
    wrong = with_params(kh, Parameters(0.17, -1, 1))
    assert residual_norm(wrong, np.linspace(-20, 20, 401)) >= 1e-3


def test_kh_even(kh):
    xs = np.linspace(0, 25, 251)
    assert np.max(np.abs(kh.phi(xs) - kh.phi(-xs))) <= 1e-16
    d = kh.eval(np.array([0.0]))[:, 0]
    assert abs(d[1]) <= 1e-16 and abs(d[3]) <= 1e-16


def test_kh_derivatives_match_finite_differences(kh):
    xs = np.linspace(-8, 8, 17)
    d = kh.eval(xs)
    h = 1e-4
    for k in range(4):
        fd = (kh.eval(xs + h)[k] - kh.eval(xs - h)[k]) / (2 * h)
        assert np.max(np.abs(fd - d[k + 1])) <= 1e-7


@pytest.mark.parametrize("p", [1, 2, 3])
def test_power_law_profiles_solve_equation(p):
    prof = power_law_profile(p)
    assert prof.params.power_p == p
    assert residual_norm(prof, np.linspace(-20, 20, 801)) <= 1e-10


def test_power_law_p1_is_kh():
    a, b = power_law_profile(1), kh_profile()
    xs = np.linspace(-10, 10, 41)
    assert np.max(np.abs(a.phi(xs) - b.phi(xs))) <= 1e-14
    assert a.params.beta == pytest.approx(0.16, abs=1e-15)


@pytest.mark.parametrize(
    "beta,sigma2",
    [(0.25, -1), (0.0, -1), (-1.0, 0), (0.2, 1), (0.25, 1), (1.0, 2)],
)
def test_parameter_validation(beta, sigma2):
    with pytest.raises(ParameterError):
        Parameters(beta, sigma2)


def test_power_must_be_positive_integer():
    with pytest.raises(ParameterError):
        Parameters(1.0, -1, 0)
    with pytest.raises(ParameterError):
        Parameters(1.0, -1, 1.5)


def test_sampled_kh_matches_exact(kh, tmp_path):
    x = np.round(np.arange(-3000, 3001) * 0.01, 10)
    path = tmp_path / "kh.txt"
    write_sampled_profile(path, x, kh.phi(x), header="kh samples")
    prof = load_sampled_profile(path, kh.params)
    xs = np.linspace(-29, 29, 5801) + 0.003
    assert np.max(np.abs(prof.phi(xs) - kh.phi(xs))) <= 1e-8


def test_sampled_round_trip_derivatives(kh, tmp_path):
    x = np.arange(-2000, 2001) * 0.01
    path = tmp_path / "kh.csv"
    path.write_text("# x, phi\n" + "\n".join(f"{a:.17g},{b:.17g}" for a, b in zip(x, kh.phi(x))))
    prof = load_sampled_profile(path, kh.params)
    xs = np.linspace(-18, 18, 721) + 0.0037
    got, want = prof.eval(xs), kh.eval(xs)
    for k in range(3):
        assert np.max(np.abs(got[k] - want[k])) <= 1e-6


def test_sampled_support_is_capped_and_zero_outside(kh, tmp_path):
    x = np.linspace(-10, 10, 201)
    path = tmp_path / "short.txt"
    write_sampled_profile(path, x, kh.phi(x))
    prof = load_sampled_profile(path, kh.params)
    assert prof.support_halfwidth == pytest.approx(10.0)
    assert prof.phi(12.0)[0] == 0.0


def test_two_rows_rejected(tmp_path):
    path = tmp_path / "two.txt"
    path.write_text("0 1\n1 0.5\n")
    with pytest.raises(ProfileValidationError):
        load_sampled_profile(path, Parameters(0.16, -1))


def test_nan_rejected(tmp_path):
    path = tmp_path / "nan.txt"
    rows = [f"{i} {0.1 * i}" for i in range(20)]
    rows[5] = "5 nan"
    path.write_text("\n".join(rows))
    with pytest.raises(ProfileParseError):
        load_sampled_profile(path, Parameters(0.16, -1))


def test_malformed_rejected(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("0 1 2\n")
    with pytest.raises(ProfileParseError):
        load_sampled_profile(path, Parameters(0.16, -1))
    path.write_text("# only a comment\n")
    with pytest.raises(ProfileParseError):
        load_sampled_profile(path, Parameters(0.16, -1))


def test_non_monotone_rejected(tmp_path):
    path = tmp_path / "order.txt"
    x = np.linspace(0, 1, 20)
    x[[3, 4]] = x[[4, 3]]
    write_sampled_profile(path, x, np.zeros(20))
    with pytest.raises(ProfileValidationError):
        load_sampled_profile(path, Parameters(0.16, -1))


@settings(max_examples=30, deadline=None)
@given(st.floats(min_value=-40, max_value=40))
def test_kh_residual_property(x0):
    assert residual_norm(kh_profile(), [x0]) <= 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=-6, max_value=6), st.integers(min_value=5, max_value=9))
def test_jet_extends_eval(x0, order):
    prof = kh_profile()
    jet = prof.jet(x0, order)
    assert np.allclose(jet[:5], prof.eval(np.array([x0]))[:, 0], rtol=1e-12, atol=1e-14)
    # differentiating the equation: phi^(k+4) = -sigma2 phi^(k+2) - beta phi^(k) + (phi^3)^(k)
    h = 1e-4
    fd = (prof.jet(x0 + h, order)[order - 1] - prof.jet(x0 - h, order)[order - 1]) / (2 * h)
    assert fd == pytest.approx(jet[order], rel=1e-5, abs=1e-8)
