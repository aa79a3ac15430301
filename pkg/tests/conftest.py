import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import oracles  # noqa: E402
from nls4maslov.maslovbox import MaslovBoxConfig, assemble_report  # noqa: E402
from nls4maslov.profiles import Parameters, kh_profile, load_sampled_profile, write_sampled_profile  # noqa: E402

TWO_HUMP_PARAMS = Parameters(beta=2.0, sigma2=-1, power_p=1)
TWO_HUMP_ELL = 5.5


@pytest.fixture(scope="session")
def kh():
    return kh_profile()


@pytest.fixture(scope="session")
def kh_report(kh):
    return assemble_report(kh, MaslovBoxConfig())


@pytest.fixture(scope="session")
def two_hump_samples():
    return oracles.two_hump()


@pytest.fixture(scope="session")
def two_hump_file(two_hump_samples, tmp_path_factory):
    x, phi = two_hump_samples
    path = tmp_path_factory.mktemp("profiles") / "two_hump.txt"
    write_sampled_profile(path, x, phi, header="two-hump standing wave, beta = 2, sigma2 = -1")
    return path


@pytest.fixture(scope="session")
def two_hump(two_hump_file):
    return load_sampled_profile(two_hump_file, TWO_HUMP_PARAMS)


@pytest.fixture(scope="session")
def two_hump_report(two_hump):
    return assemble_report(two_hump, MaslovBoxConfig(ell=TWO_HUMP_ELL))


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
