import numpy as np
import pytest

from fchlab.field import BilayerProfiles
from fchlab.profile import LineOperator, build_phi0
from fchlab.well import WellSpec

ETA1, ETA2 = 1.45, 2.0


@pytest.fixture(scope="session")
def spec():
    return WellSpec()


@pytest.fixture(scope="session")
def profile(spec):
    return build_phi0(spec)


@pytest.fixture(scope="session")
def operator(profile):
    return LineOperator.from_profile(profile)


@pytest.fixture(scope="session")
def profiles(spec):
    return BilayerProfiles.build(spec, ETA1, ETA2)


@pytest.fixture(scope="session")
def consts(profiles):
    return profiles.constants


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
