import numpy as np
import pytest
from hypothesis import settings

from twoway_relay.model import PowerProfile

from helpers import make_system

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def asym_system():
    rng = np.random.default_rng(11)
    return make_system(M=100, N=4, p_p=2.0, beta_AR=rng.uniform(0.1, 1, 4),
                       beta_RB=rng.uniform(0.1, 1, 4))


@pytest.fixture
def asym_powers():
    rng = np.random.default_rng(12)
    return PowerProfile(rng.uniform(0.2, 2, 4), rng.uniform(0.2, 2, 4), 5.0, 2.0)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
