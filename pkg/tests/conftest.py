import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("polebench", deadline=None, max_examples=60)
settings.load_profile("polebench")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import REPORT
    except ImportError:
        return
    if REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(REPORT, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
