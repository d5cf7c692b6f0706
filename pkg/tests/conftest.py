import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coupledwaves.presets import PRESETS

settings.register_profile(
    "default",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

DAMPED_PRESETS = [pid for pid, p in PRESETS.items() if not (p.diagnostic or p.one_way)]

_systems = {}


def preset_system(pid, n=64, alpha_frac=None):
    key = (pid, n, alpha_frac)
    if key not in _systems:
        _systems[key] = PRESETS[pid].build(n, alpha_frac)
    return _systems[key]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
