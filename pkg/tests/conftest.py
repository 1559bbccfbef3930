import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from logidist.trace import Trace  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("default")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")


@st.composite
def unit_traces(draw, min_samples=1, max_samples=30):
    """Traces on [0, 1] with values in [0, 1]."""
    m = draw(st.integers(min_samples, max_samples))
    gaps = draw(st.lists(st.floats(0.01, 1.0), min_size=m, max_size=m))
    times = np.cumsum(gaps) - gaps[0]
    if times[-1] > 0:
        times = times / times[-1]
    values = draw(st.lists(st.floats(0.0, 1.0), min_size=m, max_size=m))
    return Trace("h", times, np.array(values))


@pytest.fixture
def const_half():
    return Trace("c", np.linspace(0.0, 1.0, 11), np.full(11, 0.5))
