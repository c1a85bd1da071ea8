import numpy as np
import pytest

from netrisk.flows import FlowRecord

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def flow(t, src="A", dst="B", **kw):
    """Compact FlowRecord builder for hand-written cases."""
    return FlowRecord(timestamp=float(t), src_entity=src, dst_entity=dst, **kw)
