"""Shared fixtures plus the acceptance summary hook.

The acceptance tests append one "name: PASS/FAIL (detail)" line per check to
ACCEPTANCE_LINES; the terminal-summary hook reprints them after the run so
the verdict survives pytest's output capture.
"""

import numpy as np
import pytest

from turboep import ldpc
from turboep.channel import ChannelRealization, random_channel
from turboep.constellation import Constellation

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def small_code():
    return ldpc.build_code(256, 7)


@pytest.fixture(scope="session")
def mid_code():
    return ldpc.build_code(512, 11)


@pytest.fixture(scope="session")
def qam16():
    return Constellation.qam(16)


@pytest.fixture(scope="session")
def qam64():
    return Constellation.qam(64)


def make_channel(n_taps: int, seed: int, noise_variance: float | None = None):
    ch = random_channel(n_taps, np.random.default_rng(seed))
    if noise_variance is None:
        return ch
    return ChannelRealization(ch.taps, noise_variance)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance summary")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
