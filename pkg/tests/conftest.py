import math

import numpy as np
import pytest

from vibcal.core import Waveform, exact
from vibcal.estimator import phase_angles

_ACCEPTANCE: list[tuple[str, bool, str]] = []


def sine(fv, fs, cycles, amplitude=1.0, phase=0.0, offset=0, unit=""):
    """``amplitude*sin(2*pi*fv*t + phase)`` over whole cycles, first sample at ``offset/fs``."""
    fv, fs = exact(fv), exact(fs)
    n = cycles * fs / fv
    assert n.denominator == 1
    extra = 2 if offset == -1 else 0
    theta = phase_angles(int(n) + extra, fv, fs, offset=offset)
    return Waveform(amplitude * np.sin(theta + phase), fs, offset / float(fs), unit)


@pytest.fixture
def record_acceptance():
    def record(name: str, passed: bool, detail: str):
        _ACCEPTANCE.append((name, bool(passed), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")


def two_pi_f(f):
    return 2 * math.pi * float(f)
