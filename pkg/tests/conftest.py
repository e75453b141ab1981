import numpy as np
import pytest
import torch

from zonedepth.geometry import CameraIntrinsics
from zonedepth.sensor import SensorConfig


@pytest.fixture
def K():
    return CameraIntrinsics(fx=120.0, fy=120.0, cx=96.0, cy=72.0, width=192, height=144)


@pytest.fixture
def K_tof():
    return SensorConfig().tof_intrinsics()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def float64():
    old = torch.get_default_dtype()
    torch.set_default_dtype(torch.float64)
    yield
    torch.set_default_dtype(old)


_VERDICTS = []


@pytest.fixture
def verdict(request):
    """Call ``verdict(ok, detail)`` once per acceptance criterion; the line is printed and the test asserts ``ok``."""
    def record(ok: bool, detail: str):
        line = f"{request.node.name}: {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
