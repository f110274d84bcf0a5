from pathlib import Path

import pytest

from locarray import kernels
from locarray.arrayfile import read_array

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixture_array():
    def load(name: str, d: int = 1):
        return read_array(FIXTURES / f"{name}.txt", d=d)

    return load


@pytest.fixture(params=sorted(kernels.available_backends()))
def kernel_backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    monkeypatch.setattr(kernels, "_impl", kernels.available_backends()[request.param])
    return request.param


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
