import numpy as np
import pytest

from lossprotect.model import SystemParams

DW = 2e-3


@pytest.fixture
def fig1_params():
    return SystemParams(delta_omega=DW, g=3e-3, Omega=6e-3, n_modes=100)


@pytest.fixture
def fig2_params():
    return SystemParams(delta_omega=DW, g=7.5e-4, Omega=5e-4, n_modes=100)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_state(rng, dim):
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(name, ok, detail):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
