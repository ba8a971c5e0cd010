import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nonlocal_limit.fields import Field, Grid
from nonlocal_limit.kernels import KernelFamily, ScaledKernel, Shape, Side
from nonlocal_limit.nonlocal_solver import KernelPair

settings.register_profile("repo", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def bump(height=0.8, radius=0.5, center=0.0):
    def f(x):
        z = (x - center) / radius
        out = np.zeros_like(x, dtype=float)
        m = np.abs(z) < 1
        out[m] = height * np.exp(1.0 - 1.0 / (1.0 - z[m] ** 2))
        return out
    return f


def pair(k, shape="box", param=1.0, left=True, right=True):
    sh = Shape(shape)
    return KernelPair(ScaledKernel(KernelFamily(Side.LEFT, sh, param), k) if left else None,
                      ScaledKernel(KernelFamily(Side.RIGHT, sh, param), k) if right else None)


def riemann(grid, ql, qr, x0=0.0):
    return Field.from_function(grid, lambda x: np.where(x < x0, ql, qr).astype(float))


@pytest.fixture
def small_grid():
    return Grid.uniform(-1.0, 1.0, 1 / 64, t_end=0.25)


# one line per acceptance criterion, echoed after the run
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
