import sys

import numpy as np
import pytest

from ane.network import ReluModel


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_model(rng, n, d, scale=1.0):
    """Random model with unit-sphere weights and hinges that cut [-1, 1]^d."""
    if d == 1:
        omega = np.ones((n, 1))
    else:
        omega = rng.standard_normal((n, d))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    b = rng.uniform(-0.8, 0.8, n)
    c = rng.standard_normal(n) * scale
    return ReluModel(omega, b, float(rng.standard_normal()), c)


def central_difference(fun, x0, h=1e-6):
    x0 = np.asarray(x0, dtype=float)
    g = np.zeros_like(x0)
    for j in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp.flat[j] += h
        xm.flat[j] -= h
        g.flat[j] = (fun(xp) - fun(xm)) / (2 * h)
    return g


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", {})
    if lines:
        terminalreporter.section("acceptance")
        for line in lines.values():
            terminalreporter.write_line(line)
