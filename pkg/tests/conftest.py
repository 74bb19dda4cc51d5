import numpy as np
import pytest

from qapsat.core import QapInstance
from qapsat.generator import GeneratorConfig, generate


def random_instance(rng, n, hi=9, density=0.7):
    A = rng.integers(0, hi, size=(n, n)) * (rng.random((n, n)) < density)
    B = rng.integers(0, hi, size=(n, n))
    np.fill_diagonal(A, 0)
    np.fill_diagonal(B, 0)
    return QapInstance(A, B)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_sat():
    return generate(GeneratorConfig(n=7, m=5, m1=4, seed=11))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[num])
