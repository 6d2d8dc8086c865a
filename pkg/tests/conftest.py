import numpy as np
import pytest

from qite_mpemba import DistanceKind, EnergySpectrum, PopulationVector, make_distance

THREE = (0.0, 0.2, 0.3)
FIVE = (0.0, 0.15, 0.4, 0.65, 0.8)

A = (0.35, 0.45, 0.20)
B = (0.45, 0.15, 0.40)
B_PRIME = (0.36, 0.16, 0.48)
B_DOUBLE = (0.11, 0.14, 0.75)
C = (0.31, 0.16, 0.53)
C_PRIME = (0.18, 0.15, 0.67)

SI_HOT_A = (0.05, 0.005, 0.8, 0.05, 0.095)
SI_COLD_A = (0.3, 0.45, 0.05, 0.1, 0.1)
SI_HOT_B = (0.05, 0.0, 0.9, 0.025, 0.025)
SI_COLD_B = (0.4, 0.4, 0.05, 0.05, 0.1)


@pytest.fixture
def three():
    return EnergySpectrum(THREE)


@pytest.fixture
def five():
    return EnergySpectrum(FIVE)


@pytest.fixture
def avg3(three):
    return make_distance(three, DistanceKind.AVERAGE_ENERGY)


@pytest.fixture
def inf3(three):
    return make_distance(three, DistanceKind.INFIDELITY)


@pytest.fixture
def avg5(five):
    return make_distance(five, DistanceKind.AVERAGE_ENERGY)


def pv(values):
    return PopulationVector(values)


DYADIC = 1 << 20


def dyadic_simplex(rng, n, min_ground=0.02):
    """Random probability vector with entries k / 2**20, so sums and ratios are exact."""
    while True:
        w = rng.dirichlet(np.ones(n))
        k = np.floor(w * DYADIC).astype(np.int64)
        k[0] += DYADIC - k.sum()
        if k[0] >= min_ground * DYADIC and np.all(k >= 0):
            return k


def random_spectrum(rng, n, min_gap=0.05):
    gaps = min_gap + rng.random(n - 1)
    return np.concatenate(([0.0], np.cumsum(gaps)))


def pytest_terminal_summary(terminalreporter):
    import sys

    for module in list(sys.modules.values()):
        path = getattr(module, "__file__", None) or ""
        results = getattr(module, "RESULTS", None)
        if path.endswith("test_acceptance.py") and results:
            terminalreporter.section("acceptance criteria")
            for number in sorted(results):
                terminalreporter.write_line(results[number])
            break
