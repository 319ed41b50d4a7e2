import numpy as np
import pytest

from magpie import make_dataset, make_synthetic_object, make_zone_plate_probe, scan_positions


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_dataset():
    """Noiseless n=16, m=8, half-overlap instance (9 regions)."""
    obj = make_synthetic_object(16, "texture", 0)
    return make_dataset(obj, make_zone_plate_probe(8), scan_positions(16, 8, 0.5), 0.0, 0)


@pytest.fixture
def noisy_dataset():
    obj = make_synthetic_object(32, "texture", 1)
    return make_dataset(obj, make_zone_plate_probe(8), scan_positions(32, 8, 0.5), 0.05, 3)


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


ACCEPTANCE_LINES = []


def report(criterion, passed, detail):
    """Record one acceptance line; printed again in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
