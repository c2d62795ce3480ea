import numpy as np
import pytest

from phaseshift import Provenance, generate_dataset, reference_system, split_test_validation
from phaseshift.config import desk_sweep


@pytest.fixture(scope="session")
def ref_system():
    return reference_system()


@pytest.fixture(scope="session")
def desk_data(ref_system):
    """Desk-scale DSSS grid: (train, test, val)."""
    spec = desk_sweep(ref_system)
    train = generate_dataset(spec, Provenance.TRAIN, ref_system)
    test, val = split_test_validation(generate_dataset(spec, Provenance.TESTVAL, ref_system), seed=0)
    return train, test, val


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


GATE_LINES = []


@pytest.fixture(scope="session")
def gate():
    """Record one PASS/FAIL line per acceptance criterion."""
    def record(number, title, ok, detail):
        GATE_LINES.append(f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if GATE_LINES:
        terminalreporter.section("acceptance gate")
        for line in sorted(GATE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
