import numpy as np
import pytest

from riboflow import build_model, make_kinetics

TRIANGLE = [(1, 2), (2, 3), (3, 1)]
EX2 = [(2, 3), (3, 2), (3, 1)]


def random_model(rng, m, p):
    edges = [(i, j) for i in range(1, m + 1) for j in range(1, m + 1) if i != j and rng.random() < p]
    return build_model(m, edges, np.ones(m))


@pytest.fixture
def triangle():
    return build_model(3, TRIANGLE, [5, 25, 50])


@pytest.fixture
def triangle_ma(triangle):
    rates = [make_kinetics("mass_action", k, e) for e, k in zip(TRIANGLE, (100, 40, 60))]
    return triangle, rates


@pytest.fixture
def ex2():
    model = build_model(3, EX2, [100, 100, 100])
    rates = [make_kinetics("mass_action", k, e) for e, k in zip(EX2, (15, 25, 35))]
    return model, rates


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def report_criterion():
    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
