import numpy as np
import pytest

from sustain_extract import DemandSystem, EconomySpec, ResourceSpec


@pytest.fixture
def iso1():
    return DemandSystem.isoelastic([1.0], [[-2.0]])


@pytest.fixture
def lin2():
    return DemandSystem.linear([10.0, 8.0], [[1.0, 0.5], [0.2, 1.0]])


@pytest.fixture
def benchmark():
    """Single nonrenewable, isoelastic eta=-2, X0=100, r=0.05, T=40."""
    econ = EconomySpec(horizon_steps=40, dt=1.0, interest_rate=0.05)
    return econ, [ResourceSpec("oil", 100.0)], DemandSystem.isoelastic([1.0], [[-2.0]])


def random_isoelastic(rng, n):
    while True:
        eta = rng.uniform(-0.4, 0.4, (n, n))
        eta[np.diag_indices(n)] = rng.uniform(-4.0, -1.3, n)
        try:
            return DemandSystem.isoelastic(rng.uniform(0.5, 3.0, n), eta)
        except ValueError:
            continue


def random_linear(rng, n):
    B = rng.uniform(-0.3, 0.3, (n, n))
    B[np.diag_indices(n)] = rng.uniform(0.5, 2.0, n)
    a = rng.uniform(20.0, 40.0, n)
    return DemandSystem.linear(a, B)


def pytest_terminal_summary(terminalreporter):
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in nodeid:
                continue
            name = nodeid.split("::")[-1]
            if outcome == "passed" and rep.when != "call":
                continue
            results[name] = "PASS" if outcome == "passed" else "FAIL"
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(results):
        num, label = name[len("test_criterion_"):].split("_", 1)
        terminalreporter.write_line(f"criterion {int(num):2d} {results[name]}  {label.replace('_', ' ')}")
