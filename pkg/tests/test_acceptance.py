"""Acceptance criteria, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see conftest).
"""
import json
import time
from pathlib import Path

import numpy as np
import pytest

from sustain_extract import (
    DemandSystem,
    EconomySpec,
    GrowthFunction,
    ResourceSpec,
    SolverConfig,
    TerminalCondition,
    adjusted_prices,
    compare,
    costates,
    demand_jacobian,
    enumerate_maxmin,
    externality_margin,
    solve_constant_consumption,
    solve_user_cost_mode,
)
from sustain_extract import config as cfg
from sustain_extract.cli import main
from sustain_extract.externality import total_revenue
from sustain_extract.rules import costate_hotelling_link

from conftest import random_isoelastic, random_linear

FIXTURES = Path(__file__).parent / "fixtures"


def benchmark_case():
    econ = EconomySpec(horizon_steps=40, dt=1.0, interest_rate=0.05)
    return econ, [ResourceSpec("oil", 100.0)], DemandSystem.isoelastic([1.0], [[-2.0]])


def solver_cases():
    """Converged solves spanning both demand families, growth and coupling."""
    cases = {"benchmark": benchmark_case()}
    cases["iso2"] = (
        EconomySpec(horizon_steps=30, interest_rate=0.04),
        [ResourceSpec("a", 50.0), ResourceSpec("b", 80.0)],
        DemandSystem.isoelastic([1.0, 2.0], [[-2.0, 0.3], [0.2, -2.5]]),
    )
    cases["complements"] = (
        EconomySpec(horizon_steps=8, interest_rate=0.03),
        [ResourceSpec("a", 150.0), ResourceSpec("b", 200.0)],
        DemandSystem.linear([30.0, 30.0], [[1.0, -0.1], [-1.2, 1.0]]),
    )
    cases["fishery"] = (
        EconomySpec(horizon_steps=30, interest_rate=0.05,
                    terminal=TerminalCondition("stock_target", (60.0,))),
        [ResourceSpec("fish", 100.0, GrowthFunction("logistic", 0.1, 200.0))],
        DemandSystem.isoelastic([5.0], [[-1.5]]),
    )
    cases["varying_rate"] = (
        EconomySpec(horizon_steps=12, interest_rate=[0.02 + 0.005 * k for k in range(12)]),
        [ResourceSpec("oil", 100.0, GrowthFunction("exponential", 0.01))],
        DemandSystem.linear([20.0], [[0.5]]),
    )
    return cases


@pytest.fixture(scope="module")
def solved():
    return {name: solve_constant_consumption(*case) for name, case in solver_cases().items()}


def test_criterion_01_marginal_revenue_identity():
    rng = np.random.default_rng(2024)
    worst, points = 0.0, 0
    for family in ("isoelastic", "linear"):
        for k in range(60):
            n = 1 + k % 3
            d = random_isoelastic(rng, n) if family == "isoelastic" else random_linear(rng, n)
            Q = rng.uniform(0.3, 3.0, n)
            P = adjusted_prices(d, Q)
            for j in range(n):
                h = 1e-6 * Q[j]
                up, dn = Q.copy(), Q.copy()
                up[j] += h
                dn[j] -= h
                dR = (total_revenue(d, up) - total_revenue(d, dn)) / (2 * h)
                worst = max(worst, abs(P[j] - dR) / max(1.0, abs(P[j])))
                points += 1
    assert points >= 100
    assert worst <= 1e-6


def test_criterion_02_perfect_elasticity_reduction():
    rng = np.random.default_rng(9)
    for n in (1, 2, 3):
        for d in (random_isoelastic(rng, n), random_linear(rng, n)):
            mr = externality_margin(d, rng.uniform(0.5, 2.0, n), impact_scale=0.0)
            assert np.all(mr.margin == 0.0)
    for name in ("benchmark", "iso2"):
        econ, res, d = solver_cases()[name]
        out = solve_constant_consumption(econ, res, d, SolverConfig(impact_scale=0.0))
        assert np.all(out.trajectory.margin == 0.0)
        assert np.allclose(out.trajectory.price, out.trajectory.adjusted_price, rtol=1e-12, atol=0)
        assert out.report.summary["max_hotelling_rel"] <= 1e-10


def test_criterion_03_classical_hotelling_price_growth(solved):
    p = solved["benchmark"].trajectory.price[:, 0]
    assert np.max(np.abs(p[1:] / p[:-1] - 1.05)) <= 1e-10


def test_criterion_04_half_split():
    econ = EconomySpec(horizon_steps=20, dt=1.0, interest_rate=0.05)
    d = DemandSystem.isoelastic([1.0], [[-2.0]])
    traj = solve_user_cost_mode(econ, [ResourceSpec("oil", 1000.0)], d, 3.0 * 1.05 ** np.arange(21))
    X = traj.stock[:, 0]
    assert len(X) == 21
    assert np.max(np.abs(X[1:] / X[:-1] - 0.5)) <= 1e-12


def test_criterion_05_shooting_convergence(solved):
    out = solved["benchmark"]
    terminal = out.trajectory.stock[-1, 0]
    assert 0.0 <= terminal <= 1e-8 * 100.0
    assert out.iterations <= 200


def test_criterion_06_oracle_agreement():
    start = time.perf_counter()
    run = cfg.load(FIXTURES / "oracle_t3.json")
    oracle = enumerate_maxmin(run.oracle, run.economy, run.resources, run.demand)
    result = solve_constant_consumption(run.economy, run.resources, run.demand, run.solver)
    report = compare(result, oracle, run.oracle)
    elapsed = time.perf_counter() - start
    expected = json.loads((FIXTURES / "oracle_t3_expected.json").read_text())
    assert oracle.cbar == pytest.approx(expected["cbar"], rel=1e-12)
    assert abs(report["relative_gap"]) <= 0.02
    assert report["oracle_hotelling_within_grid"]
    assert elapsed <= 10.0


def test_criterion_07_equal_split():
    run = cfg.load(FIXTURES / "oracle_t3.json")
    assert run.economy.rate(0) == 0.0
    out = solve_constant_consumption(run.economy, run.resources, run.demand, run.solver)
    Q = out.trajectory.extraction[:-1, 0]
    assert np.max(np.abs(Q / Q.mean() - 1)) <= 1e-8
    oracle = enumerate_maxmin(run.oracle, run.economy, run.resources, run.demand)
    cell = 12.0 / (run.oracle.grid_points - 1)
    assert np.max(np.abs(Q - oracle.best_sequence[:, 0])) <= cell


def test_criterion_08_round_trip_audit(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "economy": {"horizon_steps": 40, "dt": 1.0, "interest_rate": 0.05,
                    "terminal": {"kind": "exhaust"}},
        "resources": [{"name": "oil", "stock0": 100.0, "growth": {"kind": "zero"}}],
        "demand": {"kind": "isoelastic", "scale": [1.0], "exponents": [[-2.0]]},
    }))
    for tag in ("a", "b"):
        assert main(["solve", "--config", str(config), "--out", str(tmp_path / tag)]) == 0
        assert main(["audit", "--config", str(config), "--data", str(tmp_path / tag / "trajectory.csv"),
                     "--out", str(tmp_path / f"audit_{tag}")]) == 0
    internal = json.loads((tmp_path / "a" / "summary.json").read_text())["max_residuals"]
    external = json.loads((tmp_path / "audit_a" / "summary.json").read_text())["max_residuals"]
    # residuals at machine precision: allow one rounding unit of slack on top of the 10x bound
    for key in ("max_hotelling_rel", "max_present_value_abs"):
        assert external[key] <= 10 * internal[key] + 1e-15, key
    assert external["max_hotelling_rel"] <= 1e-8
    for name in ("trajectory.csv", "residuals.csv", "summary.json", "trajectory.png", "residuals.png"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
    for name in ("residuals.csv", "summary.json"):
        assert (tmp_path / "audit_a" / name).read_bytes() == (tmp_path / "audit_b" / name).read_bytes()


def _flag_positive_net(d, Q):
    """(j) where cross effects outweigh the own effect in the margin numerator."""
    J = demand_jacobian(d, Q)
    own = np.diag(J) * Q
    cross = J @ Q - own
    return cross + own > 0


def test_criterion_09_sign_property(solved):
    rng = np.random.default_rng(31)
    flagged = 0
    for _ in range(200):
        n = int(rng.integers(2, 4))
        B = np.eye(n) + rng.uniform(-1.5, 0.2, (n, n)) * (1 - np.eye(n))
        d = DemandSystem.linear(rng.uniform(40.0, 60.0, n), B)
        Q = rng.uniform(0.5, 3.0, n)
        try:
            mr = externality_margin(d, Q)
        except ValueError:
            continue
        flags = _flag_positive_net(d, Q)
        flagged += int(flags.sum())
        assert np.all(mr.adjusted_price[flags] > mr.market_price[flags])
    traj = solved["complements"].trajectory
    for t in range(traj.steps + 1):
        flags = _flag_positive_net(traj.demand, traj.extraction[t])
        flagged += int(flags.sum())
        assert np.all(traj.adjusted_price[t][flags] > traj.price[t][flags])
    assert flagged > 0
    for _ in range(100):
        d = random_isoelastic(rng, 1) if rng.random() < 0.5 else random_linear(rng, 1)
        mr = externality_margin(d, rng.uniform(0.3, 3.0, 1))
        assert mr.adjusted_price[0] < mr.market_price[0]
    for name in ("benchmark", "fishery", "varying_rate"):
        traj = solved[name].trajectory
        assert np.all(traj.adjusted_price < traj.price)


def test_criterion_10_costate_consistency(solved):
    for name, out in solved.items():
        cs = costates(out.trajectory)
        link = costate_hotelling_link(out.trajectory, out.report.hotelling, cs.pi)
        assert np.max(np.abs(cs.psi_residual - link)) <= 1e-12, name
        assert np.allclose(cs.psi / cs.pi[:, None], out.trajectory.adjusted_price, rtol=1e-15)
