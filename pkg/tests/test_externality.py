import numpy as np
import pytest
import sympy as sp

from sustain_extract import (
    DemandSystem,
    demand_elasticities,
    demand_jacobian,
    externality_margin,
    marginal_revenue_check,
)
from sustain_extract.errors import DemandError

from conftest import random_isoelastic, random_linear


def test_isoelastic_elasticities_are_the_exponents():
    eta = [[-2.0, 0.5], [0.3, -1.0]]
    d = DemandSystem.isoelastic([1.0, 1.0], eta)
    for Q in ([1.0, 1.0], [0.3, 7.0], [12.0, 0.05]):
        rep = demand_elasticities(d, Q)
        assert np.allclose(rep.epsilon, eta, rtol=1e-12, atol=1e-12)


def test_linear_own_elasticity():
    # q = 10 - p so dq/dp = -1, at Q = 4 the price is 6
    rep = demand_elasticities(DemandSystem.linear([10.0], [[1.0]]), [4.0])
    assert rep.epsilon[0, 0] == pytest.approx(-1.0 * 6.0 / 4.0, rel=1e-14)
    assert rep.inverse_elasticity[0, 0] == pytest.approx(1.0 / rep.epsilon[0, 0], rel=1e-12)


def test_zero_extraction_refused():
    with pytest.raises(DemandError):
        demand_elasticities(DemandSystem.linear([10.0], [[1.0]]), [0.0])


def test_single_resource_margin():
    # scale chosen so that Q = 3 prices at p = 2
    d = DemandSystem.isoelastic([12.0], [[-2.0]])
    mr = externality_margin(d, [3.0])
    assert mr.market_price[0] == pytest.approx(2.0, rel=1e-14)
    assert mr.margin[0] == pytest.approx(-0.5, rel=1e-14)
    assert mr.adjusted_price[0] == pytest.approx(1.0, rel=1e-14)


def test_two_resource_margin_by_hand(lin2):
    mr = externality_margin(lin2, [2.0, 2.0])
    # (1/p_1) * (dp_1/dQ_1 * Q_1 + dp_2/dQ_1 * Q_2) with dp_2/dQ_1 = -B[1, 0]
    m1 = (1 / 7.0) * ((-1.0) * 2.0 + (-0.2) * 2.0)
    assert m1 == pytest.approx(-0.342857142857, rel=1e-11)
    assert mr.margin[0] == pytest.approx(m1, rel=1e-14)
    assert mr.adjusted_price[0] == pytest.approx(4.6, rel=1e-14)
    assert np.array_equal(mr.adjusted_price, mr.market_price * (1 + mr.margin))


def test_perfectly_elastic_limit(lin2):
    mr = externality_margin(lin2, [2.0, 2.0], impact_scale=0.0)
    assert np.all(mr.margin == 0.0)
    assert np.array_equal(mr.adjusted_price, mr.market_price)


def test_margin_shrinks_monotonically_with_impact_scale():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3):
        d = random_isoelastic(rng, n)
        Q = rng.uniform(0.5, 2.0, n)
        sizes = [np.max(np.abs(externality_margin(d, Q, impact_scale=s).margin))
                 for s in (1.0, 0.5, 0.1, 1e-3, 1e-6, 0.0)]
        assert all(a > b for a, b in zip(sizes[:-1], sizes[1:-1]))
        assert sizes[-1] == 0.0


def test_marginal_revenue_examples():
    iso = DemandSystem.isoelastic([1.0], [[-2.0]])
    assert abs(marginal_revenue_check(iso, [2.5], 0)) < 1e-6
    q = sp.symbols("q")
    dR = float(sp.diff((10 - q) * q, q).subs(q, 4))
    assert dR == 2.0
    lin = DemandSystem.linear([10.0], [[1.0]])
    assert externality_margin(lin, [4.0]).adjusted_price[0] == pytest.approx(dR, rel=1e-14)
    assert abs(marginal_revenue_check(lin, [4.0], 0)) < 1e-8


def test_reciprocal_form_agrees_only_for_single_resource():
    single = DemandSystem.isoelastic([2.0], [[-3.0]])
    a = externality_margin(single, [1.5]).margin
    b = externality_margin(single, [1.5], form="reciprocal").margin
    assert a == pytest.approx(b, rel=1e-12)
    coupled = DemandSystem.isoelastic([1.0, 1.0], [[-2.0, 0.5], [0.3, -1.5]])
    a = externality_margin(coupled, [1.0, 2.0]).margin
    b = externality_margin(coupled, [1.0, 2.0], form="reciprocal").margin
    assert not np.allclose(a, b)


@pytest.mark.parametrize("family", ["isoelastic", "linear"])
def test_elasticity_jacobian_inversion_identity(family):
    rng = np.random.default_rng(11)
    for n in (1, 2, 3):
        d = random_isoelastic(rng, n) if family == "isoelastic" else random_linear(rng, n)
        Q = rng.uniform(0.3, 3.0, n)
        rep = demand_elasticities(d, Q)
        dq_dp = rep.epsilon * Q[:, None] / rep.price[None, :]
        dp_dq = demand_jacobian(d, Q).T
        assert np.allclose(dq_dp @ dp_dq, np.eye(n), atol=1e-8, rtol=0)


def test_single_resource_margin_is_reciprocal_elasticity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = random_isoelastic(rng, 1) if rng.random() < 0.5 else random_linear(rng, 1)
        Q = rng.uniform(0.3, 3.0, 1)
        eps = demand_elasticities(d, Q).epsilon[0, 0]
        assert externality_margin(d, Q).margin[0] == pytest.approx(1 / eps, rel=1e-12)


def test_sign_property_positive_net_cross_terms():
    # p_2 rises with Q_1 strongly enough to make the margin on resource 1 positive
    d = DemandSystem.linear([10.0, 10.0], [[1.0, -0.1], [-3.0, 1.0]])
    mr = externality_margin(d, [1.0, 1.0])
    assert mr.margin[0] > 0
    assert mr.adjusted_price[0] > mr.market_price[0]
