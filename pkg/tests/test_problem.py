import numpy as np
import pytest

from oracles import finite_diff_grad
from ssdc.errors import ConfigurationError, DomainError, ParameterError
from ssdc.losses import loss_spec
from ssdc.problem import (
    DcProblem,
    GradCounter,
    LinearModelSum,
    L1NormOracle,
    NoisyOracle,
    ProblemConstants,
    QuadraticOracle,
    QuadraticSum,
    SquaredNormOracle,
    SumOracle,
    ZeroOracle,
    build_majorant,
    objective_value,
)
from ssdc.prox import BoxReg, L1Reg


def _lsq(n=30, d=4, seed=0):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, d))
    b = rng.standard_normal(n)
    return A, b, LinearModelSum(A, b, loss_spec("squared"))


def test_counter_limit():
    c = GradCounter(limit=5)
    c.charge(3)
    assert not c.exhausted
    c.charge(2)
    assert c.exhausted and c.count == 5


def test_objective_quadratic_hand_value():
    Q = np.eye(2)
    p = DcProblem(QuadraticOracle(Q), QuadraticOracle(0.5 * Q), L1Reg(1.0))
    x = np.array([1.0, -2.0])
    # 0.5*5 + 3 - 0.25*5
    assert objective_value(p, x) == pytest.approx(4.25)


def test_objective_domain_error_names_term():
    p = DcProblem(ZeroOracle(1), ZeroOracle(1), BoxReg(0.0, 1.0))
    with pytest.raises(DomainError, match="r"):
        objective_value(p, np.array([2.0]))


def test_objective_shape_checked():
    p = DcProblem(ZeroOracle(2), ZeroOracle(2))
    with pytest.raises(ParameterError):
        objective_value(p, np.zeros(3))


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        DcProblem(ZeroOracle(2), ZeroOracle(3))


def test_linear_model_gradient_fd():
    A, b, g = _lsq()
    x = np.array([0.3, -0.1, 0.7, 0.2])
    np.testing.assert_allclose(g.full_subgradient(x), finite_diff_grad(g.value, x), rtol=1e-6, atol=1e-8)


def test_linear_model_components_average_to_full():
    A, b, g = _lsq()
    x = np.ones(4)
    mean = np.mean([g.component_gradient(i, x) for i in range(g.component_count)], axis=0)
    np.testing.assert_allclose(mean, g.full_subgradient(x), atol=1e-12)


def test_linear_model_ridge_fd():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((20, 3))
    y = np.where(rng.standard_normal(20) > 0, 1.0, -1.0)
    g = LinearModelSum(A, y, loss_spec("logistic"), l2=0.5)
    x = rng.standard_normal(3)
    np.testing.assert_allclose(g.full_subgradient(x), finite_diff_grad(g.value, x), rtol=1e-6, atol=1e-8)
    mean = np.mean([g.component_gradient(i, x) for i in range(20)], axis=0)
    np.testing.assert_allclose(mean, g.full_subgradient(x), atol=1e-12)


def test_linear_model_smoothness_bounds_components():
    A, b, g = _lsq()
    rng = np.random.default_rng(2)
    for _ in range(50):
        i = rng.integers(30)
        x, y = rng.standard_normal((2, 4))
        gap = np.linalg.norm(g.component_gradient(i, x) - g.component_gradient(i, y))
        assert gap <= g.smoothness * np.linalg.norm(x - y) + 1e-12
    assert g.full_smoothness <= g.smoothness + 1e-12


def test_stochastic_gradient_unbiased():
    A, b, g = _lsq(n=10)
    x = np.ones(4)
    rng = np.random.default_rng(3)
    est = np.mean([g.stochastic_subgradient(x, rng) for _ in range(20000)], axis=0)
    np.testing.assert_allclose(est, g.full_subgradient(x), atol=0.1)


def test_uncounted_oracles_cost_nothing():
    for o in (ZeroOracle(2), L1NormOracle(2), SquaredNormOracle(2, 1.0)):
        assert o.full_cost == 0 and o.stoch_cost == 0
    A, b, g = _lsq()
    assert g.full_cost == 30 and g.stoch_cost == 1


def test_sum_oracle_rejects_two_stochastic_parts():
    _, _, g1 = _lsq(seed=1)
    _, _, g2 = _lsq(seed=2)
    with pytest.raises(ConfigurationError):
        SumOracle(g1, g2)


def test_quadratic_sum_shifted_identity():
    centers = np.array([[1.0, 0.0], [3.0, 2.0]])
    q = QuadraticSum.shifted_identity(centers, scale=2.0)
    x = np.zeros(2)
    np.testing.assert_allclose(q.full_subgradient(x), -2.0 * centers.mean(axis=0))
    assert q.full_smoothness == pytest.approx(2.0)


def test_constants_validation():
    with pytest.raises(ParameterError):
        ProblemConstants(L=-1.0)
    with pytest.raises(ParameterError):
        ProblemConstants(nu=1.5)
    with pytest.raises(ConfigurationError, match="G_r"):
        ProblemConstants().require("G_r")


def test_majorant_value_and_charge():
    A, b, g = _lsq()
    p = DcProblem(g, SquaredNormOracle(4, 0.5), L1Reg(0.1))
    c = np.array([0.5, 0.0, -0.5, 1.0])
    counter = GradCounter()
    sub = build_majorant(p, c, 2.0, counter=counter)
    assert counter.count == 0  # h is data free
    # at the center the majorant touches F
    assert sub.value(c) == pytest.approx(objective_value(p, c))
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((20, 4)):
        assert sub.value(x) >= objective_value(p, x) - 1e-10
    sub.g_full_gradient(c)
    assert counter.count == 30


def test_majorant_charges_full_h():
    A, b, g = _lsq()
    p = DcProblem(SquaredNormOracle(4, 10.0), g)
    counter = GradCounter()
    build_majorant(p, np.zeros(4), 1.0, counter=counter)
    assert counter.count == 30


def test_majorant_rejects_bad_gamma():
    p = DcProblem(ZeroOracle(1), ZeroOracle(1))
    with pytest.raises(ConfigurationError):
        build_majorant(p, np.zeros(1), 0.0)


def test_pure_stochastic_h_needs_batch():
    h = NoisyOracle(SquaredNormOracle(2, 1.0), 0.1)
    p = DcProblem(SquaredNormOracle(2, 2.0), h)
    with pytest.raises(ConfigurationError):
        build_majorant(p, np.zeros(2), 1.0, rng=np.random.default_rng(0))
    sub = build_majorant(p, np.zeros(2), 1.0, rng=np.random.default_rng(0), h_batch=4)
    assert sub.h_linearization.shape == (2,)


def test_resample_mode_redraws_h():
    A, b, g = _lsq()
    p = DcProblem(SquaredNormOracle(4, 10.0), g)
    counter = GradCounter()
    rng = np.random.default_rng(0)
    sub = build_majorant(p, np.ones(4), 1.0, rng=rng, counter=counter, h_mode="resample")
    assert counter.count == 1
    sub.stochastic_gradient(np.zeros(4), rng)
    assert counter.count == 2
