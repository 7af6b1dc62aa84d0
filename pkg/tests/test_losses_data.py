import math

import numpy as np
import pytest

from oracles import finite_diff_grad
from ssdc.data import (
    Dataset,
    dataset_digest,
    gen_pu,
    gen_synthetic,
    parse_libsvm_line,
    read_libsvm,
    scale_features,
    write_libsvm,
)
from ssdc.errors import ConfigurationError, ParameterError, ParseError
from ssdc.losses import LOSS_KINDS, build_erm_dc, build_erm_nonconvex, build_pu_problem, loss_spec
from ssdc.problem import objective_value
from ssdc.prox import L0Reg, dc_penalty

SMOOTH = ["logistic", "huber", "squared", "sigmoid_ls", "truncated_ls"]


@pytest.mark.parametrize("kind", SMOOTH)
def test_loss_derivative_fd(kind):
    loss = loss_spec(kind, alpha=3.0) if kind == "truncated_ls" else loss_spec(kind)
    rng = np.random.default_rng(0)
    for s in rng.normal(scale=2.0, size=40):
        y = rng.choice([-1.0, 1.0])
        fd = (loss.value(s + 1e-6, y) - loss.value(s - 1e-6, y)) / 2e-6
        assert loss.derivative(s, y) == pytest.approx(fd, abs=1e-6)


@pytest.mark.parametrize("kind", SMOOTH)
def test_loss_curvature_bound(kind):
    loss = loss_spec(kind, alpha=3.0) if kind == "truncated_ls" else loss_spec(kind)
    s = np.linspace(-8, 8, 4001)
    for y in (-1.0, 1.0):
        d = loss.derivative(s, y)
        slope = np.max(np.abs(np.diff(d) / np.diff(s)))
        assert slope <= loss.smoothness * 1.001


def test_loss_hand_values():
    assert loss_spec("logistic").value(0.0, 1.0) == pytest.approx(math.log(2))
    assert loss_spec("hinge").value(0.5, 1.0) == pytest.approx(0.5)
    assert loss_spec("hinge").derivative(1.0, 1.0) == 0.0
    assert loss_spec("huber", delta=1.0).value(3.0, 0.0) == pytest.approx(2.5)
    assert loss_spec("sigmoid_ls").value(0.0, -1.0) == pytest.approx(0.25)


def test_truncated_alpha_default():
    assert loss_spec("truncated_ls").with_alpha(40).alpha == pytest.approx(20.0)
    with pytest.raises(ConfigurationError):
        loss_spec("truncated_ls").value(0.0, 1.0)


def test_unknown_loss():
    with pytest.raises(ParameterError):
        loss_spec("cauchy")
    assert "logistic" in LOSS_KINDS


def _cls_data(n=60, d=5, seed=0):
    return scale_features(gen_synthetic(n, d, "classification", 0.4, 0.1, seed=seed))


def test_erm_dc_objective_is_loss_plus_penalty():
    data = _cls_data()
    pen = dc_penalty("mcp", 0.1, 2.0)
    p = build_erm_dc(data, "logistic", pen)
    x = np.random.default_rng(1).normal(size=5)
    direct = np.mean(np.logaddexp(0, -data.labels * (data.features @ x))) + pen.penalty_value(x)
    assert objective_value(p, x) == pytest.approx(direct, rel=1e-12)
    assert p.constants.L == pytest.approx(0.25 * np.max(np.sum(data.features**2, axis=1)))


def test_erm_dc_ridge_and_gradient():
    data = _cls_data()
    p = build_erm_dc(data, "logistic", dc_penalty("lsp", 0.1, 1.0), lam_reg=0.3)
    x = np.random.default_rng(2).normal(size=5)
    np.testing.assert_allclose(p.g.full_subgradient(x), finite_diff_grad(p.g.value, x), atol=1e-7)
    assert p.g.value(np.zeros(5)) == pytest.approx(math.log(2))


def test_erm_dc_rejects_nonconvex_loss():
    with pytest.raises(ConfigurationError):
        build_erm_dc(_cls_data(), "sigmoid_ls", dc_penalty("mcp", 0.1, 2.0))


def test_erm_nonconvex_dc_split():
    data = _cls_data()
    p = build_erm_nonconvex(data, "sigmoid_ls", "l0", lam_reg=0.05)
    x = np.random.default_rng(3).normal(size=5)
    direct = np.mean(loss_spec("sigmoid_ls").value(data.features @ x, data.labels))
    assert p.g.value(x) - p.h.value(x) == pytest.approx(direct, rel=1e-10)
    assert isinstance(p.r, L0Reg)
    with pytest.raises(ConfigurationError):
        build_erm_nonconvex(data, "sigmoid_ls", "l0", L_loss=-1.0)


def test_pu_risk_matches_formula():
    pos, unl, _ = gen_pu(30, 70, 4, 0.3, seed=0)
    pi = 0.3
    p = build_pu_problem(pos, unl, pi, "hinge")
    x = np.random.default_rng(4).normal(size=4)
    hinge = loss_spec("hinge").value
    zp, zu = pos.features @ x, unl.features @ x
    risk = (pi * np.mean(hinge(zp, 1.0)) + np.mean(hinge(zu, -1.0)) - pi * np.mean(hinge(zp, -1.0)))
    assert objective_value(p, x) == pytest.approx(risk, rel=1e-12)


def test_pu_zero_prior_and_range():
    pos, unl, _ = gen_pu(10, 10, 3, 0.5, seed=1)
    p = build_pu_problem(pos, unl, 0.0)
    assert p.h.value(np.ones(3)) == 0.0
    with pytest.raises(ParameterError):
        build_pu_problem(pos, unl, 1.0)


def test_libsvm_parse_and_errors():
    assert parse_libsvm_line("+1 1:0.5 3:2") == (1.0, [0, 2], [0.5, 2.0])
    assert parse_libsvm_line("  # comment") is None
    with pytest.raises(ParseError) as info:
        parse_libsvm_line("1 3:1 2:1", lineno=7)
    assert info.value.line == 7
    for bad in ("1 0:1", "x 1:1", "1 1-2", "1 a:1"):
        with pytest.raises(ParseError):
            parse_libsvm_line(bad)


def test_libsvm_round_trip(tmp_path):
    data = gen_synthetic(25, 6, "classification", 0.5, 0.1, seed=3)
    data = Dataset(np.where(np.abs(data.features) < 0.5, 0.0, data.features), data.labels)
    path = tmp_path / "d.svm"
    write_libsvm(data, path)
    back = read_libsvm(path, d=6)
    np.testing.assert_array_equal(back.features, data.features)
    np.testing.assert_array_equal(back.labels, data.labels)
    assert back.task == "classification"
    assert dataset_digest(back) == dataset_digest(data)


def test_libsvm_regression_and_dim_check(tmp_path):
    path = tmp_path / "r.svm"
    path.write_text("0.5 2:1\n-1.25 1:3\n", encoding="utf-8")
    data = read_libsvm(path)
    assert data.task == "regression" and data.d == 2
    with pytest.raises(ParseError):
        read_libsvm(path, d=1)


def test_synthetic_deterministic_and_sparse():
    a = gen_synthetic(50, 20, "regression", 0.1, 0.0, seed=4)
    b = gen_synthetic(50, 20, "regression", 0.1, 0.0, seed=4)
    assert dataset_digest(a) == dataset_digest(b)
    w = a.meta["w_star"]
    assert np.count_nonzero(w) == 2
    np.testing.assert_allclose(a.labels, a.features @ w)


def test_synthetic_correlation():
    data = gen_synthetic(20000, 3, "regression", 1.0, 0.0, seed=0, corr=0.9)
    c = np.corrcoef(data.features.T)
    assert c[0, 1] == pytest.approx(0.9, abs=0.01) and c[0, 2] == pytest.approx(0.81, abs=0.01)


def test_scale_features_range():
    data = scale_features(gen_synthetic(40, 4, seed=0))
    assert np.allclose(data.features.min(axis=0), -1) and np.allclose(data.features.max(axis=0), 1)
    const = Dataset(np.ones((3, 2)), np.ones(3))
    assert np.all(scale_features(const).features == 0)


def test_dataset_validation():
    with pytest.raises(ParameterError):
        Dataset(np.ones((3, 2)), np.array([1.0, 0.0, 1.0]))
    with pytest.raises(ParameterError):
        gen_pu(5, 5, 2, 1.2)
