import logging

import numpy as np
import pytest

from qneuron.collision import ReservoirSpec
from qneuron.exceptions import DivergenceError, NumericalError
from qneuron.learning import (
    TrainingConfig,
    actual_magnetization,
    analytic_available,
    cost,
    descend,
    grad_cost_analytic,
    grad_cost_numeric,
    objective_for,
    reachable_range,
    train,
)
from qneuron.master_eq import LindbladSpec

TAU = 3.0


def two_reservoirs(sz1, sz2, g1, g2):
    return (ReservoirSpec.from_sigma_z(sz1, g1), ReservoirSpec.from_sigma_z(sz2, g2))


def spec_for(j, sz1, sz2, g1=0.001, g2=0.04):
    return LindbladSpec(j, two_reservoirs(sz1, sz2, g1, g2), TAU, phase_averaged=True)


FIG4A = dict(sz1=0.94, sz2=-0.10, g1=0.002, g2=0.05)
FIG4B = dict(sz1=0.95, sz2=-0.11, g1=0.001, g2=0.04)
FIG5 = dict(sz1=0.96, sz2=-0.64, g1=0.001, g2=0.04)


def config(j, params, m_des, eta, **kw):
    res = two_reservoirs(params["sz1"], params["sz2"], params["g1"], params["g2"])
    return TrainingConfig(j=j, reservoirs=res, m_des=m_des, eta=eta, **kw)


def test_cost_examples():
    assert cost(0.3, 0.3) == 0.0
    assert cost(0.42, -1.0) == pytest.approx(1.0082)


def test_config_validation():
    res = two_reservoirs(0.5, -0.5, 0.01, 0.01)
    with pytest.raises(ValueError):
        TrainingConfig(1, res, m_des=1.5, eta=1e-5)
    with pytest.raises(ValueError):
        TrainingConfig(1, res, m_des=0.1, eta=-1.0)
    with pytest.raises(ValueError):
        TrainingConfig(1, res, m_des=0.1, eta=1e-5, grad_mode="guess")
    with pytest.raises(ValueError):
        TrainingConfig(1, res, m_des=0.1, eta=1e-5, max_iters=-1)
    cfg = TrainingConfig("1", res, m_des=0.1, eta=1e-5)
    np.testing.assert_allclose(cfg.initial_couplings, [0.01, 0.01])
    assert cfg.spec.phase_averaged


def test_analytic_availability():
    assert analytic_available(0.5, 2) and analytic_available(1, 2)
    assert not analytic_available(1.5, 2)
    assert not analytic_available(1, 3)
    assert not analytic_available(1, 2, phase_averaged=False)
    with pytest.raises(ValueError):
        grad_cost_analytic([0.01, 0.02], spec_for(2.5, 0.5, -0.5), 0.1)


@pytest.mark.parametrize("j", [0.5, 1.0])
def test_analytic_matches_closed_form_differences(j):
    spec = spec_for(j, FIG4A["sz1"], FIG4A["sz2"])
    g = np.array([FIG4A["g1"], FIG4A["g2"]])
    grad = grad_cost_analytic(g, spec, 0.42)
    for i in range(2):
        h = 1e-7 * g[i]
        up, down = g.copy(), g.copy()
        up[i] += h
        down[i] -= h
        fd = (cost(0.42, actual_magnetization(up, spec)) - cost(0.42, actual_magnetization(down, spec))) / (2 * h)
        assert grad[i] == pytest.approx(fd, rel=1e-5)


@pytest.mark.parametrize("j", [0.5, 1.0])
def test_analytic_matches_numeric(j):
    rng = np.random.default_rng(99)
    for _ in range(30):
        theta = rng.uniform(0, np.pi, 2)
        g = rng.uniform(1e-3, 0.05, 2)
        spec = LindbladSpec(j, tuple(ReservoirSpec(t, 0.0, gi) for t, gi in zip(theta, g)), TAU, phase_averaged=True)
        m_des = rng.uniform(-1, 1)
        a = grad_cost_analytic(g, spec, m_des)
        n = grad_cost_numeric(g, spec, m_des)
        np.testing.assert_allclose(a, n, rtol=1e-4, atol=1e-12)


def test_gradient_sign_raises_up_coupling():
    spec = spec_for(1.0, FIG4B["sz1"], FIG4B["sz2"])
    g = [FIG4B["g1"], FIG4B["g2"]]
    assert actual_magnetization(g, spec) < 0.42
    assert grad_cost_analytic(g, spec, 0.42)[0] < 0


@pytest.mark.parametrize("j", [0.5, 1.0, 2.5])
def test_gradient_vanishes_at_optimum(j):
    spec = spec_for(j, 0.8, -0.3)
    g = np.array([0.02, 0.03])
    m = actual_magnetization(g, spec)
    assert np.max(np.abs(grad_cost_numeric(g, spec, m))) <= 1e-9
    if analytic_available(j, 2):
        assert np.max(np.abs(grad_cost_analytic(g, spec, m))) <= 1e-9


def test_numeric_gradient_descent_direction_high_spin():
    spec = spec_for(2.5, FIG4B["sz1"], FIG4B["sz2"])
    g = np.array([FIG4B["g1"], FIG4B["g2"]])
    grad = grad_cost_numeric(g, spec, 0.42)
    assert np.all(np.isfinite(grad))
    c0 = cost(0.42, actual_magnetization(g, spec))
    step = 1e-3 * np.linalg.norm(g) / np.linalg.norm(grad)
    assert cost(0.42, actual_magnetization(g - step * grad, spec)) < c0


def test_numeric_gradient_at_zero_coupling_uses_forward_difference():
    spec = spec_for(1.0, 0.9, -0.4)
    grad = grad_cost_numeric([0.0, 0.02], spec, 0.3)
    assert np.all(np.isfinite(grad))
    with pytest.raises(ValueError):
        grad_cost_numeric([0.01, 0.02], spec, 0.3, h=0.0)


def test_analytic_gradient_rejects_zero_couplings():
    with pytest.raises(NumericalError):
        grad_cost_analytic([0.0, 0.0], spec_for(1.0, 0.5, -0.5), 0.1)


def test_zero_learning_rate_is_constant():
    hist = train(config(1.0, FIG4B, 0.42, 0.0, max_iters=5))
    assert len(hist) == 6
    for state in hist:
        np.testing.assert_array_equal(state.couplings, hist[0].couplings)
        assert state.cost == hist[0].cost


def test_history_records_every_iterate():
    hist = train(config(0.5, FIG4A, 0.42, 2e-5, max_iters=20))
    assert [s.iteration for s in hist] == list(range(21))
    assert np.all(np.diff([s.cost for s in hist]) <= 0)


@pytest.mark.parametrize("j, params, m_des, eta", [(0.5, FIG4A, 0.42, 2e-5), (1.0, FIG4B, 0.42, 1.2e-5),
                                                   (1.0, FIG5, 0.12, 2.4e-5)])
def test_preset_configurations_converge_monotonically(j, params, m_des, eta):
    hist = train(config(j, params, m_des, eta))
    costs = np.array([s.cost for s in hist])
    assert np.all(np.diff(costs) <= 0)
    assert costs[-1] < 1e-4 * costs[0]
    assert len(hist) <= 10_001


def test_higher_spin_trains_faster():
    iters = {}
    for j in (0.5, 1.0):
        hist = train(config(j, FIG4B, 0.42, 1.2e-5, eps=1e-6))
        iters[j] = hist[-1].iteration
    assert iters[1.0] < iters[0.5]


def test_fixed_point_is_stationary():
    spec = spec_for(1.0, 0.9, -0.5)
    m = actual_magnetization([0.01, 0.02], spec)
    cfg = TrainingConfig(1.0, two_reservoirs(0.9, -0.5, 0.01, 0.02), m_des=m, eta=1e-3, eps=0.0, max_iters=5)
    for state in train(cfg):
        np.testing.assert_allclose(state.couplings, [0.01, 0.02], rtol=1e-12)


def test_divergence_is_detected():
    def rising(g):
        return float(np.sum(g)), -np.ones_like(g), 0.0

    with pytest.raises(DivergenceError, match="smaller learning rate"):
        descend(rising, [0.01, 0.01], 1.0, 100, 1e-8, patience=10)


def test_non_finite_objective():
    with pytest.raises(NumericalError):
        descend(lambda g: (float("nan"), np.zeros(2), 0.0), [0.1, 0.1], 1.0, 10, 1e-8)


def test_clamping_is_logged(caplog):
    def pull_down(g):
        return float(np.sum(g**2)), np.array([10.0, 0.0]), 0.0

    with caplog.at_level(logging.INFO, logger="qneuron.learning"):
        hist = descend(pull_down, [0.01, 0.02], 1.0, 3, 0.0)
    assert hist[1].couplings[0] == 0.0
    assert hist[1].clamped == [0]
    assert "clamped" in caplog.text


def test_unreachable_target_warns():
    spec = spec_for(1.0, 0.5, -0.5)
    lo, hi = reachable_range(spec)
    assert lo < 0 < hi
    cfg = TrainingConfig(1.0, two_reservoirs(0.5, -0.5, 0.01, 0.01), m_des=0.99, eta=1e-6, max_iters=2)
    with pytest.warns(UserWarning, match="reachable"):
        train(cfg)


def test_objective_modes():
    spec = spec_for(1.5, 0.9, -0.5, 0.01, 0.02)
    with pytest.raises(ValueError):
        objective_for(spec, 0.1, "analytic")
    c, grad, m = objective_for(spec, 0.1, "auto")(np.array([0.01, 0.02]))
    assert c == pytest.approx(cost(0.1, m))
    assert grad.shape == (2,)
