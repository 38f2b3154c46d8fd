import math

import numpy as np
import pytest

from lukanet.dataset import Dataset
from lukanet.network import Layer, Network
from lukanet.training import (
    TrainConfig,
    crisp_crystallize,
    init_network,
    lm_step,
    lm_train,
    mse,
    network_jacobian,
    obs_prune,
    representation_error,
    saliencies,
    smooth_crystallize,
    upsilon,
)

AND = Dataset([[0, 0], [0, 1], [1, 0], [1, 1]], [0, 0, 0, 1], ["x", "y"])


def single(weights, bias):
    return Network(("x", "y")[: len(weights)], [Layer([weights], [bias])])


def test_upsilon_examples():
    assert upsilon(1.0, 2) == 1.0
    assert upsilon(0.9, 2) == pytest.approx(0.97553, abs=1e-5)
    assert upsilon(-0.25, 2) == pytest.approx(-0.14645, abs=1e-5)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_upsilon_integer_fixed_points(n):
    ints = np.arange(-4.0, 5.0)
    assert np.array_equal(upsilon(ints, n), ints)


def test_upsilon_sine_form_and_midpoint():
    w = np.linspace(0, 1, 101)
    assert np.allclose(upsilon(w, 2), np.sin(w * np.pi / 2) ** 2)
    assert upsilon(0.5, 2) == pytest.approx(0.5)
    h = 1e-6
    slope = (upsilon(0.5 + h, 2) - upsilon(0.5 - h, 2)) / (2 * h)
    assert slope == pytest.approx(np.pi / 2, rel=1e-6)


def test_upsilon_keeps_sign_and_integer_part():
    w = np.array([-2.7, -1.2, -0.3, 0.4, 1.6, 3.05])
    out = upsilon(w, 2)
    assert np.array_equal(np.sign(out), np.sign(w))
    assert np.array_equal(np.floor(np.abs(out)), np.floor(np.abs(w)))


def test_representation_error_examples():
    assert representation_error(Network(("a", "b", "c"), [Layer([[1, -1, 0]], [-1])])) == 0
    assert representation_error(single([0.5], 0)) == 0.5
    assert representation_error(single([0.75, -0.9], 0)) == pytest.approx(0.35)


def test_crystallization_monotone():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        w = rng.uniform(-1, 1, 6)
        net = Network(("a", "b", "c", "d", "e"), [Layer([w[:5]], [w[5]])])
        assert representation_error(smooth_crystallize(net, 2)) <= representation_error(net) + 1e-12


def test_other_exponents_not_monotone():
    # n = 1 pushes 0.2 away from 0; n = 3 pulls 0.6 toward the repelling 1/2
    assert abs(upsilon(0.2, 1)) > 0.2
    assert 1 - upsilon(0.6, 3) > 0.4


def test_smooth_crystallize_examples():
    net = single([0.9], 0.0)
    assert smooth_crystallize(net).layers[0].weights[0, 0] == pytest.approx(0.97553, abs=1e-5)
    crisp = single([1, -1], 2)
    assert smooth_crystallize(crisp).get_params().tolist() == crisp.get_params().tolist()


def test_crisp_examples():
    net = Network(("a", "b", "c"), [Layer([[0.93, -0.08, 0.5]], [1.49])])
    c = crisp_crystallize(net)
    assert c.crystallized
    assert c.layers[0].weights.tolist() == [[1, 0, 1]]
    assert c.layers[0].biases.tolist() == [1]
    assert crisp_crystallize(single([-0.5, 1.8], -2.5)).get_params().tolist() == [-1, 1, -3]


def test_crisp_idempotent():
    rng = np.random.default_rng(1)
    for _ in range(50):
        net = init_network(["a", "b", "c"], [4], rng)
        net = net.with_params(net.get_params() * 2.5)
        once = crisp_crystallize(net)
        twice = crisp_crystallize(once)
        assert np.array_equal(once.get_params(), twice.get_params())


def test_mse_examples():
    assert mse(single([1, 1], -1), AND) == 0
    assert mse(single([0, 0], 0), AND) == 0.25
    with pytest.raises(ValueError):
        mse(single([1, 1], -1), Dataset(np.zeros((0, 2)), [], ["x", "y"]))


def test_jacobian_single_neuron():
    d = Dataset([[0.6, 0.7]], [0.5], ["x", "y"])
    J = network_jacobian(single([1, 1], -1), d)
    assert J[0].tolist() == pytest.approx([-0.6, -0.7, -1.0])
    sat = Dataset([[0.9, 0.8]], [0.5], ["x", "y"])
    assert network_jacobian(single([1, 1], 0), sat).tolist() == [[0, 0, 0]]  # z = 1.7


def test_jacobian_shape():
    d = Dataset(np.random.default_rng(0).random((4, 2)), np.zeros(4), ["x", "y"])
    assert network_jacobian(single([0.2, 0.3], 0.1), d).shape == (4, 3)


def _interior(net, x, margin=1e-4):
    a = np.atleast_2d(x)
    for layer in net.layers:
        z = a @ layer.weights.T + layer.biases
        if np.any((z < margin) | (z > 1 - margin)):
            return False
        a = z
    return True


def test_jacobian_finite_differences():
    rng = np.random.default_rng(42)
    checked = 0
    eps = 1e-6
    while checked < 100:
        net = init_network(["a", "b", "c"], [3, 2], rng)
        net = net.with_params(net.get_params() * 0.4 + 0.15)
        x = rng.random((1, 3))
        if not _interior(net, x):
            continue
        d = Dataset(x, [0.5], net.input_names)
        J = network_jacobian(net, d)[0]
        theta = net.get_params()
        for q in range(theta.size):
            up, dn = theta.copy(), theta.copy()
            up[q] += eps
            dn[q] -= eps
            fd = -(net.with_params(up)(x)[0] - net.with_params(dn)(x)[0]) / (2 * eps)
            assert abs(J[q] - fd) <= 1e-5 * max(1.0, abs(fd))
        checked += 1


def test_jacobian_mask():
    d = Dataset([[0.6, 0.7]], [0.5], ["x", "y"])
    mask = np.array([True, False, True])
    assert network_jacobian(single([1, 1], -1), d, mask).tolist() == [[-0.6, -1.0]]


def test_lm_step_rejection_leaves_weights():
    net = single([1, 1], -1)  # already exact, nothing can improve
    out = lm_step(net, AND, 0.01)
    assert not out.accepted
    assert out.network is net
    assert np.array_equal(out.network.get_params(), net.get_params())
    assert out.mu == pytest.approx(0.1)


def test_lm_step_acceptance_decreases_mse():
    rng = np.random.default_rng(3)
    net = init_network(["x", "y"], [2], rng)
    cur = mse(net, AND)
    mu = 0.01
    for _ in range(30):
        out = lm_step(net, AND, mu, raw_fallback=True)
        if out.accepted:
            assert out.mse < cur
            assert out.mu == pytest.approx(max(mu / 10, 1e-12))
        else:
            assert out.mu == pytest.approx(min(mu * 10, 1e12))
        assert out.delta_after <= out.delta_before + 1e-12
        net, mu, cur = out.network, out.mu, out.mse


def test_lm_step_bad_mu():
    with pytest.raises(ValueError):
        lm_step(single([1, 1], -1), AND, 0.0)


def test_train_boolean_conjunction():
    found = 0
    for seed in range(10):
        net = init_network(["x", "y"], [], np.random.default_rng(seed))
        res = lm_train(net, AND, TrainConfig(mse_target=1e-4))
        if not res.converged:
            continue
        found += 1
        assert res.mse < 1e-4
        crisp = crisp_crystallize(res.network)
        assert crisp.layers[0].weights.tolist() == [[1, 1]]
        assert crisp.layers[0].biases.tolist() == [-1]
    assert found >= 3


def test_train_unreachable_target():
    rng = np.random.default_rng(0)
    x = rng.random((30, 2))
    d = Dataset(x, rng.random(30), ["x", "y"])
    res = lm_train(init_network(["x", "y"], [2], rng), d, TrainConfig(mse_target=1e-15, max_iters=60))
    assert not res.converged
    assert res.mse == pytest.approx(mse(res.network, d))


def test_train_history_and_determinism(tmp_path):
    cfg = TrainConfig(mse_target=1e-6, max_iters=80)

    def run():
        net = init_network(["x", "y"], [3], np.random.default_rng(9))
        return lm_train(net, AND, cfg)

    a, b = run(), run()
    assert a.history == b.history
    accepted = [h[1] for h in a.history if h[4]]
    assert all(later < earlier for earlier, later in zip(accepted, accepted[1:]))
    path = tmp_path / "h.csv"
    a.history_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,mse,delta,mu,accepted"
    assert len(lines) == len(a.history) + 1


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(mse_target=0)
    with pytest.raises(ValueError):
        TrainConfig(crystallization_exponent=0)
    assert TrainConfig().retries(6) == 11
    assert TrainConfig(retries_per_topology=3).retries(6) == 3


def _linear_toy():
    # a single neuron kept in its linear range, so J^T J is the exact Hessian
    rng = np.random.default_rng(4)
    x = rng.uniform(0.0, 1.0, (40, 4))
    w_true = np.array([0.05, 0.1, 0.02, 0.15])
    y = x @ w_true + 0.2 + rng.normal(0, 0.01, 40)
    A = np.hstack([x, np.ones((40, 1))])
    sol = np.linalg.lstsq(A, y, rcond=None)[0]
    net = Network(("a", "b", "c", "d"), [Layer([sol[:4]], [sol[4]])])
    return net, Dataset(x, y, net.input_names), A, y


def test_obs_saliency_matches_brute_force():
    net, d, A, y = _linear_toy()
    assert np.all((A @ net.get_params() > 0) & (A @ net.get_params() < 1))
    mask = np.ones(5, dtype=bool)
    sal, _ = saliencies(net, d, mask)
    base = 0.5 * np.sum((y - A @ net.get_params()) ** 2)
    brute = []
    for q in range(4):
        keep = [i for i in range(5) if i != q]
        sol = np.linalg.lstsq(A[:, keep], y, rcond=None)[0]
        brute.append(0.5 * np.sum((y - A[:, keep] @ sol) ** 2) - base)
    assert list(np.argsort(sal[:4])) == list(np.argsort(brute))
    assert sal[:4] == pytest.approx(brute, rel=1e-4)


def test_obs_zero_weight_pruned_first():
    net, d, _, _ = _linear_toy()
    theta = net.get_params()
    theta[2] = 0.0
    net = net.with_params(theta)
    before = mse(net, d)
    pruned, mask = obs_prune(net, d, TrainConfig(mse_target=before + 1e-15))
    assert not mask[2]
    assert abs(mse(pruned, d) - before) < 1e-12


def test_obs_never_adds_parameters():
    net, d, _, _ = _linear_toy()
    pruned, mask = obs_prune(net, d, TrainConfig(mse_target=0.01))
    assert mask.sum() <= 5
    assert np.all(pruned.get_params()[~mask] == 0)
    assert mse(pruned, d) <= 0.01
    # biases are never pruned by default
    assert mask[4]
