import numpy as np
import pytest

from irslink.errors import ContractError, ParameterError
from irslink.neural import AdamState, DenseNet, adam_step


def _fd_check(net, x, loss_grad, loss, h=1e-5, rtol=1e-4):
    """Compare backward() with central differences of ``loss(net(x))``."""
    out, cache = net.forward(x)
    grads, gx = net.backward(cache, loss_grad(out))
    worst = 0.0
    for p, g in zip(net.params(), grads):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + h
            up = loss(net(x))
            p[idx] = orig - h
            down = loss(net(x))
            p[idx] = orig
            fd = (up - down) / (2 * h)
            scale = max(abs(fd), abs(g[idx]), 1e-6)
            worst = max(worst, abs(fd - g[idx]) / scale)
    net.touch()
    return worst, gx


def test_forward_zero_network_gives_zero():
    net = DenseNet([3, 5, 2], ["tanh", "linear"])
    for p in net.params():
        p[...] = 0.0
    np.testing.assert_array_equal(net(np.array([1.0, -2.0, 3.0])), np.zeros(2))


def test_forward_single_tanh_unit_at_zero():
    net = DenseNet([1, 1], ["tanh"])
    net.weights[0][...] = 1.0
    net.biases[0][...] = 0.0
    assert net(np.zeros(1))[0] == 0.0


def test_forward_is_deterministic():
    net = DenseNet([4, 16, 4], ["tanh", "tanh"], np.random.default_rng(0))
    x = np.random.default_rng(1).normal(size=4)
    assert net(x).tobytes() == net(x).tobytes()


def test_forward_rejects_bad_width():
    net = DenseNet([4, 3], ["linear"])
    with pytest.raises(ParameterError):
        net(np.zeros(5))


def test_constructor_validation():
    with pytest.raises(ParameterError):
        DenseNet([4], [])
    with pytest.raises(ParameterError):
        DenseNet([4, 2], ["relu"])
    with pytest.raises(ParameterError):
        DenseNet([4, 2, 1], ["tanh"])


def test_linear_layer_weight_gradient_is_input():
    net = DenseNet([3, 1], ["linear"])
    x = np.array([0.5, -1.0, 2.0])
    _, cache = net.forward(x)
    grads, _ = net.backward(cache, np.ones(1))
    np.testing.assert_allclose(grads[0][:, 0], x)
    np.testing.assert_allclose(grads[1], [1.0])


def test_zero_upstream_gradient():
    net = DenseNet([4, 8, 3], ["tanh", "tanh"], np.random.default_rng(2))
    _, cache = net.forward(np.ones(4))
    grads, gx = net.backward(cache, np.zeros(3))
    assert all(np.all(g == 0) for g in grads)
    assert np.all(gx == 0)


def test_stale_cache_is_rejected():
    net = DenseNet([2, 2], ["tanh"])
    _, cache = net.forward(np.ones(2))
    net.touch()
    with pytest.raises(ContractError):
        net.backward(cache, np.ones(2))


@pytest.mark.parametrize(
    "dims,acts",
    [
        ([3, 6, 2], ["tanh", "linear"]),
        ([4, 8, 4], ["tanh", "tanh"]),
        ([5, 4, 4, 1], ["tanh", "tanh", "linear"]),
        ([2, 10, 3, 2], ["linear", "tanh", "tanh"]),
        ([8, 7, 1], ["tanh", "linear"]),
        ([1, 12, 2], ["tanh", "tanh"]),
    ],
)
def test_gradients_match_finite_differences(dims, acts):
    rng = np.random.default_rng(sum(dims))
    net = DenseNet(dims, acts, rng, output_scale=1.0)
    x = rng.normal(size=(5, dims[0]))
    target = rng.normal(size=(5, dims[-1]))
    loss = lambda out: 0.5 * float(np.sum((out - target) ** 2))
    worst, _ = _fd_check(net, x, lambda out: out - target, loss)
    assert worst < 1e-4


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = DenseNet([4, 6, 1], ["tanh", "linear"], rng, output_scale=1.0)
    x = rng.normal(size=4)
    _, cache = net.forward(x)
    _, gx = net.backward(cache, np.ones(1))
    h = 1e-6
    fd = [(net(x + h * e)[0] - net(x - h * e)[0]) / (2 * h) for e in np.eye(4)]
    np.testing.assert_allclose(gx, fd, rtol=1e-6)


def test_flat_gradients_match_list_layout():
    net = DenseNet([3, 5, 2], ["tanh", "tanh"], np.random.default_rng(4))
    _, cache = net.forward(np.ones((2, 3)))
    listed, _ = net.backward(cache, np.ones((2, 2)))
    flat, gx = net.backward(cache, np.ones((2, 2)), flat=True, input_grad=False)
    np.testing.assert_array_equal(flat, np.concatenate([g.ravel() for g in listed]))
    assert gx is None


def test_adam_zero_gradient_first_step_keeps_params():
    p = [np.array([1.0, -2.0])]
    adam_step(AdamState(0.1), p, [np.zeros(2)])
    np.testing.assert_array_equal(p[0], [1.0, -2.0])


def test_adam_constant_gradient_step_tends_to_learning_rate():
    state = AdamState(1e-3)
    p = [np.zeros(3)]
    g = [np.array([0.5, -2.0, 1e-3])]
    for _ in range(10_000):
        before = p[0].copy()
        adam_step(state, p, g)
    np.testing.assert_allclose(np.abs(p[0] - before), 1e-3, rtol=1e-3)


def test_adam_is_deterministic():
    def run():
        net = DenseNet([3, 4, 1], ["tanh", "linear"], np.random.default_rng(5))
        state = AdamState(1e-2)
        rng = np.random.default_rng(6)
        for _ in range(20):
            x = rng.normal(size=(8, 3))
            out, cache = net.forward(x)
            grads, _ = net.backward(cache, out)
            net.apply_adam(state, grads)
        return net.to_bytes()

    assert run() == run()


def test_adam_shape_mismatch():
    with pytest.raises(ParameterError):
        adam_step(AdamState(0.1), [np.zeros(2)], [np.zeros(3)])
    with pytest.raises(ParameterError):
        AdamState(0.0)


def test_soft_update_contracts_toward_source():
    a = DenseNet([3, 4, 2], ["tanh", "linear"], np.random.default_rng(7))
    b = DenseNet([3, 4, 2], ["tanh", "linear"], np.random.default_rng(8))
    before = np.linalg.norm(a.flat - b.flat)
    shapes = [p.shape for p in a.params()]
    a.soft_update(b, 0.25)
    assert [p.shape for p in a.params()] == shapes
    assert np.linalg.norm(a.flat - b.flat) == pytest.approx(0.75 * before, rel=1e-12)
    a.soft_update(b, 1.0)
    np.testing.assert_array_equal(a.flat, b.flat)
    with pytest.raises(ParameterError):
        a.soft_update(b, 1.5)


def test_copy_is_independent():
    a = DenseNet([2, 3, 1], ["tanh", "linear"], np.random.default_rng(9))
    b = a.copy()
    b.weights[0][0, 0] += 1.0
    assert a.weights[0][0, 0] != b.weights[0][0, 0]


def test_shared_layer_tracks_owner():
    actor = DenseNet([4, 6, 6, 4], ["tanh"] * 3, np.random.default_rng(10))
    critic = DenseNet([8, 6, 6, 1], ["tanh", "tanh", "linear"], np.random.default_rng(11))
    critic.share_layer(actor, 1, 1)
    actor.weights[1][0, 0] = 42.0
    assert critic.weights[1][0, 0] == 42.0
    with pytest.raises(ParameterError):
        critic.share_layer(actor, 0, 0)


def test_weight_file_round_trip(tmp_path):
    net = DenseNet([4, 5, 3], ["tanh", "linear"], np.random.default_rng(12))
    path = tmp_path / "net.bin"
    net.save(path)
    data = path.read_bytes()
    assert data[:8] == b"IRSNET1\x00"
    # header: magic, L, L + 1 widths, L activation codes
    assert len(data) == 8 + 4 + 4 * 3 + 2 + 8 * net.n_params()
    loaded = DenseNet.load(path)
    assert loaded.dims == net.dims and loaded.activations == net.activations
    np.testing.assert_array_equal(loaded.flat, net.flat)


def test_weight_file_rejects_corruption():
    data = DenseNet([2, 2], ["tanh"]).to_bytes()
    with pytest.raises(ParameterError):
        DenseNet.from_bytes(b"BADMAGIC" + data[8:])
    with pytest.raises(ParameterError):
        DenseNet.from_bytes(data[:-3])
    with pytest.raises(ParameterError):
        DenseNet.from_bytes(data + b"\x00")
