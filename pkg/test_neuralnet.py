"""
Tests for the NumPy network engine: gradient checks, spectral norm, Adam and checkpoints.
"""

import struct

import numpy as np
import pytest

from errors import ModelError, ShapeError
from neuralnet import (Adam, BatchNorm, Conv2D, Dense, Flatten, LeakyReLU, Sequential, Sigmoid, gradient_relative_error,
                       load_checkpoint, numerical_gradient, save_checkpoint, spectral_normalize)

TOLERANCE = 1e-5


def _check_layer(layer, x, rng, param_names):
    """Compare backward() against central differences of sum(forward(x) * R)."""
    out = layer.forward(x)
    weights = rng.normal(size=out.shape)

    def loss():
        return float(np.sum(layer.forward(x) * weights))

    layer.zero_grad()
    layer.forward(x)
    grad_x = layer.backward(weights)
    assert gradient_relative_error(grad_x, numerical_gradient(loss, x, 1e-6)) < TOLERANCE
    for name in param_names:
        numeric = numerical_gradient(loss, layer.params[name], 1e-6)
        assert gradient_relative_error(layer.grads[name], numeric) < TOLERANCE, name


def test_dense_gradients():
    rng = np.random.default_rng(0)
    layer = Dense(3, 4, rng, dtype=np.float64)
    layer.params['b'][:] = rng.normal(size=4)
    _check_layer(layer, rng.normal(size=(5, 3)), rng, ['W', 'b'])


def test_spectral_norm_dense_gradients():
    rng = np.random.default_rng(1)
    layer = Dense(4, 3, rng, dtype=np.float64, spectral_norm=True)
    x = rng.normal(size=(6, 4))
    layer.forward(x)
    layer.sn.update = False
    _check_layer(layer, x, rng, ['W', 'b'])


def test_conv_gradients():
    rng = np.random.default_rng(2)
    layer = Conv2D(2, 3, 3, rng, stride=2, padding=1, dtype=np.float64)
    x = rng.normal(size=(2, 2, 7, 6))
    assert layer.forward(x).shape == (2, 3) + layer.output_shape(7, 6)
    _check_layer(layer, x, rng, ['W', 'b'])


def test_spectral_norm_conv_gradients():
    rng = np.random.default_rng(3)
    layer = Conv2D(2, 2, 3, rng, stride=1, padding=1, dtype=np.float64, spectral_norm=True)
    x = rng.normal(size=(2, 2, 5, 4))
    layer.forward(x)
    layer.sn.update = False
    _check_layer(layer, x, rng, ['W', 'b'])


@pytest.mark.parametrize("shape", [(8, 3), (4, 3, 5, 4)])
def test_batchnorm_training_gradients(shape):
    rng = np.random.default_rng(4)
    layer = BatchNorm(3, dtype=np.float64)
    layer.params['gamma'][:] = rng.uniform(0.5, 1.5, 3)
    layer.params['beta'][:] = rng.normal(size=3)
    _check_layer(layer, rng.normal(size=shape), rng, ['gamma', 'beta'])


def test_batchnorm_eval_uses_running_stats():
    rng = np.random.default_rng(5)
    layer = BatchNorm(2, momentum=0.0, dtype=np.float64)
    x = rng.normal(loc=3.0, size=(50, 2))
    layer.forward(x)
    layer.training = False
    single = layer.forward(x[:1])
    expected = (x[:1] - x.mean(axis=0)) / np.sqrt(x.var(axis=0) + layer.eps)
    assert np.allclose(single, expected)
    _check_layer(layer, x[:4].copy(), rng, ['gamma', 'beta'])


def test_dense_trivial_weights():
    rng = np.random.default_rng(10)
    layer = Dense(3, 3, rng, dtype=np.float64)
    layer.params['W'][:] = np.eye(3)
    x = rng.normal(size=(4, 3))
    assert np.array_equal(layer.forward(x), x)

    layer.params['b'][:] = [0.5, -1.0, 2.0]
    assert np.array_equal(layer.forward(np.zeros((2, 3))), [[0.5, -1.0, 2.0]] * 2)


def test_conv_trivial_kernels():
    rng = np.random.default_rng(11)
    unit = Conv2D(1, 1, 1, rng, dtype=np.float64)
    unit.params['W'][:] = 1.0
    x = rng.normal(size=(2, 1, 4, 3))
    assert np.array_equal(unit.forward(x), x)

    box = Conv2D(1, 1, 3, rng, dtype=np.float64)
    box.params['W'][:] = 1.0
    out = box.forward(np.ones((1, 1, 5, 5)))
    assert out.shape == (1, 1, 3, 3)
    assert np.all(out == 9.0)


def test_batchnorm_standardizes_in_train_mode():
    rng = np.random.default_rng(12)
    layer = BatchNorm(3, dtype=np.float64)
    out = layer.forward(rng.normal(loc=[1.0, -4.0, 10.0], scale=[0.5, 2.0, 3.0], size=(64, 3)))
    assert out.mean(axis=0) == pytest.approx(np.zeros(3), abs=1e-9)
    assert out.var(axis=0) == pytest.approx(np.ones(3), abs=1e-4)


def test_batchnorm_eval_matches_train_on_its_own_statistics():
    rng = np.random.default_rng(13)
    layer = BatchNorm(2, dtype=np.float64)
    layer.params['gamma'][:] = [2.0, 0.5]
    layer.params['beta'][:] = [0.1, -0.3]
    x = rng.normal(loc=2.0, size=(3, 2, 4, 4))
    layer.update_running = False
    trained = layer.forward(x)
    layer.buffers['running_mean'] = x.mean(axis=(0, 2, 3))
    layer.buffers['running_var'] = x.var(axis=(0, 2, 3))
    layer.training = False
    assert np.allclose(layer.forward(x), trained)


def test_sequential_gradients_through_activations():
    rng = np.random.default_rng(6)
    net = Sequential([
        Conv2D(1, 2, 3, rng, stride=2, padding=1, dtype=np.float64), LeakyReLU(0.2), Flatten(),
        Dense(2 * 3 * 2, 3, rng, dtype=np.float64), Sigmoid(),
    ])
    x = rng.normal(size=(3, 1, 6, 4))
    out = net.forward(x)
    weights = rng.normal(size=out.shape)

    def loss():
        return float(np.sum(net.forward(x) * weights))

    net.zero_grad()
    net.forward(x)
    net.backward(weights)
    for name, p, g in net.named_parameters():
        assert gradient_relative_error(g, numerical_gradient(loss, p, 1e-6)) < TOLERANCE, name


def test_spectral_normalize_converges_to_largest_singular_value():
    rng = np.random.default_rng(7)
    w = rng.normal(size=(5, 8))
    u = rng.normal(size=5)
    w_sn, _, _, sigma = spectral_normalize(w, u / np.linalg.norm(u), n_iterations=200)
    assert sigma == pytest.approx(np.linalg.svd(w, compute_uv=False)[0], rel=1e-6)
    assert np.linalg.svd(w_sn, compute_uv=False)[0] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("w, sigma", [
    (np.diag([3.0, 1.0]), 3.0),
    (np.array([[0.6, -0.8], [0.8, 0.6]]), 1.0),
])
def test_spectral_normalize_known_matrices(w, sigma):
    _, _, _, estimate = spectral_normalize(w, np.array([0.6, 0.8]), n_iterations=100)
    assert estimate == pytest.approx(sigma, rel=1e-6)


def test_sigmoid_is_finite_for_large_inputs():
    out = Sigmoid().forward(np.array([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(out))
    assert out.tolist() == pytest.approx([0.0, 0.5, 1.0])


def test_shape_and_finiteness_errors():
    rng = np.random.default_rng(8)
    with pytest.raises(ShapeError):
        Dense(3, 2, rng).forward(np.zeros((4, 5), dtype=np.float32))
    with pytest.raises(ShapeError):
        Conv2D(1, 1, 3, rng).forward(np.zeros((1, 1, 2, 2), dtype=np.float32))
    with pytest.raises(ModelError):
        Sequential([Dense(2, 2, rng)]).forward(np.array([[np.inf, 0.0]], dtype=np.float32))


def test_adam_first_step_moves_by_learning_rate():
    params = {'w': np.array([1.0, -1.0, 0.5])}
    grads = {'w': np.array([0.3, -2.0, 0.0])}
    opt = Adam(lr=0.01)
    opt.step(params, grads)
    assert params['w'] == pytest.approx([0.99, -0.99, 0.5], abs=1e-6)
    assert opt.t == 1


def test_adam_ignores_zero_gradients():
    params = {'w': np.array([1.5, -0.25])}
    opt = Adam(lr=0.1)
    for _ in range(3):
        opt.step(params, {'w': np.zeros(2)})
    assert params['w'].tolist() == [1.5, -0.25]


def test_adam_minimizes_quadratic():
    params = {'w': np.array([3.0, -2.0])}
    opt = Adam(lr=0.05, beta1=0.9)
    for _ in range(500):
        opt.step(params, {'w': 2.0 * params['w']})
    assert np.abs(params["w"]).max() < 0.1


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    tensors = {'a.W': rng.normal(size=(3, 2)).astype(np.float32), 'a.b': np.zeros(2, np.float32)}
    optimizer = {'m.a.W': np.ones((3, 2), np.float32)}
    path = tmp_path / "model.ckpt"
    save_checkpoint(str(path), tensors, {'seed': 3}, optimizer, optimizer_step=17)

    loaded, meta, opt_state, step = load_checkpoint(str(path))
    assert meta == {'seed': 3}
    assert step == 17
    assert np.array_equal(loaded['a.W'], tensors['a.W'])
    assert np.array_equal(opt_state['m.a.W'], optimizer['m.a.W'])


def test_checkpoint_layout(tmp_path):
    tensors = {'b': np.arange(3, dtype=np.float32), 'a': np.ones((2, 2), np.float32)}
    path = tmp_path / "layout.ckpt"
    save_checkpoint(str(path), tensors, {'fold': 1})
    blob = path.read_bytes()

    assert blob[:8] == b"CGANPLAN"
    assert struct.unpack_from('<II', blob, 8) == (2, 2)
    assert struct.unpack_from('<I', blob, 16) == (1,)
    assert blob[20:21] == b"a"
    meta = b'{"fold": 1}'
    assert blob.endswith(struct.pack('<I', len(meta)) + meta)
    assert blob[-len(meta) - 5:-len(meta) - 4] == b"\x00"


def test_corrupt_checkpoint(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"garbage")
    with pytest.raises(ModelError):
        load_checkpoint(str(path))
    with pytest.raises(ModelError):
        load_checkpoint(str(tmp_path / "missing.ckpt"))

    good = tmp_path / "good.ckpt"
    save_checkpoint(str(good), {'x': np.ones(4, np.float32)}, {})
    good.write_bytes(good.read_bytes()[:-6])
    with pytest.raises(ModelError):
        load_checkpoint(str(good))
