"""
Small NumPy network engine with explicit backpropagation.

Layers keep their own forward cache and accumulate parameter gradients in
``grads`` until ``zero_grad`` is called. Parameters are float32; any model
can be copied to float64 with ``astype`` for finite-difference checks.

Contents:
    - Layers: Dense, Conv2D, BatchNorm, LeakyReLU, Sigmoid, Flatten, Sequential
    - spectral_normalize / SpectralNorm: power-iteration weight normalization
    - Adam: adaptive-moment optimizer with bias correction
    - save_checkpoint / load_checkpoint: versioned little-endian tensor files
    - numerical_gradient / gradient_relative_error: gradient-check helpers

Checkpoint layout, all integers little-endian u32 unless noted:
    magic "CGANPLAN", version,
    tensor table: count, then per tensor name length, UTF-8 name, rank, dims, float32 data,
    optimizer flag (u8); when set, Adam step and a second tensor table of moments,
    metadata: JSON length and sorted-key JSON, ending the file.
"""

import copy
import json
import logging
import math
import struct
from typing import Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

from errors import ModelError, ShapeError, UsageError

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"CGANPLAN"
CHECKPOINT_VERSION = 2


class Layer:
    """Base layer: named parameters, their gradients, and non-trainable buffers."""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        self.training = True

    def forward(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def zero_grad(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    def astype(self, dtype):
        clone = copy.deepcopy(self)
        clone._cast(dtype)
        return clone

    def _cast(self, dtype):
        for store in (self.params, self.grads, self.buffers):
            for name in store:
                store[name] = store[name].astype(dtype)


def spectral_normalize(w: np.ndarray, u: np.ndarray, n_iterations: int = 1,
                       eps: float = 1e-12) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """Power-iteration estimate of the largest singular value of ``w``.

    ``w`` is viewed as (out, rest). Returns (w / sigma, u, v, sigma).
    """
    mat = w.reshape(w.shape[0], -1)
    v = None
    for _ in range(max(1, n_iterations)):
        v = mat.T @ u
        v = v / (np.linalg.norm(v) + eps)
        u = mat @ v
        u = u / (np.linalg.norm(u) + eps)
    sigma = float(u @ mat @ v)
    return w / sigma, u, v, sigma


class SpectralNorm:
    """Holds the power-iteration vectors for one weight and backpropagates through w / sigma."""

    def __init__(self, out_features: int, rng: np.random.Generator, dtype=np.float32):
        u = rng.normal(size=out_features)
        self.u = (u / np.linalg.norm(u)).astype(dtype)
        self.v: Optional[np.ndarray] = None
        self.sigma = 1.0
        self.update = True

    def normalize(self, w: np.ndarray) -> np.ndarray:
        if self.update or self.v is None:
            w_sn, u, v, sigma = spectral_normalize(w, self.u)
            self.u, self.v, self.sigma = u.astype(w.dtype), v.astype(w.dtype), sigma
            return w_sn
        mat = w.reshape(w.shape[0], -1)
        self.sigma = float(self.u @ mat @ self.v)
        return w / self.sigma

    def backward(self, grad_w_sn: np.ndarray, w: np.ndarray) -> np.ndarray:
        # u, v are treated as constants: d(w/sigma) with sigma = u^T w v
        outer = np.outer(self.u, self.v).reshape(w.shape)
        return grad_w_sn / self.sigma - (np.sum(grad_w_sn * w) / self.sigma ** 2) * outer


def _cast_spectral_norm(layer, dtype):
    if layer.sn is not None:
        layer.sn.u = layer.buffers["sn_u"]
        if layer.sn.v is not None:
            layer.sn.v = layer.sn.v.astype(dtype)


class Dense(Layer):
    """y = x W^T + b, optionally with a spectrally normalized W."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 dtype=np.float32, spectral_norm: bool = False):
        super().__init__()
        limit = 1.0 / math.sqrt(in_features)
        self.params['W'] = rng.uniform(-limit, limit, (out_features, in_features)).astype(dtype)
        self.params['b'] = np.zeros(out_features, dtype=dtype)
        self.sn = SpectralNorm(out_features, rng, dtype) if spectral_norm else None
        if self.sn is not None:
            self.buffers['sn_u'] = self.sn.u
        self._x = None
        self._w_eff = None
        self.zero_grad()

    def effective_weight(self) -> np.ndarray:
        if self.sn is None:
            return self.params['W']
        w = self.sn.normalize(self.params['W'])
        self.buffers['sn_u'] = self.sn.u
        return w

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.params['W'].shape[1]:
            raise ShapeError(f"dense expects (N, {self.params['W'].shape[1]}), got {x.shape}")
        self._x = x
        self._w_eff = self.effective_weight()
        return x @ self._w_eff.T + self.params['b']

    def backward(self, grad):
        grad_w_eff = grad.T @ self._x
        if self.sn is not None:
            self.grads['W'] += self.sn.backward(grad_w_eff, self.params['W'])
        else:
            self.grads['W'] += grad_w_eff
        self.grads['b'] += grad.sum(axis=0)
        return grad @ self._w_eff

    def _cast(self, dtype):
        super()._cast(dtype)
        _cast_spectral_norm(self, dtype)


class Conv2D(Layer):
    """Cross-correlation over (N, C, H, W) inputs with square kernels."""

    def __init__(self, in_channels: int, out_channels: int, kernel: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, dtype=np.float32, spectral_norm: bool = False):
        super().__init__()
        fan_in = in_channels * kernel * kernel
        limit = 1.0 / math.sqrt(fan_in)
        self.params['W'] = rng.uniform(-limit, limit, (out_channels, in_channels, kernel, kernel)).astype(dtype)
        self.params['b'] = np.zeros(out_channels, dtype=dtype)
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        self.sn = SpectralNorm(out_channels, rng, dtype) if spectral_norm else None
        if self.sn is not None:
            self.buffers['sn_u'] = self.sn.u
        self._xp = None
        self._in_shape = None
        self._w_eff = None
        self.zero_grad()

    def output_shape(self, h: int, w: int) -> Tuple[int, int]:
        k, s, p = self.kernel, self.stride, self.padding
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def _window(self, ki, kj, ho, wo):
        s = self.stride
        return (slice(None), slice(None),
                slice(ki, ki + s * (ho - 1) + 1, s),
                slice(kj, kj + s * (wo - 1) + 1, s))

    def forward(self, x):
        out_ch, in_ch = self.params['W'].shape[:2]
        if x.ndim != 4 or x.shape[1] != in_ch:
            raise ShapeError(f"conv expects (N, {in_ch}, H, W), got {x.shape}")
        ho, wo = self.output_shape(x.shape[2], x.shape[3])
        if ho < 1 or wo < 1:
            raise ShapeError(f"input {x.shape[2:]} too small for kernel {self.kernel}")

        p = self.padding
        self._in_shape = x.shape
        self._xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        if self.sn is not None:
            self._w_eff = self.sn.normalize(self.params['W'])
            self.buffers['sn_u'] = self.sn.u
        else:
            self._w_eff = self.params['W']

        out = np.zeros((x.shape[0], out_ch, ho, wo), dtype=x.dtype)
        for ki in range(self.kernel):
            for kj in range(self.kernel):
                patch = self._xp[self._window(ki, kj, ho, wo)]
                out += np.einsum('nchw,oc->nohw', patch, self._w_eff[:, :, ki, kj])
        return out + self.params['b'][None, :, None, None]

    def backward(self, grad):
        ho, wo = grad.shape[2:]
        grad_w_eff = np.zeros_like(self._w_eff)
        grad_xp = np.zeros_like(self._xp)
        for ki in range(self.kernel):
            for kj in range(self.kernel):
                window = self._window(ki, kj, ho, wo)
                grad_w_eff[:, :, ki, kj] = np.einsum('nohw,nchw->oc', grad, self._xp[window])
                grad_xp[window] += np.einsum('nohw,oc->nchw', grad, self._w_eff[:, :, ki, kj])

        if self.sn is not None:
            self.grads['W'] += self.sn.backward(grad_w_eff, self.params['W'])
        else:
            self.grads['W'] += grad_w_eff
        self.grads['b'] += grad.sum(axis=(0, 2, 3))

        p = self.padding
        h, w = self._in_shape[2:]
        return grad_xp[:, :, p:p + h, p:p + w] if p else grad_xp

    def _cast(self, dtype):
        super()._cast(dtype)
        _cast_spectral_norm(self, dtype)


class BatchNorm(Layer):
    """Batch normalization over the feature axis of (N, F) or the channel axis of (N, C, H, W)."""

    def __init__(self, num_features: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.params['gamma'] = np.ones(num_features, dtype=dtype)
        self.params['beta'] = np.zeros(num_features, dtype=dtype)
        self.buffers['running_mean'] = np.zeros(num_features, dtype=dtype)
        self.buffers['running_var'] = np.ones(num_features, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.update_running = True
        self._cache = None
        self.zero_grad()

    @staticmethod
    def _layout(x):
        if x.ndim == 2:
            return (0,), (1, -1)
        if x.ndim == 4:
            return (0, 2, 3), (1, -1, 1, 1)
        raise ShapeError(f"batchnorm expects 2-D or 4-D input, got {x.shape}")

    def forward(self, x):
        axes, shape = self._layout(x)
        if x.shape[1] != self.params['gamma'].shape[0]:
            raise ShapeError(f"batchnorm expects {self.params['gamma'].shape[0]} features, got {x.shape[1]}")
        gamma = self.params['gamma'].reshape(shape)
        beta = self.params['beta'].reshape(shape)

        if self.training:
            if x.shape[0] < 2:
                raise UsageError("batchnorm in train mode needs a batch of at least 2")
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            if self.update_running:
                m = self.momentum
                self.buffers['running_mean'] = (m * self.buffers['running_mean'] + (1 - m) * mean).astype(x.dtype)
                self.buffers['running_var'] = (m * self.buffers['running_var'] + (1 - m) * var).astype(x.dtype)
        else:
            mean = self.buffers['running_mean']
            var = self.buffers['running_var']

        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        self._cache = (x_hat, inv_std, axes, shape, self.training)
        return gamma * x_hat + beta

    def backward(self, grad):
        x_hat, inv_std, axes, shape, training = self._cache
        self.grads['gamma'] += np.sum(grad * x_hat, axis=axes)
        self.grads['beta'] += np.sum(grad, axis=axes)
        g_hat = grad * self.params['gamma'].reshape(shape)
        if not training:
            return g_hat * inv_std.reshape(shape)

        m = grad.size / grad.shape[1]
        sum_g = np.sum(g_hat, axis=axes).reshape(shape)
        sum_gx = np.sum(g_hat * x_hat, axis=axes).reshape(shape)
        return inv_std.reshape(shape) / m * (m * g_hat - sum_g - x_hat * sum_gx)


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.2):
        super().__init__()
        self.slope = slope
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, grad):
        return np.where(self._mask, grad, self.slope * grad)


class Sigmoid(Layer):
    def __init__(self):
        super().__init__()
        self._y = None

    def forward(self, x):
        # split by sign to keep exp() from overflowing
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        self._y = out
        return out

    def backward(self, grad):
        return grad * self._y * (1.0 - self._y)


class Flatten(Layer):
    def __init__(self):
        super().__init__()
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Sequential(Layer):
    """Runs layers in order; names parameters '<index>.<param>'."""

    def __init__(self, layers: List[Layer], check_finite: bool = True):
        super().__init__()
        self.layers = layers
        self.check_finite = check_finite

    def forward(self, x):
        for i, layer in enumerate(self.layers):
            x = layer.forward(x)
            if self.check_finite and not np.all(np.isfinite(x)):
                raise ModelError(f"non-finite activations after layer {i} ({type(layer).__name__})")
        return x

    def backward(self, grad):
        for layer in reversed(self.layers):
            grad = layer.backward(grad)
        return grad

    def zero_grad(self):
        for layer in self.layers:
            layer.zero_grad()

    def set_training(self, training: bool):
        for layer in self.layers:
            layer.training = training

    def set_power_iteration(self, enabled: bool):
        for layer in self.layers:
            if getattr(layer, 'sn', None) is not None:
                layer.sn.update = enabled

    def set_running_updates(self, enabled: bool):
        for layer in self.layers:
            if isinstance(layer, BatchNorm):
                layer.update_running = enabled

    def recalibrate(self, x: np.ndarray):
        """Set every BatchNorm's running statistics to the exact statistics of ``x``.

        One train-mode pass with momentum 0, so each BatchNorm sees the same
        normalized input it would see in a batch drawn from ``x``. Leaves the
        section in inference mode.
        """
        if len(x) < 2:
            x = np.concatenate([x, x])
        norms = [layer for layer in self.layers if isinstance(layer, BatchNorm)]
        saved = [(layer.momentum, layer.update_running) for layer in norms]
        for layer in norms:
            layer.momentum, layer.update_running = 0.0, True
        self.set_training(True)
        try:
            self.forward(x)
        finally:
            for layer, (momentum, update) in zip(norms, saved):
                layer.momentum, layer.update_running = momentum, update
            self.set_training(False)

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, np.ndarray, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, p in layer.params.items():
                yield f"{prefix}{i}.{name}", p, layer.grads[name]

    def named_buffers(self, prefix: str = '') -> Iterator[Tuple[str, np.ndarray]]:
        for i, layer in enumerate(self.layers):
            for name, b in layer.buffers.items():
                yield f"{prefix}{i}.{name}", b

    def state_dict(self, prefix: str = '') -> Dict[str, np.ndarray]:
        state = {name: p for name, p, _ in self.named_parameters(prefix)}
        state.update(dict(self.named_buffers(prefix)))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], prefix: str = ''):
        for i, layer in enumerate(self.layers):
            for store in (layer.params, layer.buffers):
                for name in list(store):
                    key = f"{prefix}{i}.{name}"
                    if key not in state:
                        raise ModelError(f"checkpoint is missing tensor {key}")
                    if state[key].shape != store[name].shape:
                        raise ModelError(f"tensor {key}: shape {state[key].shape} != {store[name].shape}")
                    store[name] = state[key].astype(store[name].dtype).copy()
            if getattr(layer, 'sn', None) is not None:
                layer.sn.u = layer.buffers['sn_u']
                layer.sn.v = None

    def _cast(self, dtype):
        for layer in self.layers:
            layer._cast(dtype)


class Adam:
    """Adaptive-moment optimizer over a dict of named arrays, updated in place."""

    def __init__(self, lr: float = 2e-4, beta1: float = 0.5, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray]):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            if g.shape != p.shape:
                raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
            m = self.m.setdefault(name, np.zeros_like(p))
            v = self.v.setdefault(name, np.zeros_like(p))
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)).astype(p.dtype)

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {f"m.{k}": v for k, v in self.m.items()}
        state.update({f"v.{k}": v for k, v in self.v.items()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray], step: int):
        self.t = step
        self.m = {k[2:]: v.copy() for k, v in state.items() if k.startswith('m.')}
        self.v = {k[2:]: v.copy() for k, v in state.items() if k.startswith('v.')}


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], optimizer: Adam):
    optimizer.step(params, grads)
    return params


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _write_table(f, tensors: Dict[str, np.ndarray]):
    f.write(struct.pack('<I', len(tensors)))
    for name in sorted(tensors):
        data = np.ascontiguousarray(tensors[name], dtype='<f4')
        encoded = name.encode('utf-8')
        f.write(struct.pack('<I', len(encoded)))
        f.write(encoded)
        f.write(struct.pack('<I', data.ndim))
        f.write(struct.pack(f'<{data.ndim}I', *data.shape))
        f.write(data.tobytes())


def _read_table(blob: bytes, offset: int) -> Tuple[Dict[str, np.ndarray], int]:
    (count,) = struct.unpack_from('<I', blob, offset)
    offset += 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from('<I', blob, offset)
        offset += 4
        name = blob[offset:offset + name_len].decode('utf-8')
        offset += name_len
        (rank,) = struct.unpack_from('<I', blob, offset)
        offset += 4
        dims = struct.unpack_from(f'<{rank}I', blob, offset)
        offset += 4 * rank
        size = int(np.prod(dims)) if rank else 1
        tensors[name] = np.frombuffer(blob, dtype='<f4', count=size, offset=offset).reshape(dims).copy()
        offset += 4 * size
    return tensors, offset


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray], metadata: Dict,
                    optimizer_state: Optional[Dict[str, np.ndarray]] = None, optimizer_step: int = 0):
    meta = json.dumps(metadata, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack('<I', CHECKPOINT_VERSION))
        _write_table(f, tensors)
        if optimizer_state is None:
            f.write(struct.pack('<B', 0))
        else:
            f.write(struct.pack('<BI', 1, optimizer_step))
            _write_table(f, optimizer_state)
        f.write(struct.pack('<I', len(meta)))
        f.write(meta)
    logger.info(f"Checkpoint written: {path} ({len(tensors)} tensors)")


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], Dict, Optional[Dict[str, np.ndarray]], int]:
    """Returns (tensors, metadata, optimizer_state or None, optimizer_step)."""
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise ModelError(f"cannot read checkpoint {path}: {e}")
    if blob[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ModelError(f"{path} is not a checkpoint (bad magic)")

    try:
        offset = len(CHECKPOINT_MAGIC)
        (version,) = struct.unpack_from('<I', blob, offset)
        if version != CHECKPOINT_VERSION:
            raise ModelError(f"unsupported checkpoint version {version}")
        tensors, offset = _read_table(blob, offset + 4)
        (has_optimizer,) = struct.unpack_from('<B', blob, offset)
        offset += 1
        optimizer_state, step = None, 0
        if has_optimizer:
            (step,) = struct.unpack_from('<I', blob, offset)
            optimizer_state, offset = _read_table(blob, offset + 4)
        (meta_len,) = struct.unpack_from('<I', blob, offset)
        offset += 4
        if offset + meta_len != len(blob):
            raise ModelError(f"corrupt checkpoint {path}: metadata block does not end the file")
        metadata = json.loads(blob[offset:].decode('utf-8'))
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise ModelError(f"corrupt checkpoint {path}: {e}")
    return tensors, metadata, optimizer_state, step


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------

def numerical_gradient(f: Callable[[], float], x: np.ndarray, eps: float = 1e-3) -> np.ndarray:
    """Central differences of the scalar ``f()`` with respect to ``x`` (perturbed in place)."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=['multi_index'])
    for _ in it:
        idx = it.multi_index
        original = x[idx]
        x[idx] = original + eps
        plus = f()
        x[idx] = original - eps
        minus = f()
        x[idx] = original
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def gradient_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    return float(np.max(np.abs(analytic - numeric)) / (np.max(np.abs(analytic)) + 1e-8))
