"""Small dense networks with exact reverse-mode gradients and Adam.

Inputs are row vectors; a batch is a 2-D array with one sample per row.

Weight file layout (all integers little-endian):

    bytes 0-7    magic  b"IRSNET1\\0"
    uint32       L, the number of layers
    uint32 x L+1 layer widths, input first
    uint8  x L   activation codes (0 = linear, 1 = tanh)
    float64 LE   parameters, layer by layer: weight matrix (in x out,
                 row-major) followed by the bias vector
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParameterError

MAGIC = b"IRSNET1\x00"
ACTIVATIONS = ("linear", "tanh")


@dataclass
class ForwardCache:
    inputs: list
    outputs: list
    version: int
    batched: bool


class DenseNet:
    """Feed-forward stack of affine layers, each followed by tanh or identity.

    ``version`` increments whenever parameters change so stale caches can be
    detected in :meth:`backward`.
    """

    def __init__(self, dims, activations, rng=None, output_scale: float = 1e-3, dtype=np.float64):
        dims = [int(d) for d in dims]
        activations = list(activations)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ParameterError("need at least input and output widths, all positive")
        if len(activations) != len(dims) - 1:
            raise ParameterError("one activation per layer required")
        for act in activations:
            if act not in ACTIVATIONS:
                raise ParameterError(f"unknown activation {act!r}")
        self.dims = dims
        self.activations = activations
        self.dtype = np.dtype(dtype)
        self.version = 0
        self._bind(np.empty(self._layout_size(), dtype=self.dtype))
        rng = rng if rng is not None else np.random.default_rng(0)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            bound = 1.0 / np.sqrt(w.shape[0])
            if i == len(self.weights) - 1:
                bound *= output_scale
            w[...] = rng.uniform(-bound, bound, w.shape)
            b[...] = rng.uniform(-bound, bound, b.shape)

    def _layout_size(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.dims[:-1], self.dims[1:]))

    def _views(self, flat: np.ndarray) -> list:
        out, offset = [], 0
        for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]):
            out.append(flat[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out))
            offset += fan_in * fan_out
            out.append(flat[offset : offset + fan_out])
            offset += fan_out
        return out

    def _bind(self, flat: np.ndarray):
        # all parameters live in one contiguous buffer unless layers are shared
        self.flat = flat
        views = self._views(flat)
        self.weights = views[0::2]
        self.biases = views[1::2]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def params(self) -> list:
        """Parameter arrays in file order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def touch(self):
        """Mark parameters as modified."""
        self.version += 1

    def forward(self, x):
        """Return the network output and the cache needed by :meth:`backward`."""
        x = np.asarray(x, dtype=self.dtype)
        batched = x.ndim == 2
        if x.ndim not in (1, 2) or x.shape[-1] != self.dims[0]:
            raise ParameterError(f"expected input width {self.dims[0]}, got shape {x.shape}")
        h = x if batched else x[None, :]
        inputs, outputs = [], []
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(h)
            h = h @ w + b
            if act == "tanh":
                h = np.tanh(h)
            outputs.append(h)
        out = h if batched else h[0]
        return out, ForwardCache(inputs, outputs, self.version, batched)

    def __call__(self, x):
        return self.forward(x)[0]

    def backward(
        self,
        cache: ForwardCache,
        grad_out,
        param_grads: bool = True,
        flat: bool = False,
        input_grad: bool = True,
    ):
        """Gradients of a scalar loss given ``grad_out = dLoss/dOutput``.

        Returns ``(grads, grad_input)``. ``grads`` matches :meth:`params`, or is
        one vector in the layout of :attr:`flat` when ``flat`` is set, or None
        when ``param_grads`` is False. ``grad_input`` is None when
        ``input_grad`` is False.
        """
        if cache.version != self.version:
            raise ContractError("forward cache is stale: parameters changed since it was built")
        g = np.asarray(grad_out, dtype=self.dtype)
        if not cache.batched:
            g = g[None, :]
        if g.shape != cache.outputs[-1].shape:
            raise ParameterError("upstream gradient shape does not match the output")
        grad_flat = None
        if param_grads:
            grad_flat = np.empty(self._layout_size(), dtype=self.dtype)
            grads = self._views(grad_flat)
        for i in range(self.n_layers - 1, -1, -1):
            if self.activations[i] == "tanh":
                y = cache.outputs[i]
                g = g * (1.0 - y * y)
            if param_grads:
                np.matmul(cache.inputs[i].T, g, out=grads[2 * i])
                np.sum(g, axis=0, out=grads[2 * i + 1])
            if i > 0 or input_grad:
                g = g @ self.weights[i].T
        if not input_grad:
            grad_x = None
        else:
            grad_x = g if cache.batched else g[0]
        if not param_grads:
            return None, grad_x
        return (grad_flat if flat else grads), grad_x

    def copy(self) -> "DenseNet":
        """Independent copy; shared layers become private in the copy."""
        clone = DenseNet.__new__(DenseNet)
        clone.dims = list(self.dims)
        clone.activations = list(self.activations)
        clone.dtype = self.dtype
        clone.version = 0
        clone._bind(np.concatenate([p.ravel() for p in self.params()]))
        return clone

    def copy_from(self, source: "DenseNet"):
        """Overwrite parameters in place with those of ``source``."""
        self._check_same_shape(source)
        for dst, src in zip(self.params(), source.params()):
            np.copyto(dst, src)
        self.touch()

    def soft_update(self, source: "DenseNet", tau: float):
        """Blend parameters toward ``source``: ``p <- tau * p_src + (1 - tau) * p``."""
        if not 0.0 <= tau <= 1.0:
            raise ParameterError("tau must lie in [0, 1]")
        self._check_same_shape(source)
        for dst, src in zip(self.params(), source.params()):
            dst *= 1.0 - tau
            dst += tau * src
        self.touch()

    def share_layer(self, other: "DenseNet", index: int, other_index: int):
        """Make layer ``index`` use the very arrays of ``other``'s layer."""
        if self.weights[index].shape != other.weights[other_index].shape:
            raise ParameterError("shared layers must have identical shapes")
        self.weights[index] = other.weights[other_index]
        self.biases[index] = other.biases[other_index]
        self.flat = None
        self.touch()

    def apply_adam(self, state: "AdamState", grads):
        """Adam step on this network's parameters; ``grads`` as from :meth:`backward`."""
        if self.flat is not None and isinstance(grads, np.ndarray):
            adam_step(state, [self.flat], [grads])
        else:
            if isinstance(grads, np.ndarray):
                grads = self._views(grads)
            adam_step(state, self.params(), grads)
        self.touch()

    def _check_same_shape(self, other: "DenseNet"):
        if self.dims != other.dims or self.activations != other.activations:
            raise ParameterError("network architectures differ")

    def to_bytes(self) -> bytes:
        header = MAGIC + struct.pack(f"<I{len(self.dims)}I", self.n_layers, *self.dims)
        header += bytes(ACTIVATIONS.index(a) for a in self.activations)
        body = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in self.params())
        return header + body

    @classmethod
    def from_bytes(cls, data: bytes, dtype=np.float64) -> "DenseNet":
        if data[:8] != MAGIC:
            raise ParameterError("not a network weight file")
        (n_layers,) = struct.unpack_from("<I", data, 8)
        offset = 12
        dims = list(struct.unpack_from(f"<{n_layers + 1}I", data, offset))
        offset += 4 * (n_layers + 1)
        codes = data[offset : offset + n_layers]
        offset += n_layers
        if any(c >= len(ACTIVATIONS) for c in codes):
            raise ParameterError("unknown activation code in weight file")
        net = cls(dims, [ACTIVATIONS[c] for c in codes], dtype=dtype)
        for p in net.params():
            n_bytes = 8 * p.size
            chunk = data[offset : offset + n_bytes]
            if len(chunk) != n_bytes:
                raise ParameterError("weight file is truncated")
            p[...] = np.frombuffer(chunk, dtype="<f8").reshape(p.shape)
            offset += n_bytes
        if offset != len(data):
            raise ParameterError("trailing bytes in weight file")
        return net

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if not self.lr > 0:
            raise ParameterError("learning rate must be positive")


def adam_step(state: AdamState, params: list, grads: list) -> list:
    """One bias-corrected Adam descent step, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ParameterError("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    step_size = state.lr / corr1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or p.shape != m.shape:
            raise ParameterError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= step_size * m / (np.sqrt(v / corr2) + state.eps)
    return params
