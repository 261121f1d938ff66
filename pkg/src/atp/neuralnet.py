"""Dense networks with hand-rolled reverse-mode gradients and Adam.

Everything is float64 numpy; no framework. Parameters are exposed as a flat
list of arrays (weights and biases interleaved) so the optimizer can update
a network in place and a gradient checker can walk individual entries.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, TrainingDiverged
from .validation import as_float_array

ACTIVATIONS = ("relu", "tanh", "identity")


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str

    def to_json(self):
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "activation": self.activation,
        }

    @classmethod
    def from_json(cls, obj):
        layer = cls(
            weights=np.asarray(obj["weights"], dtype=float),
            bias=np.asarray(obj["bias"], dtype=float),
            activation=obj["activation"],
        )
        if layer.activation not in ACTIVATIONS:
            raise ContractViolation(f"unknown activation {layer.activation!r}")
        return layer


@dataclass
class DenseNet:
    layers: list

    @property
    def input_dim(self):
        return self.layers[0].weights.shape[1]

    @property
    def output_dim(self):
        return self.layers[-1].weights.shape[0]

    def params(self):
        """Flat parameter list [W0, b0, W1, b1, ...] (live views)."""
        out = []
        for layer in self.layers:
            out.append(layer.weights)
            out.append(layer.bias)
        return out

    def to_json(self):
        return [layer.to_json() for layer in self.layers]

    @classmethod
    def from_json(cls, obj):
        net = cls(layers=[DenseLayer.from_json(rec) for rec in obj])
        for prev, nxt in zip(net.layers, net.layers[1:]):
            if nxt.weights.shape[1] != prev.weights.shape[0]:
                raise ContractViolation("layer dimensions do not chain")
        return net


def init_dense_net(layer_sizes, activations, rng):
    """Glorot-uniform initialized net; biases start at zero."""
    if len(activations) != len(layer_sizes) - 1:
        raise ContractViolation("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(layer_sizes, layer_sizes[1:], activations):
        if act not in ACTIVATIONS:
            raise ContractViolation(f"unknown activation {act!r}")
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(weights=weights, bias=np.zeros(fan_out), activation=act))
    return DenseNet(layers=layers)


def _apply_activation(act, z):
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(act, z, y):
    if act == "relu":
        return (z > 0.0).astype(float)
    if act == "tanh":
        return 1.0 - y * y
    return np.ones_like(z)


def net_forward(net, x):
    """Forward pass. Returns (output, cache) where cache feeds net_backward.

    Accepts a single vector or a (batch, input_dim) matrix.
    """
    x = as_float_array(x, "input")
    single = x.ndim == 1
    h = x[None, :] if single else x
    if h.shape[1] != net.input_dim:
        raise ContractViolation(
            f"input has {h.shape[1]} features, net expects {net.input_dim}"
        )
    cache = []
    for layer in net.layers:
        z = h @ layer.weights.T + layer.bias
        y = _apply_activation(layer.activation, z)
        cache.append((h, z, y))
        h = y
    return (h[0] if single else h), (cache, single)


def net_backward(net, saved, grad_out):
    """Backpropagate grad_out through a cached forward pass.

    Returns (param_grads, grad_input) with param_grads aligned to
    net.params(): [dW0, db0, dW1, db1, ...].
    """
    cache, single = saved
    grad = np.asarray(grad_out, dtype=float)
    if single:
        grad = grad[None, :]
    if grad.shape != cache[-1][2].shape:
        raise ContractViolation("grad_out shape does not match forward output")
    param_grads = [None] * (2 * len(net.layers))
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        h, z, y = cache[idx]
        dz = grad * _activation_grad(layer.activation, z, y)
        param_grads[2 * idx] = dz.T @ h
        param_grads[2 * idx + 1] = dz.sum(axis=0)
        grad = dz @ layer.weights
    return param_grads, (grad[0] if single else grad)


@dataclass
class AdamState:
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_adam(params, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
        step=0,
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
    )


def adam_step(state, params, grads):
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ContractViolation("params/grads do not match optimizer state")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged("non-finite gradient encountered")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


@dataclass
class GradcheckReport:
    max_rel_error: float
    n_checked: int
    tolerance: float
    worst: tuple  # (param index, flat entry index)

    @property
    def passed(self):
        return self.max_rel_error < self.tolerance


def gradcheck(params, loss_fn, tolerance=1e-4, n_checks=200, step=1e-5, rng=None):
    """Compare analytic gradients against central finite differences.

    loss_fn() must return (loss, grads) for the current parameter values and
    be deterministic (freeze any sampling noise before calling). Checks
    n_checks randomly chosen parameter entries.
    """
    rng = rng or np.random.default_rng(0)
    _, grads = loss_fn()
    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    picks = rng.choice(total, size=min(n_checks, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    max_rel = 0.0
    worst = (0, 0)
    for flat in picks:
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        i = int(flat - offsets[k])
        original = params[k].flat[i]
        params[k].flat[i] = original + step
        loss_plus, _ = loss_fn()
        params[k].flat[i] = original - step
        loss_minus, _ = loss_fn()
        params[k].flat[i] = original
        fd = (loss_plus - loss_minus) / (2.0 * step)
        an = grads[k].flat[i]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-4)
        if rel > max_rel:
            max_rel = rel
            worst = (k, i)
    return GradcheckReport(
        max_rel_error=float(max_rel), n_checked=len(picks), tolerance=tolerance, worst=worst
    )
