"""Minimal deterministic NN layers with explicit forward caches and exact
reverse-mode gradients. Double precision throughout; no implicit global RNG —
dropout masks come from generators keyed by (seed, epoch, batch, stream).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class LayerSpec:
    """Declarative layer description used by the factory and checkpoints."""

    kind: str                      # dense | lstm | batchnorm | dropout | relu | sigmoid
    dims: tuple = ()               # kind-specific sizes
    rate: float = 0.0              # dropout rate
    momentum: float = 0.1          # batchnorm running-stat momentum

    def __post_init__(self):
        if any(d <= 0 for d in self.dims):
            raise ValueError("layer dims must be strictly positive")
        if not 0.0 <= self.rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")


class DropoutStreams:
    """Deterministic per-layer RNG streams for dropout masks.

    One instance is created per (seed, epoch, batch); each dropout layer pulls
    its own stream by id, so masks are reproducible and order-independent.
    """

    def __init__(self, *key):
        self._entropy = tuple(int(k) & 0xFFFFFFFFFFFFFFFF for k in key)

    def generator(self, stream_id: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self._entropy, spawn_key=(stream_id,))
        return np.random.Generator(np.random.PCG64(ss))


def xavier_uniform(rng, fan_in, fan_out, shape=None):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    shape = shape if shape is not None else (fan_in, fan_out)
    return rng.uniform(-bound, bound, size=shape)


def orthogonal(rng, n):
    """Deterministic random orthogonal (n, n) matrix via sign-fixed QR."""
    a = rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


class Dense:
    kind = "dense"

    def __init__(self, in_dim, out_dim, rng, name="dense"):
        self.name = name
        self.dims = (in_dim, out_dim)
        self.params = {
            "W": xavier_uniform(rng, in_dim, out_dim),
            "b": np.zeros(out_dim),
        }

    def forward(self, x, mode="eval", rng=None):
        y = x @ self.params["W"] + self.params["b"]
        return y, x

    def backward(self, cache, dy):
        x = cache
        dx = dy @ self.params["W"].T
        return dx, {"W": x.T @ dy, "b": dy.sum(axis=0)}


class ReLU:
    kind = "relu"
    dims = ()

    def __init__(self, name="relu"):
        self.name = name
        self.params = {}

    def forward(self, x, mode="eval", rng=None):
        y = np.maximum(x, 0.0)
        return y, (x > 0.0)

    def backward(self, cache, dy):
        return dy * cache, {}


class Sigmoid:
    kind = "sigmoid"
    dims = ()

    def __init__(self, name="sigmoid"):
        self.name = name
        self.params = {}

    def forward(self, x, mode="eval", rng=None):
        y = 1.0 / (1.0 + np.exp(-x))
        return y, y

    def backward(self, cache, dy):
        y = cache
        return dy * y * (1.0 - y), {}


class Dropout:
    """Inverted dropout: train mode zeroes activations and rescales survivors."""

    kind = "dropout"
    dims = ()

    def __init__(self, rate, name="dropout"):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.name = name
        self.rate = rate
        self.params = {}
        self.stream_id = 0   # assigned by the owning network

    def forward(self, x, mode="eval", rng=None):
        if mode != "train" or self.rate == 0.0:
            return x, None
        if rng is None:
            raise ValueError("train-mode dropout needs an RNG stream")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep) / keep
        return x * mask, mask

    def backward(self, cache, dy):
        if cache is None:
            return dy, {}
        return dy * cache, {}


class BatchNorm:
    """Batch normalization over the batch dimension of (B, D) activations."""

    kind = "batchnorm"

    def __init__(self, dim, momentum=0.1, eps=1e-5, name="batchnorm"):
        self.name = name
        self.dims = (dim,)
        self.momentum = momentum
        self.eps = eps
        self.params = {"gamma": np.ones(dim), "beta": np.zeros(dim)}
        # running statistics are state, not trainable parameters
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def forward(self, x, mode="eval", rng=None):
        if mode == "train":
            mu = x.mean(axis=0)
            var = x.var(axis=0)
            inv = 1.0 / np.sqrt(var + self.eps)
            xn = (x - mu) * inv
            n = x.shape[0]
            var_run = var * n / (n - 1) if n > 1 else var
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mu
            self.running_var = (1 - m) * self.running_var + m * var_run
            y = self.params["gamma"] * xn + self.params["beta"]
            return y, ("train", xn, inv)
        inv = 1.0 / np.sqrt(self.running_var + self.eps)
        xn = (x - self.running_mean) * inv
        y = self.params["gamma"] * xn + self.params["beta"]
        return y, ("eval", xn, inv)

    def backward(self, cache, dy):
        gamma = self.params["gamma"]
        if cache[0] == "eval":
            # running stats are constants here, so the map is affine
            _, xn, inv = cache
            return dy * gamma * inv, {
                "gamma": (dy * xn).sum(axis=0), "beta": dy.sum(axis=0)}
        _, xn, inv = cache
        n = dy.shape[0]
        dgamma = (dy * xn).sum(axis=0)
        dbeta = dy.sum(axis=0)
        dxn = dy * gamma
        dx = inv / n * (n * dxn - dxn.sum(axis=0) - xn * (dxn * xn).sum(axis=0))
        return dx, {"gamma": dgamma, "beta": dbeta}


class LSTM:
    """Single LSTM layer over (B, T, D) inputs, returning all hidden states.

    Gate order is (input, forget, cell, output). Recurrent weights are
    orthogonal per gate, input weights Xavier-uniform, forget bias +1.
    """

    kind = "lstm"

    def __init__(self, in_dim, hidden, rng, name="lstm"):
        self.name = name
        self.dims = (in_dim, hidden)
        H = hidden
        W = xavier_uniform(rng, in_dim, H, shape=(in_dim, 4 * H))
        U = np.concatenate([orthogonal(rng, H) for _ in range(4)], axis=1)
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        self.params = {"W": W, "U": U, "b": b}

    def forward(self, x, mode="eval", rng=None):
        B, T, D = x.shape
        H = self.dims[1]
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        steps = []
        for t in range(T):
            z = x[:, t, :] @ W + h @ U + b
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            h_new = o * tc
            steps.append((x[:, t, :], h, c, i, f, g, o, tc))
            h, c = h_new, c_new
            hs[:, t, :] = h
        return hs, steps

    def backward(self, cache, d_hs):
        W, U = self.params["W"], self.params["U"]
        H = self.dims[1]
        B, T, _ = d_hs.shape
        dW = np.zeros_like(W)
        dU = np.zeros_like(U)
        db = np.zeros_like(self.params["b"])
        dx = np.empty((B, T, W.shape[0]))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            x_t, h_prev, c_prev, i, f, g, o, tc = cache[t]
            dh = d_hs[:, t, :] + dh_next
            do = dh * tc
            dc = dh * o * (1.0 - tc * tc) + dc_next
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dz = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                dg * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            dW += x_t.T @ dz
            dU += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t, :] = dz @ W.T
            dh_next = dz @ U.T
        return dx, {"W": dW, "U": dU, "b": db}


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def build_layer(spec: LayerSpec, rng=None, name=None):
    """Construct a layer from its spec; parametric kinds need an RNG."""
    name = name or spec.kind
    if spec.kind == "dense":
        return Dense(spec.dims[0], spec.dims[1], rng, name=name)
    if spec.kind == "lstm":
        return LSTM(spec.dims[0], spec.dims[1], rng, name=name)
    if spec.kind == "batchnorm":
        return BatchNorm(spec.dims[0], momentum=spec.momentum, name=name)
    if spec.kind == "dropout":
        return Dropout(spec.rate, name=name)
    if spec.kind == "relu":
        return ReLU(name=name)
    if spec.kind == "sigmoid":
        return Sigmoid(name=name)
    raise ValueError(f"unknown layer kind: {spec.kind}")


class Sequential:
    """A chain of layers sharing one mode and one dropout-stream source."""

    def __init__(self, layers, name="seq"):
        self.name = name
        self.layers = list(layers)

    def forward(self, x, mode="eval", streams: DropoutStreams | None = None):
        caches = []
        for layer in self.layers:
            rng = None
            if isinstance(layer, Dropout) and mode == "train" and streams is not None:
                rng = streams.generator(layer.stream_id)
            x, cache = layer.forward(x, mode=mode, rng=rng)
            caches.append(cache)
        return x, caches

    def backward(self, caches, dy):
        grads = {}
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dy, g = layer.backward(cache, dy)
            for k, v in g.items():
                grads[f"{layer.name}.{k}"] = v
        return dy, grads

    def named_params(self):
        out = {}
        for layer in self.layers:
            for k, v in layer.params.items():
                out[f"{layer.name}.{k}"] = v
        return out


def count_parameters(net) -> int:
    """Total trainable scalar count (batchnorm running stats excluded)."""
    return sum(int(np.prod(v.shape)) for v in net.named_params().values())
