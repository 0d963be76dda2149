"""Numpy LSTM, linear layers, MSE and Adam with hand-written gradients.

All forward functions take a leading batch axis. Gate blocks inside the
stacked LSTM matrices are ordered input, forget, cell candidate, output.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass
class LinearLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def named_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.weights": self.weights, f"{prefix}.bias": self.bias}


@dataclass
class LstmLayer:
    w_x: np.ndarray  # (4H, in_dim)
    w_h: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)


@dataclass
class LstmParams:
    layers: list[LstmLayer]

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def hidden_dim(self) -> int:
        return self.layers[0].w_h.shape[1]

    @property
    def input_dim(self) -> int:
        return self.layers[0].w_x.shape[1]

    def named_arrays(self, prefix: str = "lstm") -> dict[str, np.ndarray]:
        out = {}
        for l, layer in enumerate(self.layers):
            out[f"{prefix}.{l}.w_x"] = layer.w_x
            out[f"{prefix}.{l}.w_h"] = layer.w_h
            out[f"{prefix}.{l}.b"] = layer.b
        return out


def _xavier(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def init_linear(rng: np.random.Generator, in_dim: int, out_dim: int) -> LinearLayer:
    return LinearLayer(_xavier(rng, out_dim, in_dim), np.zeros(out_dim))


def init_lstm(
    rng: np.random.Generator, input_dim: int, hidden_dim: int = 32, num_layers: int = 2
) -> LstmParams:
    """Xavier-uniform gate blocks, zero biases, forget-gate bias 1."""
    layers = []
    in_dim = input_dim
    for _ in range(num_layers):
        w_x = np.concatenate([_xavier(rng, hidden_dim, in_dim) for _ in range(4)])
        w_h = np.concatenate([_xavier(rng, hidden_dim, hidden_dim) for _ in range(4)])
        b = np.zeros(4 * hidden_dim)
        b[hidden_dim : 2 * hidden_dim] = 1.0
        layers.append(LstmLayer(w_x, w_h, b))
        in_dim = hidden_dim
    return LstmParams(layers)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class _LayerCache:
    xs: np.ndarray  # (B, T, in)
    hs: np.ndarray  # (B, T+1, H), hs[:, 0] is the zero initial state
    cs: np.ndarray  # (B, T+1, H)
    gates: np.ndarray  # (B, T, 4H) post-activation
    tanh_c: np.ndarray  # (B, T, H)


@dataclass
class LstmCache:
    layers: list[_LayerCache] = field(default_factory=list)


def lstm_forward_batch(params: LstmParams, x: np.ndarray) -> tuple[np.ndarray, LstmCache]:
    """Run the stacked LSTM over ``x`` of shape ``(B, T, input_dim)``.

    Returns the top-layer hidden state at the last step, shape ``(B, H)``,
    and the cache consumed by :func:`lstm_backward`.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[1] < 1 or x.shape[2] != params.input_dim:
        raise ConfigurationError(
            f"expected input of shape (B, T>=1, {params.input_dim}), got {x.shape}"
        )
    batch, steps, _ = x.shape
    hid = params.hidden_dim
    cache = LstmCache()
    seq = x
    for layer in params.layers:
        hs = np.zeros((batch, steps + 1, hid))
        cs = np.zeros((batch, steps + 1, hid))
        gates = np.empty((batch, steps, 4 * hid))
        tanh_c = np.empty((batch, steps, hid))
        # input projection for every step at once
        zx = seq @ layer.w_x.T + layer.b
        for t in range(steps):
            z = zx[:, t] + hs[:, t] @ layer.w_h.T
            i = _sigmoid(z[:, :hid])
            f = _sigmoid(z[:, hid : 2 * hid])
            g = np.tanh(z[:, 2 * hid : 3 * hid])
            o = _sigmoid(z[:, 3 * hid :])
            c = f * cs[:, t] + i * g
            tc = np.tanh(c)
            cs[:, t + 1] = c
            hs[:, t + 1] = o * tc
            gates[:, t] = np.concatenate([i, f, g, o], axis=1)
            tanh_c[:, t] = tc
        cache.layers.append(_LayerCache(seq, hs, cs, gates, tanh_c))
        seq = hs[:, 1:]
    return seq[:, -1].copy(), cache


def lstm_forward(params: LstmParams, sequence: np.ndarray) -> tuple[np.ndarray, LstmCache]:
    """Single-sequence form: ``sequence`` is ``(T, input_dim)``."""
    sequence = np.asarray(sequence, dtype=np.float64)
    if sequence.ndim != 2:
        raise ConfigurationError(f"expected a (T, input_dim) matrix, got {sequence.shape}")
    h, cache = lstm_forward_batch(params, sequence[None])
    return h[0], cache


def lstm_backward(
    params: LstmParams, cache: LstmCache | None, dh_last: np.ndarray, prefix: str = "lstm"
) -> dict[str, np.ndarray]:
    """Backpropagation through time from a gradient on the final hidden state."""
    if cache is None or not cache.layers:
        raise RuntimeError("lstm_backward called without a forward cache")
    hid = params.hidden_dim
    top = cache.layers[-1]
    batch, steps, _ = top.gates.shape
    dh_seq = np.zeros((batch, steps, hid))
    dh_seq[:, -1] = dh_last
    grads = {}
    for l in range(params.num_layers - 1, -1, -1):
        layer, lc = params.layers[l], cache.layers[l]
        dw_x = np.zeros_like(layer.w_x)
        dw_h = np.zeros_like(layer.w_h)
        db = np.zeros_like(layer.b)
        dx_seq = np.empty_like(lc.xs)
        dh_next = np.zeros((batch, hid))
        dc_next = np.zeros((batch, hid))
        for t in range(steps - 1, -1, -1):
            gt = lc.gates[:, t]
            i, f, g, o = gt[:, :hid], gt[:, hid : 2 * hid], gt[:, 2 * hid : 3 * hid], gt[:, 3 * hid :]
            tc = lc.tanh_c[:, t]
            dh = dh_seq[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [
                    dc * g * i * (1.0 - i),
                    dc * lc.cs[:, t] * f * (1.0 - f),
                    dc * i * (1.0 - g * g),
                    dh * tc * o * (1.0 - o),
                ],
                axis=1,
            )
            dw_x += dz.T @ lc.xs[:, t]
            dw_h += dz.T @ lc.hs[:, t]
            db += dz.sum(axis=0)
            dx_seq[:, t] = dz @ layer.w_x
            dh_next = dz @ layer.w_h
            dc_next = dc * f
        grads[f"{prefix}.{l}.w_x"] = dw_x
        grads[f"{prefix}.{l}.w_h"] = dw_h
        grads[f"{prefix}.{l}.b"] = db
        dh_seq = dx_seq
    return grads


def linear_forward(layer: LinearLayer, x: np.ndarray) -> np.ndarray:
    """``weights @ x + bias``; ``x`` may be a vector or a ``(B, in_dim)`` batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != layer.in_dim:
        raise ConfigurationError(f"linear layer expects {layer.in_dim} inputs, got {x.shape}")
    return x @ layer.weights.T + layer.bias


def linear_backward(
    layer: LinearLayer, x: np.ndarray, dy: np.ndarray, prefix: str
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Gradients for a batched linear layer; returns ``(param_grads, dx)``."""
    grads = {f"{prefix}.weights": dy.T @ x, f"{prefix}.bias": dy.sum(axis=0)}
    return grads, dy @ layer.weights


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape or pred.size < 1:
        raise ConfigurationError(f"mse needs equal non-empty shapes, got {pred.shape} vs {target.shape}")
    return float(np.mean((pred - target) ** 2))


def mse_grad(pred: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 2.0 * (pred - target) / pred.size


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_init(params: dict[str, np.ndarray], lr: float = 1e-3, **kwargs) -> AdamState:
    state = AdamState(lr=lr, **kwargs)
    state.m = {k: np.zeros_like(p) for k, p in params.items()}
    state.v = {k: np.zeros_like(p) for k, p in params.items()}
    return state


def clip_by_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm:
        return grads
    scale = max_norm / total
    return {k: g * scale for k, g in grads.items()}


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    max_norm: float | None = None,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update, applied in place to ``params``."""
    if set(grads) != set(params):
        raise ConfigurationError("gradient keys do not match parameter keys")
    if max_norm is not None:
        grads = clip_by_global_norm(grads, max_norm)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**state.step
    corr2 = 1.0 - b2**state.step
    for key, p in params.items():
        g = grads[key]
        if g.shape != p.shape:
            raise ConfigurationError(f"gradient shape {g.shape} != parameter shape {p.shape} for {key}")
        m = state.m[key]
        v = state.v[key]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return params, state
