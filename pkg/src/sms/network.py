"""LIF front-end followed by two trainable dense layers, trained with sigmoid cross-entropy.

The LIF layer sits in front of every trainable parameter, so its thresholding is a
fixed preprocessing of the input spikes and the dense-layer gradients are exact.

Flatten order is channel-major with the spike step inner: element ``j * steps + k``
of a flattened train is spike step ``k`` of channel ``j``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

SUBTRACT = "subtract"
ZERO = "zero"


@dataclass(frozen=True)
class LifConfig:
    decay: float = 0.9
    threshold: float = 1.0
    reset: str = SUBTRACT

    def __post_init__(self):
        # decay = 0 (memoryless pass-through) is allowed for testing
        if not 0.0 <= self.decay <= 1.0:
            raise ValueError("decay must lie in [0, 1]")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.reset not in (SUBTRACT, ZERO):
            raise ValueError(f"reset must be {SUBTRACT!r} or {ZERO!r}")


def lif_forward(spikes, cfg: LifConfig) -> np.ndarray:
    """Run leaky integrate-and-fire neurons over the spike axis (``-2``)."""
    spikes = np.asarray(spikes)
    u = np.zeros(spikes.shape[:-2] + spikes.shape[-1:])
    out = np.zeros(spikes.shape, dtype=np.uint8)
    for k in range(spikes.shape[-2]):
        u = cfg.decay * u + spikes[..., k, :]
        fired = u >= cfg.threshold
        out[..., k, :] = fired
        if cfg.reset == SUBTRACT:
            u = np.where(fired, u - cfg.threshold, u)
        else:
            u = np.where(fired, 0.0, u)
    return out


def flatten(train) -> np.ndarray:
    train = np.asarray(train)
    return np.swapaxes(train, -1, -2).reshape(train.shape[:-2] + (-1,))


def unflatten(flat, steps: int, channels: int) -> np.ndarray:
    flat = np.asarray(flat)
    return np.swapaxes(flat.reshape(flat.shape[:-1] + (channels, steps)), -1, -2)


@dataclass
class Network:
    """Trainable parameters plus the fixed LIF front-end.

    ``w1`` has shape ``(hidden, steps * n_in)`` and ``w2`` has shape
    ``(steps * n_out, hidden)``. With ``literal_relu`` the loss sees
    ``relu(logits)`` instead of the raw logits.
    """

    steps: int
    n_in: int
    n_out: int
    hidden: int = 500
    lif: LifConfig = field(default_factory=LifConfig)
    literal_relu: bool = False
    w1: np.ndarray = None
    b1: np.ndarray = None
    w2: np.ndarray = None
    b2: np.ndarray = None

    def __post_init__(self):
        if min(self.steps, self.n_in, self.n_out, self.hidden) < 1:
            raise ValueError("network dimensions must be positive")
        shapes = self.param_shapes
        for name, shape in zip(("w1", "b1", "w2", "b2"), shapes):
            value = getattr(self, name)
            if value is None:
                value = np.zeros(shape)
            value = np.asarray(value, dtype=np.float64)
            if value.shape != shape:
                raise ValueError(f"{name} has shape {value.shape}, expected {shape}")
            setattr(self, name, value)

    @property
    def param_shapes(self):
        n_x, n_y = self.steps * self.n_in, self.steps * self.n_out
        return [(self.hidden, n_x), (self.hidden,), (n_y, self.hidden), (n_y,)]

    @property
    def params(self) -> list[np.ndarray]:
        return [self.w1, self.b1, self.w2, self.b2]

    def init_weights(self, seed: int) -> "Network":
        """Uniform in ``+-1/sqrt(fan_in)``; zero biases."""
        gen = np.random.default_rng(seed)
        for w in (self.w1, self.w2):
            bound = 1.0 / np.sqrt(w.shape[1])
            w[...] = gen.uniform(-bound, bound, size=w.shape)
        self.b1[...] = 0.0
        self.b2[...] = 0.0
        return self

    def copy(self) -> "Network":
        return Network(self.steps, self.n_in, self.n_out, self.hidden, self.lif, self.literal_relu,
                       self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


def features(net: Network, spikes) -> np.ndarray:
    """LIF output flattened to dense-layer input; shape ``(..., steps * n_in)``."""
    spikes = np.asarray(spikes)
    if spikes.shape[-2:] != (net.steps, net.n_in):
        raise ValueError(f"input has shape {spikes.shape[-2:]}, network expects {(net.steps, net.n_in)}")
    return flatten(lif_forward(spikes, net.lif)).astype(np.float64)


def _dense_forward(net: Network, feats):
    pre = feats @ net.w1.T + net.b1
    h = np.maximum(pre, 0.0)
    z = h @ net.w2.T + net.b2
    return pre, h, z


def forward(net: Network, spikes) -> np.ndarray:
    """Pre-activation logits of the second dense layer, flattened channel-major."""
    return _dense_forward(net, features(net, spikes))[2]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _loss_input(net: Network, z):
    return np.maximum(z, 0.0) if net.literal_relu else z


def sce_loss(logits, target) -> float:
    """Mean numerically stable sigmoid cross-entropy."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"logits {z.shape} and targets {y.shape} differ in shape")
    return float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))


def loss_and_grads(net: Network, feats, targets):
    """Loss and gradients for precomputed LIF features ``(batch, steps*n_in)``.

    ``targets`` are flattened spike trains ``(batch, steps*n_out)``. The loss is the
    mean over every output element of every sample.
    """
    feats = np.atleast_2d(feats)
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    pre, h, z = _dense_forward(net, feats)
    out = _loss_input(net, z)
    loss = sce_loss(out, targets)
    dz = (_sigmoid(out) - targets) / targets.size
    if net.literal_relu:
        dz = dz * (z > 0)
    gw2 = dz.T @ h
    gb2 = dz.sum(axis=0)
    dpre = (dz @ net.w2) * (pre > 0)
    gw1 = dpre.T @ feats
    gb1 = dpre.sum(axis=0)
    return loss, [gw1, gb1, gw2, gb2]


def backward(net: Network, spikes, target):
    """Gradients of the mean SCE loss w.r.t. ``(w1, b1, w2, b2)``.

    ``target`` is a spike train shaped like the network output ``(..., steps, n_out)``.
    """
    feats = features(net, spikes).reshape(-1, net.steps * net.n_in)
    tgt = flatten(np.asarray(target)).reshape(-1, net.steps * net.n_out)
    return loss_and_grads(net, feats, tgt)[1]


def binarize(logits, steps: int, channels: int) -> np.ndarray:
    """Spike train from logits; a logit of exactly 0 fires."""
    return unflatten((np.asarray(logits) >= 0).astype(np.uint8), steps, channels)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    """In-place bias-corrected Adam update of ``params``."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError("gradient shape does not match parameter")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    learning_rate: float = 1e-3
    batch_size: int = 0
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 0:
            raise ValueError("batch_size must be >= 0 (0 = full batch)")


class TrainingDiverged(RuntimeError):
    pass


def train(net: Network, inputs, targets, cfg: TrainConfig, progress=None) -> list[float]:
    """Fit ``net`` to spike-train pairs; returns the mean loss of each epoch.

    ``inputs`` has shape ``(samples, steps, n_in)`` and ``targets`` has shape
    ``(samples, steps, n_out)``. Mini-batches (``batch_size > 0``) are drawn from a
    permutation seeded by ``cfg.seed``.
    """
    inputs = np.asarray(inputs)
    targets = np.asarray(targets)
    if len(inputs) == 0:
        raise ValueError("empty dataset")
    if len(inputs) != len(targets):
        raise ValueError("inputs and targets differ in length")
    if targets.shape[1:] != (net.steps, net.n_out):
        raise ValueError(f"targets have shape {targets.shape[1:]}, network emits {(net.steps, net.n_out)}")
    feats = features(net, inputs)
    tgt = flatten(targets).astype(np.float64)
    n = len(feats)
    batch = n if cfg.batch_size == 0 else min(cfg.batch_size, n)
    state = AdamState.zeros_like(net.params)
    gen = np.random.default_rng(cfg.seed)
    history = []
    for epoch in range(cfg.epochs):
        order = np.arange(n) if batch == n else gen.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, batch)):
            idx = order[start:start + batch]
            loss, grads = loss_and_grads(net, feats[idx], tgt[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, batch {b}")
            adam_step(net.params, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
            total += loss * len(idx)
        history.append(total / n)
        if progress is not None:
            progress(epoch, history[-1])
    return history
