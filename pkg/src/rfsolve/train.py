"""Rectified-flow regression of a small tanh MLP on 2-D toy distributions.

Data X0 ~ pi_0 sits at t = 0 and noise X1 ~ N(0, I) at t = 1.  The network
sees the state concatenated with t and is fitted to X1 - X0 at
X_t = t X1 + (1 - t) X0.  Gradients come from a hand-written backward pass.
"""

import json
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from rfsolve.errors import TrainingDivergence
from rfsolve.field import VelocityField
from rfsolve.tensorio import read_tensor, write_tensor

MANIFEST = "manifest.json"


class MlpField(VelocityField):
    """tanh MLP on [z, t]; the last layer is linear."""

    name = "mlp"

    def __init__(self, layers):
        self.layers = [(np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64)) for w, b in layers]
        for (w, b), (w_next, _) in zip(self.layers, self.layers[1:] + [(None, None)]):
            if b.shape != (w.shape[1],):
                raise ValueError(f"bias shape {b.shape} does not match weight {w.shape}")
            if w_next is not None and w_next.shape[0] != w.shape[1]:
                raise ValueError("layer shapes do not chain")
        if self.layers[0][0].shape[0] != self.layers[-1][0].shape[1] + 1:
            raise ValueError("input width must be output width + 1 (state plus time)")
        if not all(np.all(np.isfinite(p)) for layer in self.layers for p in layer):
            raise ValueError("parameters must be finite")

    @classmethod
    def init(cls, data_dim=2, hidden=(64, 64, 64), seed=0):
        rng = np.random.default_rng(seed)
        widths = [data_dim + 1, *hidden, data_dim]
        layers = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            w = rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_in, fan_out))
            layers.append((w, np.zeros(fan_out)))
        return cls(layers)

    @property
    def dim(self):
        return self.layers[-1][0].shape[1]

    def parameters(self):
        return [p for layer in self.layers for p in layer]

    def copy(self):
        return MlpField([(w.copy(), b.copy()) for w, b in self.layers])

    def _forward(self, x):
        """Return output and the per-layer inputs needed by the backward pass."""
        inputs = []
        h = x
        last = len(self.layers) - 1
        for idx, (w, b) in enumerate(self.layers):
            inputs.append(h)
            h = h @ w + b
            if idx != last:
                h = np.tanh(h)
        return h, inputs

    def velocity(self, state, t, condition=None):
        t_col = np.full(state.shape[:-1] + (1,), t)
        out, _ = self._forward(np.concatenate([state, t_col], axis=-1))
        return out

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        entries = []
        for idx, (w, b) in enumerate(self.layers):
            for kind, arr in (("weight", w), ("bias", b)):
                fname = f"layer{idx}_{kind}.rft"
                write_tensor(arr, directory / fname)
                entries.append({"layer": idx, "kind": kind, "file": fname, "shape": list(arr.shape)})
        (directory / MANIFEST).write_text(
            json.dumps({"format": "rfsolve-mlp", "activation": "tanh", "tensors": entries}, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
        n_layers = 1 + max(e["layer"] for e in manifest["tensors"])
        found = [{} for _ in range(n_layers)]
        for entry in manifest["tensors"]:
            arr = read_tensor(directory / entry["file"])
            if list(arr.shape) != entry["shape"]:
                raise ValueError(f"{entry['file']}: shape {arr.shape} disagrees with manifest")
            found[entry["layer"]][entry["kind"]] = arr
        return cls([(d["weight"], d["bias"]) for d in found])


def rf_loss_batch(field, x0, x1, t):
    """Mean over the batch of ||(x1 - x0) - v(x_t, t)||^2 and its exact gradient.

    Returns ``(loss, grads)`` where ``grads`` is a list of ``(dW, db)`` pairs
    aligned with ``field.layers``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x1 = np.atleast_2d(np.asarray(x1, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    if x0.shape != x1.shape or t.shape[0] != x0.shape[0]:
        raise ValueError("x0, x1 and t must describe the same batch")
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    batch = x0.shape[0]
    xt = t * x1 + (1.0 - t) * x0
    out, inputs = field._forward(np.concatenate([xt, t], axis=1))
    resid = out - (x1 - x0)
    loss = float(np.sum(resid * resid) / batch)
    if not math.isfinite(loss):
        raise TrainingDivergence(f"non-finite loss {loss}")

    grads = [None] * len(field.layers)
    delta = 2.0 * resid / batch
    for idx in range(len(field.layers) - 1, -1, -1):
        w, _ = field.layers[idx]
        a_in = inputs[idx]
        grads[idx] = (a_in.T @ delta, delta.sum(axis=0))
        if idx > 0:
            # a_in = tanh(pre) for every layer after the first
            delta = (delta @ w.T) * (1.0 - a_in * a_in)
    return loss, grads


@dataclass(frozen=True)
class GaussianMixture:
    means: tuple
    stds: tuple
    weights: tuple
    name = "gaussian-mixture"

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        if not math.isclose(weights.sum(), 1.0, rel_tol=0, abs_tol=1e-12):
            raise ValueError("mixture weights must sum to 1")
        if np.any(np.asarray(self.stds) <= 0):
            raise ValueError("mixture stds must be positive")

    @property
    def dim(self):
        return len(self.means[0])

    def sample(self, n, rng):
        means = np.asarray(self.means, dtype=float)
        stds = np.broadcast_to(np.asarray(self.stds, dtype=float), means.shape)
        comp = rng.choice(len(self.weights), size=n, p=np.asarray(self.weights, dtype=float))
        return means[comp] + stds[comp] * rng.standard_normal((n, means.shape[1]))


def standard_gaussian(dim=2):
    return GaussianMixture(means=((0.0,) * dim,), stds=((1.0,) * dim,), weights=(1.0,))


@dataclass(frozen=True)
class TwoMoons:
    noise: float = 0.1
    dim = 2
    name = "two-moons"

    def sample(self, n, rng):
        upper = rng.random(n) < 0.5
        theta = rng.random(n) * math.pi
        x = np.where(upper, np.cos(theta), 1.0 - np.cos(theta))
        y = np.where(upper, np.sin(theta), 0.5 - np.sin(theta))
        pts = np.stack([x, y], axis=1) - np.array([0.5, 0.25])
        return pts + self.noise * rng.standard_normal((n, 2))


@dataclass(frozen=True)
class Checkerboard:
    cells: int = 4
    dim = 2
    name = "checkerboard"

    def sample(self, n, rng):
        # rejection-free: pick a dark cell uniformly, then a point inside it
        dark = [(i, j) for i in range(self.cells) for j in range(self.cells) if (i + j) % 2 == 0]
        idx = rng.integers(len(dark), size=n)
        cells = np.asarray(dark, dtype=float)[idx]
        pts = (cells + rng.random((n, 2))) / self.cells
        return 4.0 * pts - 2.0


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256
    steps: int = 2000
    learning_rate: float = 2e-3
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.batch_size <= 0 or self.steps <= 0 or self.learning_rate < 0 or self.seed < 0:
            raise ValueError("batch_size and steps must be positive, learning_rate and seed non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def train(field, dist0, config=TrainConfig(), dist1=None):
    """Fit ``field`` to the rectified-flow target; returns ``(trained_copy, losses)``.

    Every step draws a fresh batch of (x0, x1, t) with t ~ U[0, 1].
    """
    dist1 = dist1 or standard_gaussian(field.dim)
    rng = np.random.default_rng(config.seed)
    model = field.copy()
    params = model.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    losses = []
    for step in range(1, config.steps + 1):
        x0 = dist0.sample(config.batch_size, rng)
        x1 = dist1.sample(config.batch_size, rng)
        t = rng.random(config.batch_size)
        loss, grads = rf_loss_batch(model, x0, x1, t)
        if loss > 1e6:
            raise TrainingDivergence(f"loss {loss:.3g} exceeded 1e6 at step {step}")
        losses.append(loss)
        flat = [g for pair in grads for g in pair]
        for p, g, mi, vi in zip(params, flat, m, v):
            if config.optimizer == "sgd":
                p -= config.learning_rate * g
                continue
            mi *= config.beta1
            mi += (1.0 - config.beta1) * g
            vi *= config.beta2
            vi += (1.0 - config.beta2) * g * g
            m_hat = mi / (1.0 - config.beta1**step)
            v_hat = vi / (1.0 - config.beta2**step)
            p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
    return model, losses


TOY_DISTRIBUTIONS = {
    "gaussian-mixture": lambda: GaussianMixture(
        means=((-2.0, 0.0), (2.0, 0.0)), stds=((0.4, 0.4), (0.4, 0.4)), weights=(0.5, 0.5)
    ),
    "two-moons": TwoMoons,
    "checkerboard": Checkerboard,
}
