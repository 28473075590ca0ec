"""Toy attention velocity network exposing per-block value tensors.

The flat state is viewed as ``tokens x channels``.  Time is added to the
residual stream; each block RMS-normalises it and runs single-head
self-attention whose values additionally receive the per-token condition
embedding, so the condition reaches the velocity only through the value
path (as text-supplied values do in cross-attention).  The velocity is a
linear read-out of the final residual stream.
"""

import math
from dataclasses import dataclass

import numpy as np

from rfsolve.field import VelocityField

RMS_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class AttnBlock:
    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    def __post_init__(self):
        c = self.w_q.shape[0]
        for w in (self.w_q, self.w_k, self.w_v, self.w_o):
            if w.shape != (c, c):
                raise ValueError("attention projections must be square and channel-preserving")


def _softmax(x):
    x = x - x.max(axis=-1, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=-1, keepdims=True)


class AttentionField(VelocityField):
    name = "attention"

    def __init__(self, blocks, cond_table, time_embed, w_out):
        if not blocks:
            raise ValueError("need at least one attention block")
        self.blocks = list(blocks)
        self.cond_table = np.asarray(cond_table, dtype=np.float64)
        self.time_embed = np.asarray(time_embed, dtype=np.float64)
        self.w_out = np.asarray(w_out, dtype=np.float64)
        self.tokens, self.channels = self.time_embed.shape
        if self.cond_table.shape[1:] != self.time_embed.shape:
            raise ValueError("condition embeddings must be tokens x channels")

    @classmethod
    def random(cls, seed=0, tokens=4, channels=8, n_blocks=2, n_conditions=4, scale=1.0):
        rng = np.random.default_rng(seed)
        std = 1.0 / math.sqrt(channels)

        def proj(gain=1.0):
            return gain * std * rng.standard_normal((channels, channels))

        blocks = [AttnBlock(proj(2.0), proj(2.0), proj(), proj(scale)) for _ in range(n_blocks)]
        cond_table = rng.standard_normal((n_conditions, tokens, channels))
        time_embed = rng.standard_normal((tokens, channels))
        return cls(blocks, cond_table, time_embed, proj(0.5))

    @property
    def dim(self):
        return self.tokens * self.channels

    @property
    def n_blocks(self):
        return len(self.blocks)

    def velocity(self, state, t, condition=None):
        return self.forward(state, t, condition)

    def forward(self, state, t, condition=None, v_override=None, v_capture=None):
        """Velocity at (state, t); block m uses ``v_override[m]`` as its values when given.

        Values computed by block m (before any override) are stored in
        ``v_capture[m]`` when a capture dict is passed.
        """
        state = np.asarray(state, dtype=np.float64)
        x = state.reshape(state.shape[:-1] + (self.tokens, self.channels))
        x = x + t * self.time_embed
        cond = 0.0  # value-path conditioning only
        if condition is not None:
            if not 0 <= condition < len(self.cond_table):
                raise ValueError(f"unknown condition id {condition}")
            cond = self.cond_table[condition]
        scale = 1.0 / math.sqrt(self.channels)
        for m, blk in enumerate(self.blocks):
            h = x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + RMS_EPS)
            q = h @ blk.w_q
            k = h @ blk.w_k
            v = (h + cond) @ blk.w_v
            if v_capture is not None:
                v_capture[m] = v
            if v_override is not None and m in v_override:
                v_new = np.asarray(v_override[m], dtype=np.float64)
                if v_new.shape != v.shape:
                    raise ValueError(f"override for block {m} has shape {v_new.shape}, expected {v.shape}")
                v = v_new
            attn = _softmax(q @ np.swapaxes(k, -1, -2) * scale)
            x = x + (attn @ v) @ blk.w_o
        return (x @ self.w_out).reshape(state.shape)
