"""Value-feature sharing between inversion and denoising.

Features are keyed by the grid index k of the time t_k at which the solver
step starts, the block index m and the evaluation pass (main, probe, ...).
Inversion captures them at the last ``n_share`` timesteps t_{N-n+1}..t_N
(t_N is visited by one capture-only evaluation of the inverted noise), and
the first ``n_share`` denoising steps, which leave exactly those timesteps,
use them in place of their own values.  Both directions probe at
t_k + delta_t, so every replaced value was captured at the same time as the
one it replaces.
"""

from dataclasses import dataclass

import numpy as np

from rfsolve.field import VelocityField, evaluate
from rfsolve.solver import DENOISE, INVERT, PASS_TAGS, SolverConfig, run_trajectory, taylor_step
from rfsolve.tensorio import write_tensor


@dataclass(frozen=True)
class ShareConfig:
    n_share: int = 0
    m_share: int = 1
    share_probe: bool = True

    def validate(self, n_steps, n_blocks):
        if not 0 <= self.n_share <= n_steps:
            raise ValueError(f"n_share={self.n_share} must lie in [0, {n_steps}]")
        if self.n_share and not 1 <= self.m_share <= n_blocks:
            raise ValueError(f"m_share={self.m_share} must lie in [1, {n_blocks}]")

    def shared_timesteps(self, n_steps):
        return range(n_steps - self.n_share + 1, n_steps + 1)

    def shared_blocks(self, n_blocks):
        return range(n_blocks - self.m_share, n_blocks)


class FeatureCache:
    """Captured value tensors keyed by ``(timestep, block, pass_tag)``; write-once."""

    def __init__(self):
        self._store = {}

    def put(self, key, value):
        if key in self._store:
            raise KeyError(f"feature {key} already captured in this run")
        self._store[key] = value

    def get(self, key):
        return self._store[key]

    def __contains__(self, key):
        return key in self._store

    def __len__(self):
        return len(self._store)

    def keys(self):
        return sorted(self._store)

    def without_pass(self, tag):
        out = FeatureCache()
        out._store = {k: v for k, v in self._store.items() if k[2] != tag}
        return out

    def dump(self, directory):
        for (k, m, tag), value in sorted(self._store.items()):
            write_tensor(value, f"{directory}/v_k{k:03d}_m{m:02d}_{tag}.rft")


class _Hooked(VelocityField):
    """Routes evaluate() through AttentionField.forward with capture/override hooks."""

    def __init__(self, field, **hooks):
        self.field = field
        self.dim = field.dim
        self.hooks = hooks

    def velocity(self, state, t, condition=None):
        return self.field.forward(state, t, condition, **self.hooks)


def _capturing(field, cache, k, blocks, condition):
    def ev(state, t, pass_index):
        captured = {}
        out = evaluate(_Hooked(field, v_capture=captured), state, t, condition)
        for m in blocks:
            cache.put((k, m, PASS_TAGS[pass_index]), captured[m])
        return out

    return ev


def invert_with_capture(field, z0, grid, config: SolverConfig, source_condition, share: ShareConfig):
    """Invert ``z0`` to noise, capturing values at the shared timesteps.

    Returns ``(noise, cache, record)``.  When sharing is enabled the capture at
    t_N costs ``config.order`` extra evaluations.
    """
    share.validate(grid.n, field.n_blocks)
    cache = FeatureCache()
    shared = set(share.shared_timesteps(grid.n))
    blocks = list(share.shared_blocks(field.n_blocks))

    def step_evaluator(i):
        if i in shared:
            return _capturing(field, cache, i, blocks, source_condition)
        return lambda s, t, p: evaluate(field, s, t, source_condition)

    cfg = SolverConfig(config.order, config.delta_t, INVERT)
    noise, record, _ = run_trajectory(
        field, z0, grid, cfg, source_condition, record=True, step_evaluator=step_evaluator
    )
    if grid.n in shared:
        # same evaluations the first denoising step makes; the step result is discarded
        taylor_step(step_evaluator(grid.n), noise, grid.t(grid.n), grid.t(grid.n - 1),
                    config.order, config.delta_t)
    return noise, cache, record


def denoise_with_sharing(field, noise, grid, config: SolverConfig, target_condition, cache: FeatureCache,
                         share_probe=True):
    """Denoise ``noise`` under ``target_condition``, replacing values found in ``cache``.

    Returns ``(output, record)``.
    """

    def step_evaluator(i):
        def ev(state, t, pass_index):
            tag = PASS_TAGS[pass_index]
            override = {}
            if pass_index == 0 or share_probe:
                override = {m: cache.get((i, m, tag)) for m in range(field.n_blocks) if (i, m, tag) in cache}
            if not override:
                return evaluate(field, state, t, target_condition)
            return evaluate(_Hooked(field, v_override=override), state, t, target_condition)

        return ev

    cfg = SolverConfig(config.order, config.delta_t, DENOISE)
    out, record, _ = run_trajectory(
        field, noise, grid, cfg, target_condition, record=True, step_evaluator=step_evaluator
    )
    return out, record


def edit(field, z0, grid, config, source_condition, target_condition, share: ShareConfig):
    """Invert under the source condition, denoise under the target with sharing."""
    noise, cache, _ = invert_with_capture(field, z0, grid, config, source_condition, share)
    out, _ = denoise_with_sharing(field, noise, grid, config, target_condition, cache, share.share_probe)
    return out


def reconstruct(field, z0, grid, config, condition):
    """Plain invert -> denoise without any sharing."""
    noise, _, _ = run_trajectory(field, z0, grid, SolverConfig(config.order, config.delta_t, INVERT), condition)
    out, _, _ = run_trajectory(field, noise, grid, SolverConfig(config.order, config.delta_t, DENOISE), condition)
    return out


def mse(a, b):
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.mean(d * d))
