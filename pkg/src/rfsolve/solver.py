"""Euler and Taylor-expansion (RF-Solver) steps for dZ = v(Z, t) dt.

A step of order n from t_i to t_next = t_i + h is

    Z_next = Z + sum_{k<n} h^(k+1)/(k+1)! * d^k v/dt^k

where the time derivatives are the *total* derivatives along the trajectory,
estimated by forward differences over probe states advanced with Euler steps
of size delta_t.  Probes always move towards increasing t, for sampling and
inversion alike.
"""

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional

import numpy as np

from rfsolve.errors import NumericalError, SolverDivergence
from rfsolve.field import evaluate

DENOISE = "denoise"
INVERT = "invert"
PASS_TAGS = ("main", "probe", "probe2")

# (state, t, pass_index) -> velocity
Evaluator = Callable[[np.ndarray, float, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Timesteps stored as ``[t_N, ..., t_0]`` with t_N = 1 and t_0 = 0."""

    times: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a time grid needs at least two points")
        if times[0] != 1.0 or times[-1] != 0.0:
            raise ValueError("time grid must start at 1.0 and end at 0.0")
        if not np.all(np.diff(times) < 0):
            raise ValueError("time grid must be strictly decreasing")

    @classmethod
    def uniform(cls, n):
        if n < 1:
            raise ValueError(f"need N >= 1 intervals, got {n}")
        times = 1.0 - np.arange(n + 1) / n
        times[-1] = 0.0
        return cls(times)

    @property
    def n(self):
        return self.times.size - 1

    def t(self, i):
        """t_i, counting from t_0 = 0."""
        return float(self.times[self.n - i])

    def ascending(self):
        return self.times[::-1].copy()

    def refine(self, factor=2):
        """Insert ``factor - 1`` equally spaced points inside every interval."""
        # fine[factor * i] == t_i exactly
        asc = self.ascending()
        inner = asc[:-1, None] + np.diff(asc)[:, None] * (np.arange(factor) / factor)
        fine = np.append(inner.ravel(), 1.0)
        return TimeGrid(fine[::-1].copy())

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    __hash__ = None


@dataclass(frozen=True)
class SolverConfig:
    order: int = 2
    delta_t: float = 0.01
    direction: str = DENOISE

    def __post_init__(self):
        if self.order not in (1, 2, 3):
            raise ValueError(f"order must be 1, 2 or 3, got {self.order}")
        if not self.delta_t > 0:
            raise ValueError(f"delta_t must be positive, got {self.delta_t}")
        if self.direction not in (DENOISE, INVERT):
            raise ValueError(f"direction must be {DENOISE!r} or {INVERT!r}")


@dataclass
class StepReport:
    t_from: float
    t_to: float
    state_out: np.ndarray
    velocity: np.ndarray
    derivative_estimates: list
    nfe: int


@dataclass
class TrajectoryRecord:
    """States and velocities of one run, in the order they were visited.

    ``times[j]`` is the time of ``states[j]``; ``velocities[j]`` is the main
    evaluation made at ``states[j]`` (there is none at the final state).
    """

    grid: TimeGrid
    direction: str
    times: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)
    velocities: list = dc_field(default_factory=list)

    def state_at(self, i):
        """Z at grid index i (t_i), regardless of direction."""
        j = i if self.direction == INVERT else self.grid.n - i
        return self.states[j]


def field_evaluator(field, condition=None) -> Evaluator:
    return lambda state, t, pass_index: evaluate(field, state, t, condition)


def taylor_step(evaluator, state, t_i, t_next, order, delta_t):
    """One step of the given order; ``evaluator`` receives the pass index (0 = main)."""
    if t_next == t_i:
        raise ValueError("t_next must differ from t_i")
    h = t_next - t_i
    v = evaluator(state, t_i, 0)
    if order == 1:
        return StepReport(t_i, t_next, state + h * v, v, [], 1)
    probe = state + delta_t * v
    v1 = evaluator(probe, t_i + delta_t, 1)
    d1 = (v1 - v) / delta_t
    if order == 2:
        out = state + h * v + 0.5 * h * h * d1
        return StepReport(t_i, t_next, out, v, [d1], 2)
    probe2 = probe + delta_t * v1
    v2 = evaluator(probe2, t_i + 2.0 * delta_t, 2)
    d2 = (v2 - 2.0 * v1 + v) / (delta_t * delta_t)
    out = state + h * v + 0.5 * h * h * d1 + (h * h * h / 6.0) * d2
    return StepReport(t_i, t_next, out, v, [d1, d2], 3)


def euler_step(field, state, t_i, t_next, condition=None):
    return taylor_step(field_evaluator(field, condition), np.asarray(state, float), t_i, t_next, 1, 1.0)


def estimate_derivative(field, state, t_i, delta_t=0.01, condition=None):
    """Return ``(v_hat, v_deriv, probe_state)`` using one Euler probe of size delta_t."""
    if not delta_t > 0:
        raise ValueError(f"delta_t must be positive, got {delta_t}")
    state = np.asarray(state, dtype=np.float64)
    v_hat = evaluate(field, state, t_i, condition)
    probe_state = state + delta_t * v_hat
    v_probe = evaluate(field, probe_state, t_i + delta_t, condition)
    return v_hat, (v_probe - v_hat) / delta_t, probe_state


def rf_solver2_step(field, state, t_i, t_next, delta_t=0.01, condition=None):
    return taylor_step(field_evaluator(field, condition), np.asarray(state, float), t_i, t_next, 2, delta_t)


def rf_solver3_step(field, state, t_i, t_next, delta_t=0.01, condition=None):
    return taylor_step(field_evaluator(field, condition), np.asarray(state, float), t_i, t_next, 3, delta_t)


def run_trajectory(
    field,
    z_init,
    grid: TimeGrid,
    config: SolverConfig = SolverConfig(),
    condition=None,
    record: bool = False,
    step_evaluator: Optional[Callable[[int], Evaluator]] = None,
):
    """Integrate over the whole grid.

    Denoising steps t_i -> t_{i-1} for i = N..1; inversion steps
    t_i -> t_{i+1} for i = 0..N-1.  ``step_evaluator(i)`` may supply the
    evaluator for the step leaving t_i (used by feature sharing).

    Returns ``(final_state, record_or_None, total_nfe)``.
    """
    state = np.asarray(z_init, dtype=np.float64).copy()
    rec = TrajectoryRecord(grid, config.direction) if record else None
    default = field_evaluator(field, condition)
    n = grid.n
    if config.direction == DENOISE:
        steps = [(i, i - 1) for i in range(n, 0, -1)]
    else:
        steps = [(i, i + 1) for i in range(n)]
    nfe = 0
    for i, j in steps:
        evaluator = step_evaluator(i) if step_evaluator is not None else default
        t_i, t_j = grid.t(i), grid.t(j)
        try:
            report = taylor_step(evaluator, state, t_i, t_j, config.order, config.delta_t)
        except NumericalError as exc:
            raise SolverDivergence(i, str(exc)) from exc
        if rec is not None:
            rec.times.append(t_i)
            rec.states.append(state)
            rec.velocities.append(report.velocity)
        state = report.state_out
        nfe += report.nfe
        if not np.all(np.isfinite(state)):
            raise SolverDivergence(j)
    if rec is not None:
        rec.times.append(grid.t(steps[-1][1]))
        rec.states.append(state)
    return state, rec, nfe
