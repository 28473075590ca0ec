"""Velocity fields v(z, t, condition) and analytic fields with closed-form flows.

States are numpy arrays whose last axis has length ``field.dim``; a leading
batch axis is allowed so a whole cloud of points can be pushed through a
solver at once.
"""

from dataclasses import dataclass, field as dc_field

import numpy as np

from rfsolve.errors import FieldDivergence

# probes may step past t=1 by up to a few delta_t
T_MAX = 1.25


class VelocityField:
    """Interface for v(z, t, condition).

    Subclasses implement :meth:`velocity`; :func:`evaluate` adds the
    precondition and finiteness checks.
    """

    dim: int
    name = "field"

    def velocity(self, state, t, condition=None):
        raise NotImplementedError

    def evaluate(self, state, t, condition=None):
        return evaluate(self, state, t, condition)


class AnalyticField(VelocityField):
    def exact_solution(self, z_start, t_start, t_end):
        raise NotImplementedError

    def total_derivative(self, state, t):
        """d/dt of v along the trajectory through ``state`` at ``t``."""
        raise NotImplementedError


def evaluate(field, state, t, condition=None):
    state = np.asarray(state, dtype=np.float64)
    if state.ndim == 0 or state.shape[-1] != field.dim:
        raise ValueError(f"state shape {state.shape} does not match field dim {field.dim}")
    t = float(t)
    if not (0.0 <= t <= T_MAX):
        raise ValueError(f"t={t} outside [0, {T_MAX}]")
    if condition is not None and int(condition) < 0:
        raise ValueError(f"condition id must be non-negative, got {condition}")
    out = field.velocity(state, t, condition)
    if out.shape != state.shape:
        raise ValueError(f"field returned shape {out.shape} for state shape {state.shape}")
    if not np.all(np.isfinite(out)):
        raise FieldDivergence(f"field divergence: non-finite velocity at t={t}")
    return out


def exact_solution(field, z_start, t_start, t_end):
    if not isinstance(field, AnalyticField):
        raise TypeError(f"{type(field).__name__} has no closed-form solution")
    z_start = np.asarray(z_start, dtype=np.float64)
    if t_start == t_end:
        return z_start.copy()
    return field.exact_solution(z_start, float(t_start), float(t_end))


@dataclass(frozen=True, eq=False)
class Constant(AnalyticField):
    c: np.ndarray
    name = "constant"

    def __post_init__(self):
        object.__setattr__(self, "c", np.atleast_1d(np.asarray(self.c, dtype=np.float64)))

    @property
    def dim(self):
        return self.c.shape[0]

    def velocity(self, state, t, condition=None):
        return np.broadcast_to(self.c, state.shape).copy()

    def exact_solution(self, z_start, t_start, t_end):
        return z_start + self.c * (t_end - t_start)

    def total_derivative(self, state, t):
        return np.zeros_like(state)


@dataclass(frozen=True, eq=False)
class LinearState(AnalyticField):
    """v = a z."""

    a: float = 1.0
    dim: int = 1
    name = "linear-state"

    def velocity(self, state, t, condition=None):
        return self.a * state

    def exact_solution(self, z_start, t_start, t_end):
        return z_start * np.exp(self.a * (t_end - t_start))

    def total_derivative(self, state, t):
        return self.a * self.a * state


@dataclass(frozen=True, eq=False)
class LinearTime(AnalyticField):
    """v = t, independent of the state."""

    dim: int = 1
    name = "linear-time"

    def velocity(self, state, t, condition=None):
        return np.full(state.shape, t)

    def exact_solution(self, z_start, t_start, t_end):
        return z_start + 0.5 * (t_end * t_end - t_start * t_start)

    def total_derivative(self, state, t):
        return np.ones_like(state)


@dataclass(frozen=True, eq=False)
class QuadraticTime(AnalyticField):
    """v = t**2; used to separate second- from third-order solvers."""

    dim: int = 1
    name = "quadratic-time"

    def velocity(self, state, t, condition=None):
        return np.full(state.shape, t * t)

    def exact_solution(self, z_start, t_start, t_end):
        return z_start + (t_end**3 - t_start**3) / 3.0

    def total_derivative(self, state, t):
        return np.full(state.shape, 2.0 * t)


@dataclass(frozen=True, eq=False)
class Rotation(AnalyticField):
    """v = omega * J z with J the 90-degree rotation; flows rotate the plane."""

    omega: float = 1.0
    dim = 2
    name = "rotation"

    def velocity(self, state, t, condition=None):
        x, y = state[..., 0], state[..., 1]
        return self.omega * np.stack([-y, x], axis=-1)

    def exact_solution(self, z_start, t_start, t_end):
        angle = self.omega * (t_end - t_start)
        c, s = np.cos(angle), np.sin(angle)
        x, y = z_start[..., 0], z_start[..., 1]
        return np.stack([c * x - s * y, s * x + c * y], axis=-1)

    def total_derivative(self, state, t):
        return -self.omega**2 * state


@dataclass(frozen=True, eq=False)
class GaussianPairOT(AnalyticField):
    """Marginal rectified-flow velocity between two diagonal Gaussians.

    With data N(mu0, sigma0^2) at t=0, noise N(mu1, sigma1^2) at t=1 and
    independent coupling, X_t = t X1 + (1-t) X0 has mean
    m(t) = (1-t) mu0 + t mu1 and std s(t) = sqrt((1-t)^2 sigma0^2 + t^2 sigma1^2).
    The marginal velocity is v = m' + (s'/s)(z - m), whose flow is the affine
    map z -> m(t1) + s(t1)/s(t0) (z - m(t0)).
    """

    mu0: np.ndarray = dc_field(default_factory=lambda: np.array([2.0, -1.0]))
    sigma0: np.ndarray = dc_field(default_factory=lambda: np.array([0.5, 0.3]))
    mu1: np.ndarray = dc_field(default_factory=lambda: np.zeros(2))
    sigma1: np.ndarray = dc_field(default_factory=lambda: np.ones(2))
    name = "gaussian-ot"

    def __post_init__(self):
        arrays = [np.atleast_1d(np.asarray(getattr(self, k), dtype=np.float64))
                  for k in ("mu0", "sigma0", "mu1", "sigma1")]
        dim = max(a.shape[0] for a in arrays)
        for key, arr in zip(("mu0", "sigma0", "mu1", "sigma1"), arrays):
            object.__setattr__(self, key, np.broadcast_to(arr, (dim,)).copy())
        if np.any(self.sigma0 <= 0) or np.any(self.sigma1 <= 0):
            raise ValueError("standard deviations must be positive")

    @property
    def dim(self):
        return self.mu0.shape[0]

    def _mean(self, t):
        return (1.0 - t) * self.mu0 + t * self.mu1

    def _var(self, t):
        return (1.0 - t) ** 2 * self.sigma0**2 + t * t * self.sigma1**2

    def _half_dvar(self, t):
        # s * s'
        return -(1.0 - t) * self.sigma0**2 + t * self.sigma1**2

    def velocity(self, state, t, condition=None):
        rate = self._half_dvar(t) / self._var(t)
        return (self.mu1 - self.mu0) + rate * (state - self._mean(t))

    def exact_solution(self, z_start, t_start, t_end):
        ratio = np.sqrt(self._var(t_end) / self._var(t_start))
        return self._mean(t_end) + ratio * (z_start - self._mean(t_start))

    def total_derivative(self, state, t):
        q = self._var(t)
        p = self._half_dvar(t)
        dp = self.sigma0**2 + self.sigma1**2
        return (dp * q - p * p) / (q * q) * (state - self._mean(t))


ANALYTIC_FIELDS = {
    cls.name: cls for cls in (Constant, LinearState, LinearTime, QuadraticTime, Rotation, GaussianPairOT)
}
