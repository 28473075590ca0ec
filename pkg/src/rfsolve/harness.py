"""Experiment drivers: inversion/reconstruction error curves, convergence order,
fixed-NFE order ablation and the feature-sharing sweep.

Every study returns plain dataclasses and has a ``*_csv`` writer that emits
``# key=value`` metadata lines followed by ``label,v0,v1,...`` rows.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from rfsolve.edit import ShareConfig, edit, mse, reconstruct
from rfsolve.field import exact_solution
from rfsolve.solver import DENOISE, INVERT, SolverConfig, TimeGrid, run_trajectory
from rfsolve.tensorio import write_csv

EXACT_TOL = 1e-12


@dataclass
class ErrorCurve:
    indices: list
    times: list
    mse: list
    metadata: dict = dc_field(default_factory=dict)


@dataclass
class ConvergenceReport:
    step_counts: list
    errors: list
    slope: float | None
    field_name: str
    order: int

    @property
    def exact(self):
        return self.slope is None


def _map(fn, items, jobs):
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def roundtrip(field, z0, grid, order, delta_t=0.01, condition=None):
    """Invert then denoise; returns ``(inversion_record, denoise_record)``."""
    noise, inv, _ = run_trajectory(field, z0, grid, SolverConfig(order, delta_t, INVERT), condition, record=True)
    _, den, _ = run_trajectory(field, noise, grid, SolverConfig(order, delta_t, DENOISE), condition, record=True)
    return inv, den


def fig2_study(field, z0, n, orders=(1, 2), condition=None, delta_t=0.01, nfe_matched=True, grid=None):
    """Per-timestep MSE between inversion and reconstruction latents.

    With ``nfe_matched`` order 1 runs on a grid refined by two (same NFE as
    order 2) and its curve is read off at the coarse grid's timesteps.
    Every curve has length N + 1, index i holding t_i.
    """
    grid = grid or TimeGrid.uniform(n)
    curves = []
    for order in orders:
        factor = 2 if (order == 1 and nfe_matched) else 1
        run_grid = grid.refine(factor) if factor > 1 else grid
        inv, den = roundtrip(field, z0, run_grid, order, delta_t, condition)
        values = [mse(inv.state_at(factor * i), den.state_at(factor * i)) for i in range(grid.n + 1)]
        curves.append(ErrorCurve(
            indices=list(range(grid.n + 1)),
            times=[grid.t(i) for i in range(grid.n + 1)],
            mse=values,
            metadata={"field": getattr(field, "name", "field"), "order": order, "N": run_grid.n,
                      "delta_t": delta_t, "condition": condition},
        ))
    return curves


def convergence_study(field, z0, direction, order, step_counts, delta_t=0.01, jobs=1):
    """Terminal error against the closed-form flow and the fitted log-log slope.

    The slope is that of -log(error) against -log(h), i.e. the observed global
    order.  It is ``None`` when every error is below 1e-12 (the solver is exact
    on this field).
    """
    if len(step_counts) < 4:
        raise ValueError("need at least four resolutions")
    z0 = np.asarray(z0, dtype=np.float64)
    t_start, t_end = (1.0, 0.0) if direction == DENOISE else (0.0, 1.0)
    target = exact_solution(field, z0, t_start, t_end)

    def terminal_error(n):
        out, _, _ = run_trajectory(field, z0, TimeGrid.uniform(n), SolverConfig(order, delta_t, direction))
        return float(np.linalg.norm(out - target))

    errors = _map(terminal_error, list(step_counts), jobs)
    if max(errors) < EXACT_TOL:
        slope = None
    else:
        if min(errors) <= 0.0:
            raise ValueError(f"zero error at some but not all resolutions: {errors}")
        h = 1.0 / np.asarray(step_counts, dtype=float)
        slope = float(np.polyfit(np.log(h), np.log(errors), 1)[0])
    return ConvergenceReport(list(step_counts), errors, slope, getattr(field, "name", "field"), order)


def nfe_ablation(field, z0, total_nfe, orders=(1, 2, 3), condition=None, delta_t=0.01, jobs=1):
    """Invert -> denoise reconstruction MSE per order at a fixed evaluation budget.

    Order k runs N = floor(total_nfe / k) steps.  Rows are ``(order, N, mse)``.
    """
    if total_nfe < 3:
        raise ValueError(f"total_nfe must be at least 3, got {total_nfe}")

    def row(order):
        n = total_nfe // order
        grid = TimeGrid.uniform(n)
        inv, den = roundtrip(field, z0, grid, order, delta_t, condition)
        return order, n, mse(den.states[-1], z0)

    return _map(row, list(orders), jobs)


def edit_study(field, z0, grid, source_condition, target_condition, n_share_values, m_share=None,
               order=2, delta_t=0.01, share_probe=True):
    """Feature-sharing sweep; rows are ``(n_share, mse_to_reconstruction, mse_to_free_edit)``.

    The reconstruction reference is the unshared source-condition round trip;
    the free edit is the n_share = 0 output under the target condition.
    """
    config = SolverConfig(order, delta_t)
    m_share = field.n_blocks if m_share is None else m_share
    reference = reconstruct(field, z0, grid, config, source_condition)
    free = edit(field, z0, grid, config, source_condition, target_condition, ShareConfig(0, m_share))
    rows = []
    for n_share in n_share_values:
        out = edit(field, z0, grid, config, source_condition, target_condition,
                   ShareConfig(n_share, m_share, share_probe))
        rows.append((n_share, mse(out, reference), mse(out, free)))
    return rows


def write_curves_csv(curves, path, extra=None):
    meta = dict(extra or {})
    meta["columns"] = "t_i for i=0..N"
    rows = []
    if curves:
        rows.append(("t", curves[0].times))
    for c in curves:
        meta[f"order{c.metadata['order']}_N"] = c.metadata["N"]
        rows.append((f"mse_order{c.metadata['order']}", c.mse))
    write_csv(rows, path, metadata=meta)


def write_convergence_csv(report, path, extra=None):
    meta = dict(extra or {})
    meta.update(field=report.field_name, order=report.order,
                slope="exact" if report.exact else repr(report.slope))
    write_csv([("steps", report.step_counts), ("error", report.errors)], path, metadata=meta)


def write_ablation_csv(rows, path, extra=None):
    write_csv([(f"order{o}", [n, e]) for o, n, e in rows], path,
              metadata={**(extra or {}), "columns": "N,reconstruction_mse"})


def write_edit_csv(rows, path, extra=None):
    write_csv([(f"n_share{n}", [a, b]) for n, a, b in rows], path,
              metadata={**(extra or {}), "columns": "mse_to_reconstruction,mse_to_free_edit"})


def fitted_slope(xs, errors):
    """Least-squares slope of log(error) against log(x)."""
    return float(np.polyfit(np.log(xs), np.log(errors), 1)[0])


def is_exact(errors, tol=EXACT_TOL):
    return all(math.isfinite(e) and e < tol for e in errors)
