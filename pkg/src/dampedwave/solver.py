"""Unit-CFL transport/relaxation solver for the characteristic pair.

Transport moves ``rho`` one cell toward x=0 and ``xi`` one cell toward
x=1 per step (dt = dx), so advection is an exact permutation of cell
values and every discretization error lives in the relaxation source.
The source is integrated exactly per cell with a frozen coefficient:
the sum rho+xi is invariant and the difference decays by
exp(-2*(a/2 + b)*dt). Incoming wall values are produced from the
pre-shift outgoing traces through the boundary reflection coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional
import warnings

import numpy as np

from . import _kernels as K
from .core import (
    BlowUpError,
    BoundarySpec,
    DampingField,
    Grid,
    GridState,
    SimConfig,
    Splitting,
    sample_field,
    sample_perturbation,
)
from .diagnostics import DiagnosticsSeries, c0_constant

__all__ = [
    "apply_boundary",
    "transport_substep",
    "transport_substep_reversed",
    "source_substep",
    "step",
    "run",
    "RunResult",
    "Trajectory",
]


def apply_boundary(
    outgoing_left: float, outgoing_right: float, boundary: BoundarySpec
) -> tuple[float, float]:
    """Map outgoing wall traces to the incoming characteristic values.

    ``outgoing_left`` is the rho trace at x=0, ``outgoing_right`` the xi
    trace at x=1. Returns (incoming xi at x=0, incoming rho at x=1).
    """
    left, right = boundary.reflection
    return (left * outgoing_left, right * outgoing_right)


def transport_substep(state: GridState, boundary: BoundarySpec) -> GridState:
    """Shift rho one cell left and xi one cell right; close the walls.

    The vacated inflow cells take the boundary image of the pre-shift
    outgoing traces. Time advances by dx.
    """
    rho, xi = state.rho, state.xi
    in_left, in_right = apply_boundary(rho[0], xi[-1], boundary)
    out_rho = np.empty_like(rho)
    out_xi = np.empty_like(xi)
    K.shift_pair(rho, xi, in_left, in_right, out_rho, out_xi)
    return GridState(state.grid, out_rho, out_xi, state.t + state.grid.dx)


def transport_substep_reversed(state: GridState, boundary: BoundarySpec) -> GridState:
    """Invert one transport substep (used by the reversibility check).

    Requires non-zero reflection coefficients; the fully absorbing
    dynamic wall (kappa = 1) is not invertible.
    """
    left, right = boundary.reflection
    if left == 0.0 or right == 0.0:
        raise ValueError("transport with an absorbing wall cannot be reversed")
    dx = state.grid.dx
    if state.t < dx * (1.0 - 1e-9):
        raise ValueError("cannot reverse past t = 0")
    rho, xi = state.rho, state.xi
    out_rho = np.empty_like(rho)
    out_xi = np.empty_like(xi)
    out_rho[1:] = rho[:-1]
    out_rho[0] = xi[0] / left
    out_xi[:-1] = xi[1:]
    out_xi[-1] = rho[-1] / right
    return GridState(state.grid, out_rho, out_xi, state.t - dx)


def _decay_factor(cfg_damping: DampingField, grid, t_eval: float, dt: float) -> np.ndarray:
    a = sample_field(cfg_damping, grid, t_eval)
    q = 0.5 * a
    if cfg_damping.perturbation is not None:
        q = q + sample_perturbation(cfg_damping, grid, t_eval)
    return np.exp(-2.0 * q * dt)


def source_substep(
    state: GridState,
    damping: DampingField,
    dt: float,
    t_eval: Optional[float] = None,
) -> GridState:
    """Apply the exactly integrated local relaxation over ``dt``.

    Per cell, with q = a/2 + b frozen at ``t_eval`` (default: the state's
    own time): rho+xi is unchanged and rho-xi is scaled by exp(-2 q dt).
    Time bookkeeping is left to the caller (the substep does not move t).
    """
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    factor = _decay_factor(damping, state.grid, state.t if t_eval is None else t_eval, dt)
    out_rho = np.empty_like(state.rho)
    out_xi = np.empty_like(state.xi)
    K.relax_pair(state.rho, state.xi, factor, out_rho, out_xi)
    return GridState(state.grid, out_rho, out_xi, state.t)


class _Stepper:
    """Precomputed per-run stepping machinery shared by step() and run().

    Keeping a single code path guarantees that iterating step() and
    calling run() perform identical floating-point operations.
    """

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.grid = cfg.grid
        self.dt = cfg.dt
        self.left, self.right = cfg.boundary.reflection
        d = cfg.damping
        self.static = (not d.time_dependent) and d.perturbation is None
        if self.static:
            if cfg.splitting is Splitting.STRANG:
                self.factor_half = _decay_factor(d, self.grid, 0.0, 0.5 * self.dt)
            else:
                self.factor_full = _decay_factor(d, self.grid, 0.0, self.dt)

    def advance(self, rho: np.ndarray, xi: np.ndarray, t: float,
                buf_rho: np.ndarray, buf_xi: np.ndarray) -> None:
        """Advance (rho, xi) in place by one step starting from time t."""
        cfg = self.cfg
        dt = self.dt
        if cfg.splitting is Splitting.STRANG:
            # Coefficient frozen at the step midpoint for both half-sources
            # keeps the composition symmetric and the total exponent at
            # midpoint-rule accuracy for time-dependent coefficients.
            factor = self.factor_half if self.static else _decay_factor(
                cfg.damping, self.grid, t + 0.5 * dt, 0.5 * dt
            )
            K.relax_pair(rho, xi, factor, buf_rho, buf_xi)
            in_left = self.left * buf_rho[0]
            in_right = self.right * buf_xi[-1]
            K.shift_pair(buf_rho, buf_xi, in_left, in_right, rho, xi)
            K.relax_pair(rho, xi, factor, rho, xi)
        else:
            in_left = self.left * rho[0]
            in_right = self.right * xi[-1]
            K.shift_pair(rho, xi, in_left, in_right, buf_rho, buf_xi)
            factor = self.factor_full if self.static else _decay_factor(
                cfg.damping, self.grid, t, dt
            )
            K.relax_pair(buf_rho, buf_xi, factor, rho, xi)


def step(state: GridState, cfg: SimConfig) -> GridState:
    """Advance one full step: Lie (transport, source) or Strang halves."""
    if state.grid != cfg.grid:
        raise ValueError("state grid does not match the configuration grid")
    rho = state.rho.copy()
    xi = state.xi.copy()
    buf_rho = np.empty_like(rho)
    buf_xi = np.empty_like(xi)
    _Stepper(cfg).advance(rho, xi, state.t, buf_rho, buf_xi)
    return GridState(state.grid, rho, xi, state.t + cfg.dt)


@dataclass(frozen=True)
class Trajectory:
    """Full retained (rho, xi) history of a run, one row per step."""

    grid: Grid
    times: np.ndarray
    rho: np.ndarray
    xi: np.ndarray

    @property
    def dt(self) -> float:
        return self.grid.dx

    @property
    def n_rows(self) -> int:
        return self.times.shape[0]


class RunResult(NamedTuple):
    final: GridState
    series: DiagnosticsSeries
    trajectory: Optional[Trajectory]


def run(
    initial: GridState,
    cfg: SimConfig,
    recorder: Optional[DiagnosticsSeries] = None,
    retain: bool = False,
) -> RunResult:
    """Advance to t_final, recording diagnostics every ``record_every`` steps.

    The initial sample and the final step are always recorded. The
    dissipation functional is accumulated every step with the trapezoid
    rule so the energy-identity residual converges at the splitting
    order. ``retain=True`` additionally stores the full state history
    (memory scales as n_cells * n_steps). Aborts with `BlowUpError` when
    a non-finite state appears.
    """
    if initial.grid != cfg.grid:
        raise ValueError("initial state grid does not match the configuration grid")
    d = cfg.damping
    if d.perturbation is not None and d.perturbation_sup > cfg.perturbation_alpha:
        warnings.warn(
            f"perturbation sup-norm {d.perturbation_sup:.3g} exceeds the decay "
            f"heuristic threshold alpha={cfg.perturbation_alpha:.3g}; decay is "
            "not guaranteed",
            stacklevel=2,
        )

    grid = cfg.grid
    dx = grid.dx
    dt = cfg.dt
    n_steps = cfg.n_steps
    t0 = initial.t

    rho = initial.rho.copy()
    xi = initial.xi.copy()
    buf_rho = np.empty_like(rho)
    buf_xi = np.empty_like(xi)

    series = recorder if recorder is not None else DiagnosticsSeries(
        p=cfg.p, dx=dx, c0=c0_constant(initial)
    )

    a_now = sample_field(d, grid, t0)
    g_prev = K.dissipation_sum(a_now, rho, xi, cfg.p) * dx
    cum_mp = 0.0
    series.append(t0, rho, xi, cum_mp)

    if retain:
        hist_rho = np.empty((n_steps + 1, grid.n_cells))
        hist_xi = np.empty_like(hist_rho)
        hist_rho[0] = rho
        hist_xi[0] = xi

    stepper = _Stepper(cfg)
    t_now = t0
    for k in range(1, n_steps + 1):
        t_prev = t0 + (k - 1) * dt
        stepper.advance(rho, xi, t_prev, buf_rho, buf_xi)
        t_now = t0 + k * dt
        if not np.isfinite(rho).all():
            raise BlowUpError(k, "rho", t_now)
        if not np.isfinite(xi).all():
            raise BlowUpError(k, "xi", t_now)
        if d.time_dependent:
            a_now = sample_field(d, grid, t_now)
        g_now = K.dissipation_sum(a_now, rho, xi, cfg.p) * dx
        cum_mp += 0.5 * (g_prev + g_now) * dt
        g_prev = g_now
        if retain:
            hist_rho[k] = rho
            hist_xi[k] = xi
        if k % cfg.record_every == 0 or k == n_steps:
            series.append(t_now, rho, xi, cum_mp)

    final = GridState(grid, rho, xi, t_now)
    trajectory = None
    if retain:
        times = t0 + dt * np.arange(n_steps + 1)
        trajectory = Trajectory(grid=grid, times=times, rho=hist_rho, xi=hist_xi)
    return RunResult(final, series, trajectory)
