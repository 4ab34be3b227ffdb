"""Numeric verification lab for the three core inequalities.

Checks, on sampled functions and retained solver trajectories:

* the sign and lower bound of the scalar monotonicity gap
  (alpha - beta)(alpha|alpha|^{p-2} - beta|beta|^{p-2}), with a
  brute-forced admissible constant;
* the dissipation bound relating the weighted oscillation integral
  to the dissipation functional m_p;
* the mean-oscillation inequality with its constructive constant
  2^p n^{p+1};
* the characteristic-difference relation along right-moving diagonals;
* the witness-point trace bound inside the damped strip.

Randomized suites draw from a counter-based generator keyed by
(seed, trial index) so trials are reproducible and order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .core import DampingField, sample_field
from .solver import Trajectory

__all__ = [
    "monotonicity_gap",
    "gap_lower_bound",
    "best_gap_constant",
    "SampledPath",
    "sample_path",
    "mean_oscillation_bound",
    "oscillation_constant",
    "lem_ineq_bound",
    "trajectory_mp",
    "characteristic_difference_check",
    "witness_point_search",
    "strip_oscillation_integral",
    "rng_for_trial",
    "random_step_path",
    "random_trig_path",
    "InequalityViolationError",
    "GridTooCoarseError",
]


class InequalityViolationError(AssertionError):
    """A verified inequality failed; carries the offending payload."""

    def __init__(self, message: str, payload: Optional[dict] = None):
        self.payload = payload or {}
        super().__init__(message)


class GridTooCoarseError(ValueError):
    """No cell centers fall inside the requested search interval."""


# ---------------------------------------------------------------------------
# Scalar monotonicity gap
# ---------------------------------------------------------------------------

def _signed_power(v, p_minus_1):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.abs(v) ** p_minus_1


def monotonicity_gap(alpha, beta, p: float):
    """(alpha - beta)(alpha|alpha|^{p-2} - beta|beta|^{p-2}), elementwise.

    Non-negative for every real pair and p > 1 (with 0*|0|^{p-2} = 0);
    this sign is what makes the dissipation functional one-signed.
    """
    if not (1.0 < p < math.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    out = (alpha - beta) * (_signed_power(alpha, p - 1.0) - _signed_power(beta, p - 1.0))
    return float(out) if out.ndim == 0 else out


def gap_lower_bound(alpha, beta, p: float):
    """The comparison quantity: |a-b|^p for p >= 2, else min(|a-b|^p, |a-b|^2)."""
    diff = np.abs(np.asarray(alpha, dtype=np.float64) - np.asarray(beta, dtype=np.float64))
    if p >= 2.0:
        out = diff**p
    else:
        out = np.minimum(diff**p, diff**2)
    return float(out) if out.ndim == 0 else out


def best_gap_constant(p: float, n_beta: int = 20001) -> float:
    """Brute-forced admissible constant C_p with gap >= C_p * bound.

    Homogeneity and symmetry reduce the search to alpha = 1 and beta in
    [-1, 1). The endpoint beta -> 1 is governed by a Taylor expansion:
    the ratio tends to p - 1 for p < 2 and diverges for p > 2.
    """
    if not (1.0 < p < math.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    beta = np.linspace(-1.0, 1.0, n_beta)[:-1]
    ratio = monotonicity_gap(1.0, beta, p) / gap_lower_bound(1.0, beta, p)
    c = float(np.min(ratio))
    if p < 2.0:
        c = min(c, p - 1.0)
    return c


# ---------------------------------------------------------------------------
# Mean-oscillation inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampledPath:
    """Uniform node samples of a function on (0, span).

    Nodes sit at j*step for j = 0..len-1, so step*(len-1) spans the
    declared interval.
    """

    values: np.ndarray
    step: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 3:
            raise ValueError("values must be a 1-d array with at least 3 nodes")
        if not np.isfinite(values).all():
            raise ValueError("values must be finite")
        if not (self.step > 0.0):
            raise ValueError(f"step must be positive, got {self.step}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def span(self) -> float:
        return self.step * (self.values.size - 1)


def sample_path(fn, L: float, l: float, nodes_per_unit: int = 160) -> SampledPath:
    """Sample ``fn`` on a grid commensurate with (L, l).

    The step divides both L and l with even quotients, which keeps
    composite Simpson applicable on every sub-range.
    """
    step = 1.0 / nodes_per_unit
    m = round(L / step)
    k = round(l / step)
    if abs(m * step - L) > 1e-12 or abs(k * step - l) > 1e-12 or m % 2 or k % 2 or k < 2:
        raise ValueError(
            f"nodes_per_unit={nodes_per_unit} is not commensurate with L={L}, l={l}"
        )
    x = step * np.arange(m + k + 1)
    return SampledPath(values=np.asarray(fn(x), dtype=np.float64), step=step)


def oscillation_constant(l_over_L: float, p: float) -> tuple[int, float]:
    """(n, 2^p n^{p+1}) with n the smallest integer >= 2 such that 2/n <= l/L.

    Shift windows larger than the rescaled domain only strengthen the
    right-hand side, so l/L is clamped to 1.
    """
    ratio = min(float(l_over_L), 1.0)
    if ratio <= 0.0:
        raise ValueError("l/L must be positive")
    n = max(2, math.ceil(2.0 / ratio - 1e-12))
    return n, (2.0**p) * float(n) ** (p + 1.0)


def _simpson_weights(n_panels: int, h: float) -> np.ndarray:
    if n_panels % 2 or n_panels < 2:
        raise ValueError("composite Simpson needs an even panel count >= 2")
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def mean_oscillation_bound(
    u: SampledPath,
    L: float,
    l: float,
    p: float,
    rule: str = "simpson",
) -> tuple[float, float, float]:
    """Check int_0^L |u - mean|^p <= C int_0^l int_0^L |u(x+s) - u(x)|^p dx ds.

    Returns (lhs, rhs, C) and raises `InequalityViolationError` when the
    bound fails beyond roundoff. C is the constructive constant
    2^p n^{p+1} rescaled by 1/L (the proof normalizes L to 1).

    ``rule`` selects the quadrature: "simpson" (exact for smooth data up
    to O(h^4)) or "step" (left rectangles in x, trapezoid in the shift,
    which integrates node-aligned step functions exactly).
    """
    if not (l > 0.0 and L > l):
        raise ValueError(f"need L > l > 0, got L={L}, l={l}")
    if not (1.0 <= p < math.inf):
        raise ValueError(f"p must lie in [1, inf), got {p}")
    h = u.step
    vals = u.values
    m = round(L / h)
    k = round(l / h)
    if abs(m * h - L) > 1e-9 * L or abs(k * h - l) > 1e-9 * l:
        raise ValueError("sample step is not commensurate with (L, l)")
    if m + k > vals.size - 1:
        raise ValueError("samples do not span (0, L + l)")
    if rule == "simpson":
        wx = _simpson_weights(m, h)
        ws = _simpson_weights(k, h)
    elif rule == "step":
        wx = np.full(m + 1, h)
        wx[-1] = 0.0
        ws = np.full(k + 1, h)
        ws[0] = 0.5 * h
        ws[-1] = 0.5 * h
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")

    base = vals[: m + 1]
    mean = float(np.dot(wx, base)) / L
    lhs = float(np.dot(wx, np.abs(base - mean) ** p))
    f = K.shifted_diff_pow_sums(vals, wx, k, p)
    rhs = float(np.dot(ws, f))
    n, c_unit = oscillation_constant(l / L, p)
    constant = c_unit / L
    slack = 1e-12 * max(1.0, float(np.max(np.abs(vals))) ** p) * max(1.0, L)
    if lhs > constant * rhs + slack:
        raise InequalityViolationError(
            f"mean-oscillation bound failed: lhs={lhs!r} > {constant!r} * rhs={rhs!r}",
            payload={"lhs": lhs, "rhs": rhs, "constant": constant, "n": n,
                     "L": L, "l": l, "p": p, "values": vals},
        )
    return lhs, rhs, constant


# ---------------------------------------------------------------------------
# Trajectory-based checks
# ---------------------------------------------------------------------------

def _time_weights(n_rows: int, dt: float) -> np.ndarray:
    w = np.full(n_rows, dt)
    w[0] = 0.5 * dt
    w[-1] = 0.5 * dt
    return w


def _field_rows(traj: Trajectory, damping: DampingField) -> np.ndarray:
    """Damping samples per retained row; one sample when time-independent."""
    if damping.time_dependent:
        return np.stack(
            [sample_field(damping, traj.grid, float(t)) for t in traj.times]
        )
    a = sample_field(damping, traj.grid, float(traj.times[0]))
    return np.broadcast_to(a, (traj.n_rows, a.size))


def trajectory_mp(traj: Trajectory, damping: DampingField, p: float) -> float:
    """m_p over the retained window: trapezoid in time, midpoint in space.

    Matches the accumulation rule used by the run recorder, so for a run
    retained at every step this equals the final cumulative_mp sample.
    """
    a_rows = _field_rows(traj, damping)
    w = _time_weights(traj.n_rows, traj.dt)
    acc = 0.0
    for i in range(traj.n_rows):
        acc += w[i] * K.dissipation_sum(a_rows[i], traj.rho[i], traj.xi[i], p)
    return acc * traj.grid.dx


def lem_ineq_bound(traj: Trajectory, damping: DampingField, p: float) -> tuple[float, float]:
    """(lhs, rhs) of the dissipation bound on a retained trajectory.

    lhs is the space-time integral of a |rho - xi|^p; rhs is m_p for
    p >= 2 and m_p + m_p^{2/p} for 1 < p < 2. The caller asserts
    lhs <= C * rhs with an admissible constant (see `best_gap_constant`).
    At p = 2 the two integrands coincide, so lhs equals m_2 exactly.
    """
    if not (1.0 < p < math.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    a_rows = _field_rows(traj, damping)
    w = _time_weights(traj.n_rows, traj.dt)
    lhs = 0.0
    for i in range(traj.n_rows):
        lhs += w[i] * K.weighted_abs_pow_sum(a_rows[i], traj.rho[i], traj.xi[i], p)
    lhs *= traj.grid.dx
    mp = trajectory_mp(traj, damping, p)
    rhs = mp if p >= 2.0 else mp + mp ** (2.0 / p)
    return lhs, rhs


def _row_index(traj: Trajectory, t: float, what: str) -> int:
    dt = traj.dt
    k = round((t - float(traj.times[0])) / dt)
    if k < 0 or k >= traj.n_rows or abs(traj.times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"{what}={t} is not a retained sample time")
    return k


def _center_index(traj: Trajectory, y: float) -> int:
    centers = traj.grid.centers
    i = int(round(y / traj.grid.dx - 0.5))
    if i < 0 or i >= centers.size or abs(centers[i] - y) > 1e-9:
        raise ValueError(f"y={y} is not a cell center")
    return i


def characteristic_difference_check(
    traj: Trajectory, damping: DampingField, t: float, s: float, y: float
) -> float:
    """Residual of the right-moving characteristic relation at (t, s, y).

    Evaluates | xi(t+s, y+s) - xi(t, y)
                - (1/2) sum a (rho - xi) dx along the diagonal |
    with trapezoid weights on the diagonal samples. Requires s to be a
    non-negative multiple of dx, y a cell center, and the whole diagonal
    inside the retained window and the domain.
    """
    if s < 0.0:
        raise ValueError(f"s must be >= 0, got {s}")
    dt = traj.dt
    j = round(s / dt)
    if abs(j * dt - s) > 1e-9:
        raise ValueError(f"s={s} is not a multiple of dx={dt}")
    k0 = _row_index(traj, t, "t")
    i0 = _center_index(traj, y)
    if k0 + j >= traj.n_rows:
        raise ValueError("trajectory window does not cover [t, t+s]")
    if i0 + j >= traj.grid.n_cells:
        raise ValueError("diagonal leaves the domain before reaching t+s")
    if j == 0:
        return 0.0
    rows = np.arange(k0, k0 + j + 1)
    cols = np.arange(i0, i0 + j + 1)
    d_diag = traj.rho[rows, cols] - traj.xi[rows, cols]
    a_diag = np.empty(j + 1)
    centers = traj.grid.centers
    for m in range(j + 1):
        a_diag[m] = float(np.asarray(damping.evaluate(float(traj.times[rows[m]]),
                                                      float(centers[cols[m]]))))
    w = _time_weights(j + 1, dt)
    integral = float(np.dot(w, a_diag * d_diag))
    jump = float(traj.xi[rows[-1], cols[-1]] - traj.xi[k0, i0])
    return abs(jump - 0.5 * integral)


def witness_point_search(
    traj: Trajectory, x0: float, eps0: float, p: float
) -> tuple[float, float]:
    """Cell center z in (x0 - eps0/2, x0 + eps0/2) minimizing the trace
    integral int |rho - xi|^p (t, z) dt over the retained window.

    Returns (z, integral). Raises `GridTooCoarseError` when no cell
    center falls inside the search interval.
    """
    centers = traj.grid.centers
    inside = (centers > x0 - 0.5 * eps0) & (centers < x0 + 0.5 * eps0)
    if not inside.any():
        raise GridTooCoarseError(
            f"no cell centers in ({x0 - eps0 / 2}, {x0 + eps0 / 2}); refine the grid"
        )
    w = _time_weights(traj.n_rows, traj.dt)
    d_pow = np.abs(traj.rho[:, inside] - traj.xi[:, inside]) ** p
    integrals = w @ d_pow
    best = int(np.argmin(integrals))
    z = float(centers[inside][best])
    return z, float(integrals[best])


def strip_oscillation_integral(traj: Trajectory, x0: float, eps0: float, p: float) -> float:
    """Space-time integral of |rho - xi|^p over the strip (x0-eps0, x0+eps0).

    The witness trace is bounded by this integral divided by eps0
    (minimum over the half-width search window beats its average).
    """
    centers = traj.grid.centers
    inside = (centers > x0 - eps0) & (centers < x0 + eps0)
    if not inside.any():
        raise GridTooCoarseError(f"no cell centers in the strip around x0={x0}")
    w = _time_weights(traj.n_rows, traj.dt)
    d_pow = np.abs(traj.rho[:, inside] - traj.xi[:, inside]) ** p
    return float(np.sum(w @ d_pow) * traj.grid.dx)


# ---------------------------------------------------------------------------
# Reproducible randomized inputs
# ---------------------------------------------------------------------------

def rng_for_trial(seed: int, trial: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, trial index)."""
    key = np.array([seed, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def random_step_path(rng: np.random.Generator, L: float, l: float,
                     nodes_per_unit: int = 160) -> SampledPath:
    """Piecewise-constant path with jumps on the node grid.

    Node-aligned jumps make the "step" quadrature rule exact, so the
    continuum inequality applies verbatim to the sampled sums.
    """
    step = 1.0 / nodes_per_unit
    n_nodes = round((L + l) / step) + 1
    n_pieces = int(rng.integers(2, 30))
    breaks = np.sort(rng.choice(np.arange(1, n_nodes - 1), size=min(n_pieces - 1, n_nodes - 2),
                                replace=False))
    levels = rng.uniform(-1.0, 1.0, size=breaks.size + 1)
    values = np.empty(n_nodes)
    start = 0
    for b, lev in zip(np.append(breaks, n_nodes), levels):
        values[start:int(b)] = lev
        start = int(b)
    return SampledPath(values=values, step=step)


def random_trig_path(rng: np.random.Generator, L: float, l: float,
                     nodes_per_unit: int = 160, max_modes: int = 6) -> SampledPath:
    """Random trigonometric polynomial sampled on a commensurate grid."""
    span = L + l
    n_modes = int(rng.integers(1, max_modes + 1))
    amp_cos = rng.normal(0.0, 1.0, size=n_modes) / np.arange(1, n_modes + 1)
    amp_sin = rng.normal(0.0, 1.0, size=n_modes) / np.arange(1, n_modes + 1)
    offset = float(rng.normal(0.0, 1.0))

    def fn(x):
        out = np.full_like(np.asarray(x, dtype=np.float64), offset)
        for j in range(n_modes):
            w = 2.0 * math.pi * (j + 1) / span
            out = out + amp_cos[j] * np.cos(w * x) + amp_sin[j] * np.sin(w * x)
        return out

    return sample_path(fn, L, l, nodes_per_unit)
