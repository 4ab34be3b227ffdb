"""Conversions between wave-equation data and the characteristic pair,
plus an independent d'Alembert reference solution.

The transform is the linear bijection rho = u_x + u_t, xi = u_x - u_t.
Displacement is recovered from ux by cumulative midpoint quadrature from
the left wall. The reference solution evaluates the classical formula on
reflected extensions of the data (odd for Dirichlet walls, even for
Neumann), with adaptive midpoint quadrature for the integral terms; it
shares no code with the solver and serves as its validation oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import BoundaryKind, BoundarySpec, Grid, GridState

__all__ = [
    "WaveState",
    "riemann_from_wave",
    "wave_from_riemann",
    "strain_from_displacement",
    "wall_anchor_series",
    "odd_extension",
    "even_extension",
    "odd_extension_in_x",
    "even_extension_in_x",
    "adaptive_midpoint",
    "dalembert_reference",
    "trace_derivatives_dalembert",
    "QuadratureError",
]


class QuadratureError(ArithmeticError):
    """Adaptive quadrature failed to reach the requested tolerance."""


@dataclass(frozen=True)
class WaveState:
    """Displacement, velocity, and strain samples at cell centers."""

    grid: Grid
    u: np.ndarray
    ut: np.ndarray
    ux: np.ndarray
    t: float = 0.0


def riemann_from_wave(u0_strain: np.ndarray, u1: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Characteristic data from strain and velocity samples.

    Consumes the strain d_x u0 directly (not u0) so the transform stays
    exact when the analytic derivative is available; see
    `strain_from_displacement` for the O(dx^2) numerical fallback.
    """
    u0_strain = np.asarray(u0_strain, dtype=np.float64)
    u1 = np.asarray(u1, dtype=np.float64)
    if u0_strain.shape != u1.shape:
        raise ValueError(
            f"strain and velocity lengths differ: {u0_strain.shape} vs {u1.shape}"
        )
    return u0_strain + u1, u0_strain - u1


def strain_from_displacement(u0: np.ndarray, dx: float) -> np.ndarray:
    """Second-order finite-difference strain from displacement samples."""
    return np.gradient(np.asarray(u0, dtype=np.float64), dx, edge_order=2)


def wave_from_riemann(
    state: GridState,
    boundary: BoundarySpec,
    anchor: Optional[float] = None,
) -> WaveState:
    """Reconstruct (u, ut, ux) from a characteristic state.

    ut = (rho - xi)/2 and ux = (rho + xi)/2 exactly; u is the cumulative
    midpoint quadrature of ux from the left wall. The wall value is 0 for
    Dirichlet; for Neumann/dynamic walls the caller supplies ``anchor``
    (typically integrated from the recorded wall velocity trace, see
    `wall_anchor_series`).
    """
    rho, xi = state.rho, state.xi
    ut = 0.5 * (rho - xi)
    ux = 0.5 * (rho + xi)
    if anchor is None:
        if boundary.kind is not BoundaryKind.DIRICHLET:
            raise ValueError(
                "anchor value required to reconstruct u for non-Dirichlet walls"
            )
        anchor = 0.0
    dx = state.grid.dx
    u = anchor + dx * np.cumsum(ux) - 0.5 * dx * ux
    return WaveState(grid=state.grid, u=u, ut=ut, ux=ux, t=state.t)


def wall_anchor_series(series, u0_left: float = 0.0) -> np.ndarray:
    """Left-wall displacement at recorded times by trapezoid time quadrature
    of the wall velocity trace (rho - xi)/2 at x = 0."""
    t = series.times
    ut_wall = 0.5 * (series.rho_left - series.xi_left)
    if t.size < 2:
        return np.full(t.shape, float(u0_left))
    increments = 0.5 * (ut_wall[1:] + ut_wall[:-1]) * np.diff(t)
    return u0_left + np.concatenate(([0.0], np.cumsum(increments)))


# ---------------------------------------------------------------------------
# Reflected extensions (period-2 unfolding, evaluated by arithmetic)
# ---------------------------------------------------------------------------

def _fold(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map real x to (z, sign) with z in [0, 1], odd-reflection parity.

    Both branches are exact in IEEE arithmetic (z = y verbatim, and 2 - y
    is exact for y in [1, 2] by Sterbenz), so points already inside [0, 1]
    evaluate bitwise-identically to the unextended function.
    """
    y = np.mod(x, 2.0)
    z = np.where(y <= 1.0, y, 2.0 - y)
    sign = np.where(y <= 1.0, 1.0, -1.0)
    return z, sign


def odd_extension(f: Callable) -> Callable:
    """Odd reflection about both walls: f(-x) = -f(x), f(2-x) = -f(x)."""

    def ext(x):
        z, sign = _fold(np.asarray(x, dtype=np.float64))
        out = sign * np.asarray(f(z), dtype=np.float64)
        return float(out) if np.ndim(x) == 0 else out

    return ext


def even_extension(f: Callable) -> Callable:
    """Even reflection about both walls: f(-x) = f(x), f(2-x) = f(x)."""

    def ext(x):
        z, _ = _fold(np.asarray(x, dtype=np.float64))
        out = np.asarray(f(z), dtype=np.float64)
        return float(out) if np.ndim(x) == 0 else out

    return ext


def odd_extension_in_x(g: Callable) -> Callable:
    """Odd reflection of a forcing g(t, x) in its spatial argument."""

    def ext(t, x):
        z, sign = _fold(np.asarray(x, dtype=np.float64))
        out = sign * np.asarray(g(t, z), dtype=np.float64)
        return float(out) if np.ndim(x) == 0 else out

    return ext


def even_extension_in_x(g: Callable) -> Callable:
    def ext(t, x):
        z, _ = _fold(np.asarray(x, dtype=np.float64))
        out = np.asarray(g(t, z), dtype=np.float64)
        return float(out) if np.ndim(x) == 0 else out

    return ext


# ---------------------------------------------------------------------------
# Adaptive midpoint quadrature
# ---------------------------------------------------------------------------

def _refine(f, a, b, fm, flm, frm, tol, depth):
    """Bisect [a, b] until two Richardson levels of midpoint sums agree.

    ``fm`` is f at the interval midpoint, ``flm``/``frm`` at the child
    midpoints (the quarter points); children reuse the grandchild
    evaluations, so each node costs four new samples.
    """
    h = b - a
    m = a + 0.5 * h
    one = h * fm
    two = 0.5 * h * (flm + frm)
    corrected = two + (two - one) / 3.0
    f1 = f(a + 0.125 * h)
    f2 = f(a + 0.375 * h)
    f3 = f(a + 0.625 * h)
    f4 = f(a + 0.875 * h)
    two_left = 0.25 * h * (f1 + f2)
    two_right = 0.25 * h * (f3 + f4)
    corr_left = two_left + (two_left - 0.5 * h * flm) / 3.0
    corr_right = two_right + (two_right - 0.5 * h * frm) / 3.0
    better = corr_left + corr_right
    if abs(better - corrected) <= tol or h <= 1e-14 * max(1.0, abs(a), abs(b)):
        return better + (better - corrected) / 15.0
    if depth <= 0:
        raise QuadratureError(
            f"adaptive midpoint did not converge on [{a}, {b}] at tolerance {tol}"
        )
    return _refine(f, a, m, flm, f1, f2, 0.5 * tol, depth - 1) + _refine(
        f, m, b, frm, f3, f4, 0.5 * tol, depth - 1
    )


def adaptive_midpoint(f: Callable, a: float, b: float, tol: float = 1e-10,
                      max_depth: int = 48, breakpoints=()) -> float:
    """Adaptive midpoint quadrature with Richardson extrapolation.

    Every sample sits at a panel midpoint; panels are bisected until two
    extrapolation levels agree within the tolerance. The interval is
    pre-split at integer points, where the reflected extensions have
    kinks, plus any caller-supplied ``breakpoints``. Splitting at known
    kinks matters: around a symmetric kink the midpoint sums of a
    piecewise-linear integrand agree at every level, which would silently
    defeat the refinement criterion. Raises `QuadratureError` when the
    recursion depth is exhausted.
    """
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    if a > b:
        return -adaptive_midpoint(f, b, a, tol, max_depth, breakpoints)
    cuts = {a, b}
    k = math.floor(a) + 1
    while k < b:
        if k > a:
            cuts.add(float(k))
        k += 1
    for point in breakpoints:
        point = float(point)
        if a < point < b:
            cuts.add(point)
    ordered = sorted(cuts)
    total = 0.0
    n_pieces = len(ordered) - 1
    for lo, hi in zip(ordered[:-1], ordered[1:]):
        h = hi - lo
        fm = f(lo + 0.5 * h)
        flm = f(lo + 0.25 * h)
        frm = f(lo + 0.75 * h)
        total += _refine(f, lo, hi, fm, flm, frm, tol / n_pieces, max_depth)
    return total


def _characteristic_crossing_times(t: float, x: float) -> list[float]:
    """Times in (0, t) at which x + t - tau or x - t + tau hits an integer.

    These are the kinks of the forcing line- and slab-integrands when the
    forcing is a reflected extension.
    """
    out = []
    for k in range(math.floor(x - t), math.ceil(x + t) + 1):
        for tau in (x + t - k, k - x + t):
            if 0.0 < tau < t:
                out.append(tau)
    return out


# ---------------------------------------------------------------------------
# d'Alembert reference solution
# ---------------------------------------------------------------------------

def dalembert_reference(
    u0_ext: Optional[Callable],
    u1_ext: Optional[Callable],
    g_ext: Optional[Callable],
    t: float,
    x: float,
    tol: float = 1e-10,
) -> float:
    """Classical whole-line solution evaluated at (t, x).

    u = (u0(x-t) + u0(x+t))/2 + (1/2) int_{x-t}^{x+t} u1
      + (1/2) int_0^t int_{x-t+tau}^{x+t-tau} g(tau, y) dy dtau.

    All data must already be extended to the real line (odd for Dirichlet
    walls, even for Neumann); pass None for absent terms.
    """
    t = float(t)
    x = float(x)
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    value = 0.0
    if u0_ext is not None:
        value += 0.5 * (float(u0_ext(x - t)) + float(u0_ext(x + t)))
    if u1_ext is not None and t > 0.0:
        value += 0.5 * adaptive_midpoint(u1_ext, x - t, x + t, tol)
    if g_ext is not None and t > 0.0:
        inner_tol = tol / (4.0 * max(t, 1.0))
        kinks = _characteristic_crossing_times(t, x)

        def sliced(tau):
            return adaptive_midpoint(
                lambda y: float(g_ext(tau, y)), x - t + tau, x + t - tau, inner_tol
            )

        value += 0.5 * adaptive_midpoint(sliced, 0.0, t, tol, breakpoints=kinks)
    return value


def trace_derivatives_dalembert(
    du0_ext: Optional[Callable],
    u1_ext: Optional[Callable],
    g_ext: Optional[Callable],
    t: float,
    x: float,
    tol: float = 1e-10,
) -> tuple[float, float]:
    """(u_t, u_x) of the d'Alembert solution at (t, x).

    The forcing contributes characteristic-line integrals
    (1/2) int_0^t g(tau, x + t - tau) +- g(tau, x - t + tau) dtau.
    ``du0_ext`` is the extension of the strain: derivative parity flips,
    so pass the even extension of u0' for Dirichlet walls and the odd
    extension for Neumann walls.
    """
    t = float(t)
    x = float(x)
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    ut = 0.0
    ux = 0.0
    if du0_ext is not None:
        plus = float(du0_ext(x + t))
        minus = float(du0_ext(x - t))
        ut += 0.5 * (plus - minus)
        ux += 0.5 * (plus + minus)
    if u1_ext is not None:
        plus = float(u1_ext(x + t))
        minus = float(u1_ext(x - t))
        ut += 0.5 * (plus + minus)
        ux += 0.5 * (plus - minus)
    if g_ext is not None and t > 0.0:
        kinks = _characteristic_crossing_times(t, x)
        fwd = adaptive_midpoint(lambda tau: float(g_ext(tau, x + t - tau)), 0.0, t, tol,
                                breakpoints=kinks)
        bwd = adaptive_midpoint(lambda tau: float(g_ext(tau, x - t + tau)), 0.0, t, tol,
                                breakpoints=kinks)
        ut += 0.5 * (fwd + bwd)
        ux += 0.5 * (fwd - bwd)
    return ut, ux
