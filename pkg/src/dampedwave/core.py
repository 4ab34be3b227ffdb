"""Domain types for the damped-wave transport toolkit.

The domain is the unit interval with unit wave speed. A uniform
cell-centered grid carries the two counter-propagating characteristic
fields ``rho`` (left-moving) and ``xi`` (right-moving); a space-time
damping coefficient acts through a local relaxation source; one of three
wall couplings (Dirichlet, Neumann, dynamic) closes the incoming
characteristics. All types are immutable after construction and safe to
share between threads; field evaluation is re-entrant.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Grid",
    "GridState",
    "ActiveRegion",
    "DampingField",
    "BoundaryKind",
    "BoundarySpec",
    "Splitting",
    "SimConfig",
    "dirichlet",
    "neumann",
    "make_boundary_dynamic",
    "zero_field",
    "constant_field",
    "indicator_field",
    "smoothed_pulse_field",
    "tabulated_field",
    "with_standard_perturbation",
    "sample_field",
    "sample_perturbation",
    "validate_field",
    "FieldEvaluationError",
    "BlowUpError",
    "ConfigError",
]

_EPS = float(np.finfo(np.float64).eps)


class FieldEvaluationError(ValueError):
    """A coefficient evaluated to a non-finite value at a named point."""


class BlowUpError(RuntimeError):
    """The evolved state became non-finite; carries step index and quantity."""

    def __init__(self, step: int, quantity: str, t: float):
        self.step = step
        self.quantity = quantity
        self.t = t
        super().__init__(
            f"non-finite {quantity} detected at step {step} (t={t:.6g})"
        )


class ConfigError(ValueError):
    """Configuration document is invalid; carries line number and key."""

    def __init__(self, message: str, *, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on (0, 1) with ``n_cells`` cells.

    Cell width is ``dx = 1/n_cells`` and cell centers sit at
    ``x_i = (i + 1/2) * dx``. Time stepping elsewhere locks ``dt = dx``
    (unit CFL); the grid itself is purely spatial.
    """

    n_cells: int

    def __post_init__(self):
        if not isinstance(self.n_cells, (int, np.integer)) or self.n_cells < 2:
            raise ValueError(f"n_cells must be an integer >= 2, got {self.n_cells!r}")
        if abs(self.dx * self.n_cells - 1.0) > 4.0 * _EPS:
            raise ValueError("dx * n_cells does not reproduce the unit interval")
        centers = (np.arange(self.n_cells, dtype=np.float64) + 0.5) * self.dx
        centers.flags.writeable = False
        object.__setattr__(self, "_centers", centers)

    @property
    def dx(self) -> float:
        return 1.0 / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        """Read-only array of cell-center coordinates."""
        return self._centers


def _frozen_array(values, n: Optional[int] = None) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-d array, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"expected length {n}, got {arr.shape[0]}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class GridState:
    """The characteristic pair sampled at cell centers at one time instant.

    ``rho`` is the left-moving field (u_x + u_t), ``xi`` the right-moving
    one (u_x - u_t). Arrays are copied and frozen; entries must be finite.
    """

    grid: Grid
    rho: np.ndarray
    xi: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        n = self.grid.n_cells
        object.__setattr__(self, "rho", _frozen_array(self.rho, n))
        object.__setattr__(self, "xi", _frozen_array(self.xi, n))
        if not np.isfinite(self.rho).all():
            raise ValueError("rho contains non-finite entries")
        if not np.isfinite(self.xi).all():
            raise ValueError("xi contains non-finite entries")
        if self.t < 0.0:
            raise ValueError(f"t must be >= 0, got {self.t}")

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells


@dataclass(frozen=True)
class ActiveRegion:
    """Support metadata for a damping coefficient.

    The coefficient is promised to be at least ``lam`` on the strip
    ``(x0 - eps0, x0 + eps0)`` for all times, and bounded by ``sup_norm``
    everywhere. Used by the lemma harness to locate witness points.
    """

    lam: float
    x0: float
    eps0: float
    sup_norm: float

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")
        if not (0.0 < self.x0 < 1.0):
            raise ValueError("x0 must lie in (0, 1)")
        if self.eps0 <= 0:
            raise ValueError("eps0 must be positive")
        if not (self.x0 - self.eps0 >= 0.0 and self.x0 + self.eps0 <= 1.0):
            raise ValueError("the active strip must be contained in (0, 1)")
        if self.sup_norm < self.lam:
            raise ValueError("sup_norm cannot be smaller than lam")


@dataclass(frozen=True)
class DampingField:
    """Evaluable space-time damping coefficient with optional perturbation.

    ``evaluate(t, x)`` must accept scalar ``x`` and may accept arrays; it
    must be re-entrant (no internal mutation). ``region`` declares where
    the coefficient is uniformly positive. ``perturbation`` is a second,
    sign-indefinite coefficient entering the relaxation exponent alongside
    half the main one; ``perturbation_sup`` bounds its magnitude.
    ``time_dependent=False`` lets the solver sample the coefficient once.
    """

    evaluate: Callable[[float, np.ndarray], np.ndarray]
    region: Optional[ActiveRegion] = None
    perturbation: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    perturbation_sup: float = 0.0
    time_dependent: bool = True


class BoundaryKind(enum.Enum):
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class BoundarySpec:
    """Coupling rule for the incoming characteristic at each wall.

    The incoming trace is the outgoing one scaled by a reflection
    coefficient: +1 for Dirichlet (rho = xi at walls), -1 for Neumann
    (rho = -xi), and c0 = c1 = (kappa-1)/(kappa+1) for the dynamic
    impedance condition, which lies in (-1, 1) for every kappa > 0.
    """

    kind: BoundaryKind
    kappa: Optional[float] = None
    c0: Optional[float] = None
    c1: Optional[float] = None

    def __post_init__(self):
        if self.kind is BoundaryKind.DYNAMIC:
            if self.kappa is None or self.c0 is None or self.c1 is None:
                raise ValueError("dynamic boundary requires kappa, c0, c1")
            if not (abs(self.c0) < 1.0 and abs(self.c1) < 1.0):
                raise ValueError("dynamic reflection coefficients must lie in (-1, 1)")
        elif self.kappa is not None or self.c0 is not None or self.c1 is not None:
            raise ValueError(f"{self.kind.value} boundary takes no coefficients")

    @property
    def reflection(self) -> tuple[float, float]:
        """(left, right) scale factors mapping outgoing to incoming traces."""
        if self.kind is BoundaryKind.DIRICHLET:
            return (1.0, 1.0)
        if self.kind is BoundaryKind.NEUMANN:
            return (-1.0, -1.0)
        return (self.c0, self.c1)


def dirichlet() -> BoundarySpec:
    return BoundarySpec(BoundaryKind.DIRICHLET)


def neumann() -> BoundarySpec:
    return BoundarySpec(BoundaryKind.NEUMANN)


def make_boundary_dynamic(kappa: float) -> BoundarySpec:
    """Dynamic (impedance) boundary with c0 = c1 = (kappa-1)/(kappa+1)."""
    kappa = float(kappa)
    if not (kappa > 0.0) or not math.isfinite(kappa):
        raise ValueError(f"kappa must be a positive real, got {kappa!r}")
    c = (kappa - 1.0) / (kappa + 1.0)
    return BoundarySpec(BoundaryKind.DYNAMIC, kappa=kappa, c0=c, c1=c)


class Splitting(enum.Enum):
    LIE = "lie"
    STRANG = "strang"


@dataclass(frozen=True)
class SimConfig:
    """Everything a simulation run needs besides the initial state.

    The time step is locked to dt = dx (unit CFL), so transport is an
    exact cell shift and the number of steps is round(t_final / dx).
    ``p`` selects the L^p diagnostics exponent and must lie in (1, inf).
    ``perturbation_alpha`` is the warning threshold on the perturbation
    sup-norm (the smallness constant is non-constructive, so this is a
    configurable heuristic, not a guarantee).
    """

    grid: Grid
    boundary: BoundarySpec
    damping: DampingField
    t_final: float
    p: float = 2.0
    record_every: int = 1
    splitting: Splitting = Splitting.STRANG
    perturbation_alpha: float = 0.05

    def __post_init__(self):
        if not (self.t_final >= 0.0) or not math.isfinite(self.t_final):
            raise ValueError(f"t_final must be a finite non-negative real, got {self.t_final}")
        if not (1.0 < self.p < math.inf):
            raise ValueError(f"p must lie in (1, inf), got {self.p}")
        if not isinstance(self.record_every, (int, np.integer)) or self.record_every < 1:
            raise ValueError(f"record_every must be a positive integer, got {self.record_every!r}")

    @property
    def dt(self) -> float:
        return self.grid.dx

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.grid.dx))


# ---------------------------------------------------------------------------
# Damping-field presets
# ---------------------------------------------------------------------------

def zero_field() -> DampingField:
    """Identically-zero coefficient (conservative dynamics)."""

    def evaluate(t, x):
        return np.zeros_like(np.asarray(x, dtype=np.float64))

    return DampingField(evaluate=evaluate, region=None, time_dependent=False)


def constant_field(lam: float = 1.0) -> DampingField:
    """Coefficient equal to ``lam`` on the whole space-time cylinder."""
    if lam <= 0:
        raise ValueError("lam must be positive")

    def evaluate(t, x):
        return np.full_like(np.asarray(x, dtype=np.float64), lam)

    region = ActiveRegion(lam=lam, x0=0.5, eps0=0.25, sup_norm=lam)
    return DampingField(evaluate=evaluate, region=region, time_dependent=False)


def indicator_field(lam: float = 1.0, x0: float = 0.5, eps0: float = 0.1) -> DampingField:
    """Coefficient ``lam`` on the strip (x0-eps0, x0+eps0), zero outside.

    Defaults are desk-scale choices, not canonical values.
    """
    region = ActiveRegion(lam=lam, x0=x0, eps0=eps0, sup_norm=lam)

    def evaluate(t, x):
        x = np.asarray(x, dtype=np.float64)
        return np.where((x > x0 - eps0) & (x < x0 + eps0), lam, 0.0)

    return DampingField(evaluate=evaluate, region=region, time_dependent=False)


def _smoothstep(r):
    r = np.clip(r, 0.0, 1.0)
    return r * r * r * (r * (6.0 * r - 15.0) + 10.0)


def smoothed_pulse_field(
    base: float = 1.0,
    modulation: float = 0.5,
    x0: float = 0.5,
    eps0: float = 0.1,
    width: float = 0.05,
) -> DampingField:
    """Smooth time-modulated coefficient: base + modulation*sin(2 pi t)*bump(x).

    ``bump`` is a C^2 plateau supported on (x0-eps0, x0+eps0) with quintic
    smoothstep shoulders of the given width. Requires base > |modulation|
    so the coefficient stays positive everywhere.
    """
    if base <= abs(modulation):
        raise ValueError("base must exceed |modulation| to keep the coefficient positive")
    if not (0.0 < width <= eps0):
        raise ValueError("shoulder width must lie in (0, eps0]")

    def bump(x):
        x = np.asarray(x, dtype=np.float64)
        return _smoothstep((x - (x0 - eps0)) / width) * _smoothstep(((x0 + eps0) - x) / width)

    def evaluate(t, x):
        return base + modulation * math.sin(2.0 * math.pi * t) * bump(x)

    lam = base - abs(modulation)
    region = ActiveRegion(lam=lam, x0=x0, eps0=eps0, sup_norm=base + abs(modulation))
    return DampingField(evaluate=evaluate, region=region, time_dependent=True)


def tabulated_field(
    times: np.ndarray,
    positions: np.ndarray,
    values: np.ndarray,
    region: Optional[ActiveRegion] = None,
) -> DampingField:
    """Coefficient from a sampled space-time table.

    Lookup is nearest in time and nearest in space; the solver contract
    only needs pointwise evaluation, so no interpolation is attempted.
    ``values`` has shape (len(times), len(positions)).
    """
    times = np.asarray(times, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (times.size, positions.size):
        raise ValueError(
            f"values shape {values.shape} does not match (n_times={times.size}, n_positions={positions.size})"
        )
    if times.size == 0 or positions.size == 0:
        raise ValueError("table must contain at least one time and one position")
    if np.any(np.diff(times) <= 0) or np.any(np.diff(positions) <= 0):
        raise ValueError("table axes must be strictly increasing")

    def evaluate(t, x):
        it = int(np.argmin(np.abs(times - t)))
        ix = np.argmin(np.abs(positions[None, :] - np.atleast_1d(x)[:, None]), axis=1)
        out = values[it, ix]
        return out if np.ndim(x) else float(out[0])

    return DampingField(evaluate=evaluate, region=region, time_dependent=times.size > 1)


def with_standard_perturbation(damping: DampingField, amplitude: float) -> DampingField:
    """Attach the built-in perturbation b(t, x) = amplitude*sin(2 pi x)*sin(t)."""
    if amplitude == 0.0:
        return damping

    def perturbation(t, x):
        x = np.asarray(x, dtype=np.float64)
        return amplitude * np.sin(2.0 * math.pi * x) * math.sin(t)

    return DampingField(
        evaluate=damping.evaluate,
        region=damping.region,
        perturbation=perturbation,
        perturbation_sup=abs(amplitude),
        time_dependent=damping.time_dependent,
    )


# ---------------------------------------------------------------------------
# Field sampling and validation
# ---------------------------------------------------------------------------

def _sample(fn: Callable, grid: Grid, t: float) -> np.ndarray:
    x = grid.centers
    vals = None
    try:
        out = np.asarray(fn(t, x), dtype=np.float64)
        if out.shape == x.shape:
            vals = out.copy()
    except Exception:
        vals = None
    if vals is None:
        # Closure is not vectorized; evaluate cell by cell.
        vals = np.array([float(fn(t, xi)) for xi in x], dtype=np.float64)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.argmax(bad))
        raise FieldEvaluationError(
            f"coefficient evaluated to {float(vals[i])} at t={float(t)}, x={float(x[i])}"
        )
    return vals


def sample_field(f: DampingField, grid: Grid, t: float) -> np.ndarray:
    """Sample the damping coefficient at cell centers at time ``t``."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    return _sample(f.evaluate, grid, t)


def sample_perturbation(f: DampingField, grid: Grid, t: float) -> np.ndarray:
    """Sample the perturbation coefficient; zeros when none is attached."""
    if f.perturbation is None:
        return np.zeros(grid.n_cells, dtype=np.float64)
    return _sample(f.perturbation, grid, t)


def validate_field(f: DampingField, grid: Grid, times=(0.0, 0.5, 1.0, 2.0, 5.0)) -> None:
    """Sample-check non-negativity and the declared active region.

    Violations raise a warning rather than an error: sign-indefinite
    coefficients are only supported through the dedicated perturbation
    slot, and the check is by sampling, not symbolic.
    """
    for t in times:
        a = sample_field(f, grid, t)
        if np.any(a < 0.0):
            warnings.warn(
                f"damping coefficient is negative at t={t} (min {a.min():.3g}); "
                "sign-indefinite parts belong in the perturbation slot",
                stacklevel=2,
            )
        r = f.region
        if r is not None:
            inside = (grid.centers > r.x0 - r.eps0) & (grid.centers < r.x0 + r.eps0)
            if inside.any() and np.any(a[inside] < r.lam * (1.0 - 1e-12)):
                warnings.warn(
                    f"damping coefficient drops below lam={r.lam} on its declared "
                    f"active strip at t={t}",
                    stacklevel=2,
                )
            if f.region.sup_norm and np.any(np.abs(a) > r.sup_norm * (1.0 + 1e-12)):
                warnings.warn(
                    f"damping coefficient exceeds declared sup_norm={r.sup_norm} at t={t}",
                    stacklevel=2,
                )
