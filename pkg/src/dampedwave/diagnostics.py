"""Diagnostic functionals: L^p energies, mass, dissipation, decay fits.

All spatial quadrature is the midpoint rule on cell centers (weight dx).
The recorded time series carries, per sample: the L^p energy
E_p = (1/p) * ||(rho, xi)||_p^p, the mass integral of rho+xi, the running
dissipation functional, the four wall traces, the raw and mean-shifted
pair norms, and the state sup-norm.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .core import DampingField, GridState, sample_field

__all__ = [
    "lp_norm",
    "pair_lp_norm",
    "mass_integral",
    "c0_constant",
    "shifted_lp_norm",
    "dissipation_increment",
    "energy_identity_residual",
    "fit_decay",
    "default_fit_window",
    "DecayReport",
    "DecayFitError",
    "DiagnosticsSeries",
    "CSV_COLUMNS",
    "format_real",
    "atomic_write_text",
]

VALUE_FLOOR = 1e-300

CSV_COLUMNS = (
    "t",
    "energy_p",
    "mass",
    "cumulative_mp",
    "rho_left",
    "xi_left",
    "rho_right",
    "xi_right",
)


class DecayFitError(ValueError):
    """Not enough usable samples inside the requested fit window."""


def _check_p(p: float) -> float:
    p = float(p)
    if not (1.0 < p < math.inf):
        raise ValueError(f"p must lie in (1, inf), got {p}")
    return p


def lp_norm(v: np.ndarray, p: float, dx: float) -> float:
    """Midpoint-rule L^p(0,1) norm of cell-center samples."""
    p = _check_p(p)
    v = np.asarray(v, dtype=np.float64)
    return float((K.abs_pow_sum(v, p) * dx) ** (1.0 / p))


def pair_lp_norm(state: GridState, p: float) -> float:
    """L^p norm of the concatenated pair (rho, xi)."""
    return shifted_lp_norm(state, 0.0, p)


def mass_integral(state: GridState) -> float:
    """Integral of rho + xi over the domain."""
    return float((np.sum(state.rho) + np.sum(state.xi)) * state.grid.dx)


def c0_constant(initial: GridState) -> float:
    """Half the initial mass: the conserved mean under Dirichlet coupling."""
    return 0.5 * mass_integral(initial)


def shifted_lp_norm(state: GridState, c0: float, p: float) -> float:
    """L^p norm of (rho - c0, xi - c0) as a concatenated pair."""
    p = _check_p(p)
    s = K.shifted_pair_pow_sum(state.rho, state.xi, float(c0), p)
    return float((s * state.grid.dx) ** (1.0 / p))


def dissipation_increment(state: GridState, damping: DampingField, p: float, dt: float) -> float:
    """One rectangle-rule slab of the dissipation functional.

    Returns dt * sum_i a_i (rho_i - xi_i)(rho_i|rho_i|^{p-2} - xi_i|xi_i|^{p-2}) dx
    with the coefficient sampled at the state's own time. For p = 2 this is
    dt * sum a_i (rho_i - xi_i)^2 dx.
    """
    p = _check_p(p)
    if not (dt > 0.0):
        raise ValueError(f"dt must be positive, got {dt}")
    a = sample_field(damping, state.grid, state.t)
    return dt * K.dissipation_sum(a, state.rho, state.xi, p) * state.grid.dx


def energy_identity_residual(series: "DiagnosticsSeries", initial_energy: float) -> np.ndarray:
    """Residual of the L^p energy identity at every recorded sample.

    residual_k = E_p(t_k) + (1/2) cumulative_mp(t_k) - E_p(0); identically
    zero for the continuum dynamics without perturbation.
    """
    return series.energy_p + 0.5 * series.cumulative_mp - float(initial_energy)


@dataclass(frozen=True)
class DecayReport:
    """Result of a log-linear exponential-decay fit.

    ``gamma`` is the fitted rate (+inf when the windowed values sit at the
    numerical floor: finite extinction). ``norm_kind`` records which norm
    was fitted: "raw" or "shifted_by_c0".
    """

    gamma: float
    prefactor: float
    window: tuple[float, float]
    r_squared: float
    norm_kind: str = "raw"

    def __post_init__(self):
        if self.window[0] >= self.window[1]:
            raise ValueError("fit window must satisfy t_lo < t_hi")
        if self.norm_kind not in ("raw", "shifted_by_c0"):
            raise ValueError(f"unknown norm_kind {self.norm_kind!r}")

    @property
    def extinct(self) -> bool:
        return math.isinf(self.gamma)


def default_fit_window(times: np.ndarray) -> tuple[float, float]:
    """Last 60% of the horizon: transients belong to the prefactor."""
    times = np.asarray(times, dtype=np.float64)
    t0, t1 = float(times[0]), float(times[-1])
    return (t0 + 0.4 * (t1 - t0), t1)


def fit_decay(
    times: np.ndarray,
    values: np.ndarray,
    window: tuple[float, float],
    norm_kind: str = "raw",
) -> DecayReport:
    """Least-squares line on (t, log value); gamma is minus the slope.

    Values are floored at 1e-300 before taking logs. If every windowed
    value sits at the floor the series has gone extinct and gamma = +inf
    is reported instead of a fit. Fewer than 5 usable samples raise
    `DecayFitError`.
    """
    t_lo, t_hi = float(window[0]), float(window[1])
    if not (t_lo < t_hi):
        raise ValueError("fit window must satisfy t_lo < t_hi")
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    mask = (times >= t_lo) & (times <= t_hi) & np.isfinite(values)
    if int(mask.sum()) < 5:
        raise DecayFitError(
            f"only {int(mask.sum())} usable samples in window [{t_lo}, {t_hi}]; need 5"
        )
    t = times[mask]
    v = np.maximum(values[mask], VALUE_FLOOR)
    if np.all(v <= VALUE_FLOOR):
        return DecayReport(
            gamma=math.inf,
            prefactor=0.0,
            window=(t_lo, t_hi),
            r_squared=1.0,
            norm_kind=norm_kind,
        )
    logv = np.log(v)
    slope, intercept = np.polyfit(t, logv, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((logv - pred) ** 2))
    ss_tot = float(np.sum((logv - logv.mean()) ** 2))
    if ss_tot > 0.0:
        r2 = max(0.0, 1.0 - ss_res / ss_tot)
    else:
        r2 = 1.0 if ss_res <= 1e-24 * max(1.0, float(np.max(np.abs(logv))) ** 2) else 0.0
    return DecayReport(
        gamma=float(-slope),
        prefactor=float(np.exp(intercept)),
        window=(t_lo, t_hi),
        r_squared=float(r2),
        norm_kind=norm_kind,
    )


class DiagnosticsSeries:
    """Append-only time series of the diagnostic functionals.

    Acts as the recorder sink for the solver: `append` takes the raw state
    arrays together with the externally accumulated dissipation value.
    Appends must come from the thread that owns the simulation.
    """

    def __init__(self, p: float, dx: float, c0: float = 0.0):
        self.p = _check_p(p)
        self.dx = float(dx)
        self.c0 = float(c0)
        self._times: list[float] = []
        self._energy: list[float] = []
        self._mass: list[float] = []
        self._cum_mp: list[float] = []
        self._traces: list[tuple[float, float, float, float]] = []
        self._norm_shifted: list[float] = []
        self._sup_abs: list[float] = []

    def __len__(self) -> int:
        return len(self._times)

    def append(self, t: float, rho: np.ndarray, xi: np.ndarray, cumulative_mp: float) -> None:
        if self._times and t <= self._times[-1]:
            raise ValueError("recorded times must be strictly increasing")
        p, dx, c0 = self.p, self.dx, self.c0
        self._times.append(float(t))
        self._energy.append(K.pair_pow_sum(rho, xi, p) * dx / p)
        self._mass.append(float((np.sum(rho) + np.sum(xi)) * dx))
        self._cum_mp.append(float(cumulative_mp))
        self._traces.append((float(rho[0]), float(xi[0]), float(rho[-1]), float(xi[-1])))
        self._norm_shifted.append((K.shifted_pair_pow_sum(rho, xi, c0, p) * dx) ** (1.0 / p))
        self._sup_abs.append(max(float(np.max(np.abs(rho))), float(np.max(np.abs(xi)))))

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self._times)

    @property
    def energy_p(self) -> np.ndarray:
        return np.asarray(self._energy)

    @property
    def mass(self) -> np.ndarray:
        return np.asarray(self._mass)

    @property
    def cumulative_mp(self) -> np.ndarray:
        return np.asarray(self._cum_mp)

    @property
    def boundary_traces(self) -> np.ndarray:
        """Array of shape (len, 4): rho(t,0), xi(t,0), rho(t,1), xi(t,1)."""
        return np.asarray(self._traces).reshape(len(self._times), 4)

    @property
    def rho_left(self) -> np.ndarray:
        return self.boundary_traces[:, 0]

    @property
    def xi_left(self) -> np.ndarray:
        return self.boundary_traces[:, 1]

    @property
    def rho_right(self) -> np.ndarray:
        return self.boundary_traces[:, 2]

    @property
    def xi_right(self) -> np.ndarray:
        return self.boundary_traces[:, 3]

    @property
    def norm_raw(self) -> np.ndarray:
        """Raw pair norm, recovered from the energy: (p * E_p)^(1/p)."""
        return (self.p * self.energy_p) ** (1.0 / self.p)

    @property
    def norm_shifted(self) -> np.ndarray:
        """Pair norm of (rho - c0, xi - c0) at each sample."""
        return np.asarray(self._norm_shifted)

    @property
    def sup_abs(self) -> np.ndarray:
        return np.asarray(self._sup_abs)

    def write_csv(self, path) -> None:
        """Emit the spec'd eight columns, 17 significant digits, atomically."""
        rows = [",".join(CSV_COLUMNS)]
        tr = self._traces
        for i in range(len(self._times)):
            rows.append(
                ",".join(
                    format_real(v)
                    for v in (
                        self._times[i],
                        self._energy[i],
                        self._mass[i],
                        self._cum_mp[i],
                        tr[i][0],
                        tr[i][1],
                        tr[i][2],
                        tr[i][3],
                    )
                )
            )
        atomic_write_text(path, "\n".join(rows) + "\n")


def format_real(x: float) -> str:
    """Decimal text with 17 significant digits (round-trips float64)."""
    return format(float(x), ".17g")


def atomic_write_text(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
