"""Flat key-value configuration documents.

Format: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored. Recognized keys (see README for the full schema):

    n_cells                 positive integer (required)
    boundary.kind           dirichlet | neumann | dynamic   [dirichlet]
    boundary.kappa          positive real (dynamic only)
    damping.preset          zero | constant | indicator | custom-table  [indicator]
    damping.lambda          coefficient level on the active strip  [1.0]
    damping.x0              strip center  [0.5]
    damping.eps0            strip half-width  [0.1]
    damping.table           .npz path with arrays t, x, a (custom-table only)
    perturbation.amplitude  amplitude of b(t,x) = A sin(2 pi x) sin(t)  [0.0]
    perturbation.alpha      warning threshold on |b|  [0.05]
    t_final                 final time (required)
    p                       diagnostics exponent in (1, inf)  [2.0]
    record_every            steps between diagnostic samples  [1]
    splitting               lie | strang  [strang]
    initial.preset          mean-plus-sine | standing-wave | velocity-wave | zero
                            [mean-plus-sine]
    initial.amplitude       scale of the initial data  [1.0]

The damping strip defaults (x0=0.5, eps0=0.1, lambda=1) are desk-scale
choices. The ``initial.*`` keys extend the base schema: runs need initial
data and the oracle comparison needs the wave-form of it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    BoundaryKind,
    BoundarySpec,
    ConfigError,
    DampingField,
    Grid,
    GridState,
    SimConfig,
    Splitting,
    constant_field,
    dirichlet,
    indicator_field,
    make_boundary_dynamic,
    neumann,
    tabulated_field,
    with_standard_perturbation,
    zero_field,
)

__all__ = ["WaveData", "Setup", "parse_document", "build_setup", "load_setup"]

_KNOWN_KEYS = {
    "n_cells",
    "boundary.kind",
    "boundary.kappa",
    "damping.preset",
    "damping.lambda",
    "damping.x0",
    "damping.eps0",
    "damping.table",
    "perturbation.amplitude",
    "perturbation.alpha",
    "t_final",
    "p",
    "record_every",
    "splitting",
    "initial.preset",
    "initial.amplitude",
}


@dataclass(frozen=True)
class WaveData:
    """Analytic wave-equation form of an initial-data preset.

    ``u0``/``du0``/``u1`` are callables on [0, 1] (None means zero); the
    oracle comparison extends them by reflection.
    """

    preset: str
    u0: Optional[Callable]
    du0: Optional[Callable]
    u1: Optional[Callable]


@dataclass(frozen=True)
class Setup:
    """Parsed configuration: run parameters plus initial data."""

    cfg: SimConfig
    initial: GridState
    wave: Optional[WaveData]
    damping_preset: str
    initial_preset: str


def parse_document(text: str) -> dict[str, tuple[str, int]]:
    """Parse the flat document into {key: (raw value, line number)}."""
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError("empty key or value", line=lineno)
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, key=key)
        if key in entries:
            raise ConfigError("duplicate key", line=lineno, key=key)
        entries[key] = (value, lineno)
    return entries


def _take(entries, key, convert, default=None, required=False):
    if key not in entries:
        if required:
            raise ConfigError("missing required key", key=key)
        return default
    value, lineno = entries[key]
    try:
        return convert(value)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad value {value!r}: {exc}", line=lineno, key=key)


def _to_int(value: str) -> int:
    return int(value, 10)


def _to_float(value: str) -> float:
    out = float(value)
    if not math.isfinite(out):
        raise ValueError("value must be finite")
    return out


def _initial_data(preset: str, amplitude: float, grid: Grid):
    x = grid.centers
    if preset == "mean-plus-sine":
        profile = amplitude * (1.0 + np.sin(2.0 * math.pi * x))
        return profile, profile.copy(), None
    if preset == "standing-wave":
        strain = amplitude * math.pi * np.cos(math.pi * x)
        wave = WaveData(
            preset=preset,
            u0=lambda y: amplitude * np.sin(math.pi * np.asarray(y)),
            du0=lambda y: amplitude * math.pi * np.cos(math.pi * np.asarray(y)),
            u1=None,
        )
        return strain.copy(), strain.copy(), wave
    if preset == "velocity-wave":
        velocity = amplitude * np.sin(math.pi * x)
        wave = WaveData(
            preset=preset,
            u0=None,
            du0=None,
            u1=lambda y: amplitude * np.sin(math.pi * np.asarray(y)),
        )
        return velocity.copy(), -velocity, wave
    if preset == "zero":
        z = np.zeros(grid.n_cells)
        return z, z.copy(), None
    raise ConfigError(f"unknown initial preset {preset!r}", key="initial.preset")


def _damping(entries, base_dir: str) -> tuple[DampingField, str]:
    preset = _take(entries, "damping.preset", str, default="indicator")
    lam = _take(entries, "damping.lambda", _to_float, default=1.0)
    x0 = _take(entries, "damping.x0", _to_float, default=0.5)
    eps0 = _take(entries, "damping.eps0", _to_float, default=0.1)
    if preset == "zero":
        field = zero_field()
    elif preset == "constant":
        field = constant_field(lam)
    elif preset == "indicator":
        field = indicator_field(lam, x0, eps0)
    elif preset == "custom-table":
        path = _take(entries, "damping.table", str, required=True)
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        try:
            with np.load(path) as data:
                field = tabulated_field(data["t"], data["x"], data["a"])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot load damping table: {exc}", key="damping.table")
    else:
        line = entries["damping.preset"][1]
        raise ConfigError(
            f"unknown damping preset {preset!r}", line=line, key="damping.preset"
        )
    amplitude = _take(entries, "perturbation.amplitude", _to_float, default=0.0)
    field = with_standard_perturbation(field, amplitude)
    return field, preset


def _boundary(entries) -> BoundarySpec:
    kind = _take(entries, "boundary.kind", str, default="dirichlet").lower()
    kappa = _take(entries, "boundary.kappa", _to_float)
    if kind == "dirichlet" or kind == "neumann":
        if kappa is not None:
            raise ConfigError(
                f"boundary.kappa is only valid for the dynamic boundary",
                line=entries["boundary.kappa"][1],
                key="boundary.kappa",
            )
        return dirichlet() if kind == "dirichlet" else neumann()
    if kind == "dynamic":
        if kappa is None:
            raise ConfigError("dynamic boundary requires boundary.kappa", key="boundary.kappa")
        try:
            return make_boundary_dynamic(kappa)
        except ValueError as exc:
            raise ConfigError(str(exc), line=entries["boundary.kappa"][1], key="boundary.kappa")
    line = entries["boundary.kind"][1] if "boundary.kind" in entries else None
    raise ConfigError(f"unknown boundary kind {kind!r}", line=line, key="boundary.kind")


def build_setup(entries: dict[str, tuple[str, int]], base_dir: str = ".") -> Setup:
    """Validate parsed entries and assemble the run setup."""
    n_cells = _take(entries, "n_cells", _to_int, required=True)
    try:
        grid = Grid(n_cells)
    except ValueError as exc:
        raise ConfigError(str(exc), line=entries["n_cells"][1], key="n_cells")
    boundary = _boundary(entries)
    damping, damping_preset = _damping(entries, base_dir)
    t_final = _take(entries, "t_final", _to_float, required=True)
    p = _take(entries, "p", _to_float, default=2.0)
    record_every = _take(entries, "record_every", _to_int, default=1)
    splitting_raw = _take(entries, "splitting", str, default="strang").lower()
    try:
        splitting = Splitting(splitting_raw)
    except ValueError:
        raise ConfigError(
            f"unknown splitting {splitting_raw!r}",
            line=entries["splitting"][1],
            key="splitting",
        )
    alpha = _take(entries, "perturbation.alpha", _to_float, default=0.05)
    try:
        cfg = SimConfig(
            grid=grid,
            boundary=boundary,
            damping=damping,
            t_final=t_final,
            p=p,
            record_every=record_every,
            splitting=splitting,
            perturbation_alpha=alpha,
        )
    except ValueError as exc:
        raise ConfigError(str(exc))

    initial_preset = _take(entries, "initial.preset", str, default="mean-plus-sine")
    amplitude = _take(entries, "initial.amplitude", _to_float, default=1.0)
    rho0, xi0, wave = _initial_data(initial_preset, amplitude, grid)
    initial = GridState(grid, rho0, xi0, 0.0)
    return Setup(
        cfg=cfg,
        initial=initial,
        wave=wave,
        damping_preset=damping_preset,
        initial_preset=initial_preset,
    )


def load_setup(path) -> Setup:
    """Read and build a setup from a config file path."""
    with open(path, "r") as fh:
        text = fh.read()
    return build_setup(parse_document(text), base_dir=os.path.dirname(os.path.abspath(path)))
