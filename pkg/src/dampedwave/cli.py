"""Command-line front end.

Subcommands::

    simulate        --config PATH --out DIR
    sweep           --config PATH --vary KEY --values v1,v2,... --out DIR
    verify-lemmas   --seed N --trials M --out DIR [--self-test]
    oracle-compare  --config PATH --out DIR [--tol X]

Exit codes: 0 success, 2 configuration error, 3 numeric blow-up,
4 lemma violation, 5 oracle tolerance exceeded. All emitted files are
deterministic for a given manifest and seed (17-significant-digit
decimal formatting, no timestamps) and written atomically.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lemmas
from .bridge import (
    dalembert_reference,
    even_extension,
    odd_extension,
    trace_derivatives_dalembert,
    wave_from_riemann,
)
from .config import Setup, build_setup, load_setup, parse_document
from .core import (
    BlowUpError,
    BoundaryKind,
    ConfigError,
    Grid,
    GridState,
    SimConfig,
    Splitting,
    indicator_field,
    smoothed_pulse_field,
    zero_field,
    dirichlet,
)
from .diagnostics import (
    DecayFitError,
    DecayReport,
    DiagnosticsSeries,
    atomic_write_text,
    default_fit_window,
    fit_decay,
    format_real,
)
from .solver import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BLOWUP = 3
EXIT_LEMMA = 4
EXIT_ORACLE = 5

_SWEEP_KEYS = {
    "lambda": "damping.lambda",
    "eps0": "damping.eps0",
    "kappa": "boundary.kappa",
    "p": "p",
    "n_cells": "n_cells",
    "perturbation.amplitude": "perturbation.amplitude",
}


@dataclass
class RunManifest:
    """Resolved invocation parameters for one subcommand."""

    command: str
    output_dir: str
    config_path: Optional[str] = None
    seed: int = 0
    trials: int = 1000
    vary: Optional[str] = None
    values: list[str] = field(default_factory=list)
    tol: float = 5e-4
    self_test: bool = False


def _err(message: str) -> None:
    print(f"dampedwave: {message}", file=sys.stderr)


def _ensure_outdir(path: str) -> None:
    os.makedirs(path, exist_ok=True)


def _decay_line(report: DecayReport) -> str:
    token = "shifted" if report.norm_kind == "shifted_by_c0" else "raw"
    lo, hi = report.window
    return (
        f"norm={token} gamma={format_real(report.gamma)} "
        f"prefactor={format_real(report.prefactor)} r2={format_real(report.r_squared)} "
        f"window={format_real(lo)},{format_real(hi)}"
    )


def _fit_both(series: DiagnosticsSeries) -> list[str]:
    times = series.times
    window = default_fit_window(times)
    lines = []
    for kind, values in (("raw", series.norm_raw), ("shifted_by_c0", series.norm_shifted)):
        try:
            lines.append(_decay_line(fit_decay(times, values, window, norm_kind=kind)))
        except DecayFitError as exc:
            token = "shifted" if kind == "shifted_by_c0" else "raw"
            lines.append(f"norm={token} gamma=nan prefactor=nan r2=nan "
                         f"window={format_real(window[0])},{format_real(window[1])} # {exc}")
    return lines


def _write_final_state(path: str, state: GridState) -> None:
    rows = ["x,rho,xi"]
    x = state.grid.centers
    for i in range(state.n_cells):
        rows.append(f"{format_real(x[i])},{format_real(state.rho[i])},{format_real(state.xi[i])}")
    atomic_write_text(path, "\n".join(rows) + "\n")


def _simulate_into(setup: Setup, out_dir: str) -> DiagnosticsSeries:
    result = run(setup.initial, setup.cfg)
    _ensure_outdir(out_dir)
    result.series.write_csv(os.path.join(out_dir, "series.csv"))
    _write_final_state(os.path.join(out_dir, "final_state.csv"), result.final)
    atomic_write_text(
        os.path.join(out_dir, "decay_report.txt"),
        "\n".join(_fit_both(result.series)) + "\n",
    )
    return result.series


def cmd_simulate(manifest: RunManifest) -> int:
    try:
        setup = load_setup(manifest.config_path)
    except (ConfigError, OSError) as exc:
        _err(f"configuration error: {exc}")
        return EXIT_CONFIG
    try:
        _simulate_into(setup, manifest.output_dir)
    except BlowUpError as exc:
        _err(f"numeric blow-up: {exc}")
        return EXIT_BLOWUP
    return EXIT_OK


def cmd_sweep(manifest: RunManifest) -> int:
    if manifest.vary not in _SWEEP_KEYS:
        _err(f"unknown sweep key {manifest.vary!r}; choose from {sorted(_SWEEP_KEYS)}")
        return EXIT_CONFIG
    try:
        with open(manifest.config_path) as fh:
            entries = parse_document(fh.read())
    except (ConfigError, OSError) as exc:
        _err(f"configuration error: {exc}")
        return EXIT_CONFIG

    base_dir = os.path.dirname(os.path.abspath(manifest.config_path))
    config_key = _SWEEP_KEYS[manifest.vary]
    _ensure_outdir(manifest.output_dir)
    rows = ["value,gamma,r_squared,final_energy"]
    for raw_value in manifest.values:
        sub_entries = dict(entries)
        sub_entries[config_key] = (raw_value, 0)
        tag = f"{manifest.vary}_{raw_value}"
        sub_dir = os.path.join(manifest.output_dir, tag)
        try:
            setup = build_setup(sub_entries, base_dir=base_dir)
            series = _simulate_into(setup, sub_dir)
            window = default_fit_window(series.times)
            shifted = setup.cfg.boundary.kind is BoundaryKind.DIRICHLET
            report = fit_decay(
                series.times,
                series.norm_shifted if shifted else series.norm_raw,
                window,
                norm_kind="shifted_by_c0" if shifted else "raw",
            )
            rows.append(
                f"{raw_value},{format_real(report.gamma)},"
                f"{format_real(report.r_squared)},{format_real(series.energy_p[-1])}"
            )
        except (ConfigError, BlowUpError, DecayFitError) as exc:
            _err(f"sub-run {tag} failed: {exc}")
            rows.append(f"{raw_value},nan,nan,nan")
    atomic_write_text(os.path.join(manifest.output_dir, "summary.csv"), "\n".join(rows) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify-lemmas
# ---------------------------------------------------------------------------

_GAP_PS = (1.5, 2.0, 3.0)


def _report_row(name: str, trials, worst, constant, ok: bool) -> str:
    fmt = lambda v: v if isinstance(v, str) else format_real(v)
    return (
        f"{name:<34} {str(trials):>8}  {fmt(worst):>24}  {fmt(constant):>24}  "
        f"{'PASS' if ok else 'FAIL'}"
    )


def _nearest_center(grid: Grid, y: float) -> float:
    i = int(np.clip(round(y / grid.dx - 0.5), 0, grid.n_cells - 1))
    return float(grid.centers[i])


def _lemma_runs(n_cells: int, t_final: float, damping, p: float):
    grid = Grid(n_cells)
    x = grid.centers
    rho0 = np.sin(math.pi * x)
    xi0 = -np.sin(math.pi * x)
    cfg = SimConfig(
        grid=grid,
        boundary=dirichlet(),
        damping=damping,
        t_final=t_final,
        p=p,
        record_every=max(1, n_cells // 8),
        splitting=Splitting.STRANG,
    )
    return run(GridState(grid, rho0, xi0), cfg, retain=True)


def cmd_verify_lemmas(manifest: RunManifest) -> int:
    seed = manifest.seed
    trials = manifest.trials
    lines: list[str] = []
    failures: list[dict] = []
    ok_all = True

    def add(name, n, worst, constant, ok, payload=None):
        nonlocal ok_all
        lines.append(_report_row(name, n, worst, constant, ok))
        if not ok:
            ok_all = False
            failures.append({"check": name, "worst": worst, "payload": payload or {}})

    # --- monotonicity gap -------------------------------------------------
    lines.append("# dissipation-sign lemma")
    worst_sign = math.inf
    for i in range(trials):
        rng = lemmas.rng_for_trial(seed, i)
        p = _GAP_PS[int(rng.integers(0, len(_GAP_PS)))]
        alpha, beta = rng.uniform(-10.0, 10.0, size=2)
        gap = lemmas.monotonicity_gap(alpha, beta, p)
        scale = max(1.0, (abs(alpha) + abs(beta)) ** p)
        worst_sign = min(worst_sign, gap / scale)
    add("gap-sign", trials, worst_sign, 0.0, worst_sign >= -1e-15)

    constants = {}
    for p in _GAP_PS:
        constants[p] = lemmas.best_gap_constant(p)
        add(f"gap-constant-p{p:g}", "-", constants[p], "-", constants[p] > 0.0)
    add("gap-constant-p2-identity", "-", abs(constants[2.0] - 1.0), 1.0,
        abs(constants[2.0] - 1.0) <= 1e-12)

    result = _lemma_runs(100, 3.0, indicator_field(), 2.0)
    lhs2, m2 = lemmas.lem_ineq_bound(result.trajectory, indicator_field(), 2.0)
    rel = abs(lhs2 - m2) / max(m2, 1e-300)
    add("dissipation-bound-p2-identity", "-", rel, 1.0, rel <= 1e-13)

    result3 = _lemma_runs(100, 3.0, indicator_field(), 3.0)
    lhs3, m3 = lemmas.lem_ineq_bound(result3.trajectory, indicator_field(), 3.0)
    ratio3 = lhs3 * constants[3.0] / max(m3, 1e-300)
    add("dissipation-bound-p3", "-", ratio3, 1.0 / constants[3.0],
        lhs3 <= m3 / constants[3.0] * (1.0 + 1e-9))

    # --- mean-oscillation lemma -------------------------------------------
    lines.append("# mean-oscillation lemma")
    n_steps_trials = max(10, trials // 10)
    n_trig_trials = max(5, trials // 100)
    combos = [(p, 1.0, l) for p in _GAP_PS for l in (0.5, 0.1)]
    worst_rel = 0.0  # lhs / (constant * rhs), must stay <= 1
    worst_case = None
    violation = None
    trial_counter = 10_000
    for p, L, l in combos:
        for family, count, rule in (("step", n_steps_trials, "step"),
                                    ("trig", n_trig_trials, "simpson")):
            for i in range(count):
                rng = lemmas.rng_for_trial(seed, trial_counter)
                trial_counter += 1
                path = (
                    lemmas.random_step_path(rng, L, l)
                    if family == "step"
                    else lemmas.random_trig_path(rng, L, l)
                )
                try:
                    lhs, rhs, constant = lemmas.mean_oscillation_bound(path, L, l, p, rule=rule)
                except lemmas.InequalityViolationError as exc:
                    violation = {"p": p, "L": L, "l": l, "family": family,
                                 "trial": trial_counter - 1, "error": str(exc)}
                    break
                if rhs > 0.0 and lhs / (constant * rhs) > worst_rel:
                    worst_rel = lhs / (constant * rhs)
                    worst_case = (path, L, l, p, lhs, rhs, constant)
            if violation:
                break
        if violation:
            break
    n_osc = len(combos) * (n_steps_trials + n_trig_trials)
    add("mean-oscillation-random", n_osc, worst_rel, 1.0,
        violation is None, payload=violation)

    x_path = lemmas.sample_path(lambda x: np.asarray(x, dtype=np.float64), 1.0, 0.5)
    lhs_x, rhs_x, c_x = lemmas.mean_oscillation_bound(x_path, 1.0, 0.5, 2.0)
    closed_ok = abs(lhs_x - 1.0 / 12.0) <= 1e-10 and abs(rhs_x - 1.0 / 24.0) <= 1e-10
    add("mean-oscillation-closed-form", 1, max(abs(lhs_x - 1 / 12), abs(rhs_x - 1 / 24)),
        c_x, closed_ok)

    if manifest.self_test and worst_case is not None:
        # Harness sanity: an artificially halved constant must be caught.
        path, L, l, p, lhs, rhs, _ = worst_case
        fake_constant = 0.5 * (lhs / rhs)
        caught = lhs > fake_constant * rhs
        add("mean-oscillation-self-test", 1, lhs / rhs, fake_constant, not caught)

    # --- characteristic relation and witness point ------------------------
    lines.append("# characteristic-difference lemma")
    res_free = _lemma_runs(128, 1.0, zero_field(), 2.0)
    y128 = _nearest_center(Grid(128), 0.25)
    r_free = lemmas.characteristic_difference_check(
        res_free.trajectory, zero_field(), 0.25, 0.5, y128
    )
    add("characteristic-undamped-exact", 1, r_free, 0.0, r_free == 0.0)

    smooth = smoothed_pulse_field()
    residuals = {}
    for n in (100, 200):
        result_n = _lemma_runs(n, 1.0, smooth, 2.0)
        yn = _nearest_center(Grid(n), 0.25)
        residuals[n] = lemmas.characteristic_difference_check(
            result_n.trajectory, smooth, 0.25, 0.5, yn
        )
    conv = residuals[200] / max(residuals[100], 1e-300)
    add("characteristic-convergence", 2, conv, 0.75, conv <= 0.75)

    witness_run = _lemma_runs(100, 3.0, indicator_field(), 2.0)
    z, trace = lemmas.witness_point_search(witness_run.trajectory, 0.5, 0.1, 2.0)
    strip = lemmas.strip_oscillation_integral(witness_run.trajectory, 0.5, 0.1, 2.0)
    bound = strip / 0.1 * (1.0 + 4.0 * witness_run.trajectory.grid.dx / 0.1)
    add("witness-trace-bound", 1, trace / max(bound, 1e-300), 1.0, trace <= bound)

    # --- emit --------------------------------------------------------------
    _ensure_outdir(manifest.output_dir)
    header = [
        f"seed={manifest.seed} trials={manifest.trials}",
        _report_row("check", "trials", "worst", "constant", True).replace("PASS", "status"),
    ]
    atomic_write_text(
        os.path.join(manifest.output_dir, "report.txt"),
        "\n".join(header + lines) + "\n",
    )
    if not ok_all:
        payload_lines = []
        for f in failures:
            payload_lines.append(f"check={f['check']} worst={f['worst']!r}")
            for key, value in (f["payload"] or {}).items():
                if isinstance(value, np.ndarray):
                    payload_lines.append(
                        f"  {key}=[{','.join(format_real(v) for v in value)}]"
                    )
                else:
                    payload_lines.append(f"  {key}={value!r}")
        atomic_write_text(
            os.path.join(manifest.output_dir, "counterexample.txt"),
            "\n".join(payload_lines) + "\n",
        )
        _err("lemma verification failed; see counterexample.txt")
        return EXIT_LEMMA
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle-compare
# ---------------------------------------------------------------------------

def cmd_oracle_compare(manifest: RunManifest) -> int:
    try:
        setup = load_setup(manifest.config_path)
    except (ConfigError, OSError) as exc:
        _err(f"configuration error: {exc}")
        return EXIT_CONFIG
    if setup.damping_preset != "zero":
        _err("oracle-compare requires damping.preset = zero (the reference is undamped)")
        return EXIT_CONFIG
    if setup.cfg.boundary.kind is not BoundaryKind.DIRICHLET:
        _err("oracle-compare requires boundary.kind = dirichlet (odd reflections)")
        return EXIT_CONFIG
    if setup.wave is None:
        _err(
            "oracle-compare needs wave-form initial data; "
            "use initial.preset = standing-wave or velocity-wave"
        )
        return EXIT_CONFIG

    try:
        result = run(setup.initial, setup.cfg, retain=True)
    except BlowUpError as exc:
        _err(f"numeric blow-up: {exc}")
        return EXIT_BLOWUP

    wave = setup.wave
    u0e = odd_extension(wave.u0) if wave.u0 is not None else None
    du0e = even_extension(wave.du0) if wave.du0 is not None else None
    u1e = odd_extension(wave.u1) if wave.u1 is not None else None

    traj = result.trajectory
    n_rows = traj.n_rows
    picks = np.unique(np.round(np.linspace(0, n_rows - 1, min(9, n_rows))).astype(int))
    grid = setup.cfg.grid
    x = grid.centers
    tol = manifest.tol

    rows = ["t,err_u,err_ut,err_ux,tol,status"]
    worst = (0.0, 0.0, 0.0)  # (error, t, x)
    for k in picks:
        t = float(traj.times[k])
        state = GridState(grid, traj.rho[k], traj.xi[k], t)
        rec = wave_from_riemann(state, setup.cfg.boundary)
        u_or = np.empty_like(x)
        ut_or = np.empty_like(x)
        ux_or = np.empty_like(x)
        for i, xi_pt in enumerate(x):
            u_or[i] = dalembert_reference(u0e, u1e, None, t, float(xi_pt))
            ut_or[i], ux_or[i] = trace_derivatives_dalembert(du0e, u1e, None, t, float(xi_pt))
        err_u = float(np.max(np.abs(rec.u - u_or)))
        err_ut = float(np.max(np.abs(rec.ut - ut_or)))
        err_ux = float(np.max(np.abs(rec.ux - ux_or)))
        status = "ok" if max(err_u, err_ut, err_ux) <= tol else "exceeded"
        rows.append(
            f"{format_real(t)},{format_real(err_u)},{format_real(err_ut)},"
            f"{format_real(err_ux)},{format_real(tol)},{status}"
        )
        for err, arr_rec, arr_or in ((err_u, rec.u, u_or), (err_ut, rec.ut, ut_or),
                                     (err_ux, rec.ux, ux_or)):
            if err > worst[0]:
                worst = (err, t, float(x[int(np.argmax(np.abs(arr_rec - arr_or)))]))

    _ensure_outdir(manifest.output_dir)
    atomic_write_text(os.path.join(manifest.output_dir, "oracle_errors.csv"),
                      "\n".join(rows) + "\n")
    if worst[0] > tol:
        _err(
            f"oracle tolerance exceeded: error {worst[0]:.6g} at t={worst[1]:.6g}, "
            f"x={worst[2]:.6g} (tol {tol:.6g})"
        )
        return EXIT_ORACLE
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dampedwave",
        description="Damped 1D wave equation: simulation and lemma verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation and emit CSV/reports")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)

    swp = sub.add_parser("sweep", help="run one simulation per parameter value")
    swp.add_argument("--config", required=True)
    swp.add_argument("--vary", required=True, choices=sorted(_SWEEP_KEYS))
    swp.add_argument("--values", required=True, help="comma-separated values")
    swp.add_argument("--out", required=True)

    ver = sub.add_parser("verify-lemmas", help="randomized + solver-based lemma suites")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--trials", type=int, default=1000)
    ver.add_argument("--out", required=True)
    ver.add_argument("--self-test", action="store_true",
                     help="inject a halved constant to confirm violations are caught")

    orc = sub.add_parser("oracle-compare", help="compare the solver to the d'Alembert formula")
    orc.add_argument("--config", required=True)
    orc.add_argument("--out", required=True)
    orc.add_argument("--tol", type=float, default=5e-4)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "simulate":
        manifest = RunManifest("simulate", args.out, config_path=args.config)
        return cmd_simulate(manifest)
    if args.command == "sweep":
        manifest = RunManifest(
            "sweep",
            args.out,
            config_path=args.config,
            vary=args.vary,
            values=[v.strip() for v in args.values.split(",") if v.strip()],
        )
        return cmd_sweep(manifest)
    if args.command == "verify-lemmas":
        if not (0 <= args.seed < 2**64):
            _err("seed must fit in 64 unsigned bits")
            return EXIT_CONFIG
        manifest = RunManifest(
            "verify-lemmas",
            args.out,
            seed=args.seed,
            trials=max(1, args.trials),
            self_test=args.self_test,
        )
        return cmd_verify_lemmas(manifest)
    manifest = RunManifest("oracle-compare", args.out, config_path=args.config, tol=args.tol)
    return cmd_oracle_compare(manifest)


if __name__ == "__main__":
    sys.exit(main())
