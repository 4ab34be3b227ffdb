"""Hot inner-loop kernels: numba-jitted with a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``DAMPEDWAVE_BACKEND``:

* ``auto`` (default): numba when importable, numpy otherwise;
* ``numba``: require the JIT (ImportError if numba is missing);
* ``numpy``: force the fallback.

The transport/relaxation kernels perform only +, -, * arithmetic (the
exponential decay factors are precomputed with numpy either way), so the
two backends produce bitwise-identical simulation states. The power-sum
reductions may differ between backends in the last few ulps because of
libm and summation-order differences.
"""

from __future__ import annotations

import os

import numpy as np

BACKEND_ENV = "DAMPEDWAVE_BACKEND"

_requested = os.environ.get(BACKEND_ENV, "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"{BACKEND_ENV} must be one of auto|numba|numpy, got {_requested!r}"
    )

if _requested in ("auto", "numba"):
    try:
        from numba import njit

        _HAVE_NUMBA = True
    except ImportError:
        if _requested == "numba":
            raise
        _HAVE_NUMBA = False
else:
    _HAVE_NUMBA = False

BACKEND = "numba" if _HAVE_NUMBA else "numpy"


# -- pure-numpy implementations ---------------------------------------------

def _np_shift_pair(rho, xi, in_left, in_right, out_rho, out_xi):
    out_rho[:-1] = rho[1:]
    out_rho[-1] = in_right
    out_xi[1:] = xi[:-1]
    out_xi[0] = in_left


def _np_relax_pair(rho, xi, factor, out_rho, out_xi):
    # Cells with factor exactly 1 (zero coefficient) pass through bitwise,
    # so undamped regions are not perturbed by the reassembly roundoff.
    s = rho + xi
    d = (rho - xi) * factor
    keep = factor == 1.0
    out_rho[:] = np.where(keep, rho, 0.5 * (s + d))
    out_xi[:] = np.where(keep, xi, 0.5 * (s - d))


def _np_abs_pow_sum(v, p):
    return float(np.sum(np.abs(v) ** p))


def _np_pair_pow_sum(rho, xi, p):
    return float(np.sum(np.abs(rho) ** p) + np.sum(np.abs(xi) ** p))


def _np_shifted_pair_pow_sum(rho, xi, c, p):
    return float(np.sum(np.abs(rho - c) ** p) + np.sum(np.abs(xi - c) ** p))


def _np_dissipation_sum(a, rho, xi, p):
    # sum of a * (rho - xi) * (rho|rho|^{p-2} - xi|xi|^{p-2}); the
    # convention 0*|0|^{p-2} = 0 is automatic with sign(v)*|v|^{p-1}.
    q = p - 1.0
    phi = np.sign(rho) * np.abs(rho) ** q - np.sign(xi) * np.abs(xi) ** q
    return float(np.sum(a * (rho - xi) * phi))


def _np_weighted_abs_pow_sum(a, rho, xi, p):
    return float(np.sum(a * np.abs(rho - xi) ** p))


def _np_shifted_diff_pow_sums(u, weights, n_shifts, p):
    m = weights.shape[0]
    base = u[:m]
    out = np.empty(n_shifts + 1, dtype=np.float64)
    out[0] = 0.0
    for k in range(1, n_shifts + 1):
        out[k] = float(np.dot(weights, np.abs(u[k:k + m] - base) ** p))
    return out


# -- numba implementations ---------------------------------------------------

if _HAVE_NUMBA:

    @njit(cache=True)
    def _nb_shift_pair(rho, xi, in_left, in_right, out_rho, out_xi):
        n = rho.shape[0]
        for i in range(n - 1):
            out_rho[i] = rho[i + 1]
        out_rho[n - 1] = in_right
        for i in range(n - 1, 0, -1):
            out_xi[i] = xi[i - 1]
        out_xi[0] = in_left

    @njit(cache=True)
    def _nb_relax_pair(rho, xi, factor, out_rho, out_xi):
        n = rho.shape[0]
        for i in range(n):
            if factor[i] == 1.0:
                out_rho[i] = rho[i]
                out_xi[i] = xi[i]
            else:
                s = rho[i] + xi[i]
                d = (rho[i] - xi[i]) * factor[i]
                out_rho[i] = 0.5 * (s + d)
                out_xi[i] = 0.5 * (s - d)

    @njit(cache=True)
    def _nb_abs_pow_sum(v, p):
        acc = 0.0
        for i in range(v.shape[0]):
            acc += abs(v[i]) ** p
        return acc

    @njit(cache=True)
    def _nb_pair_pow_sum(rho, xi, p):
        acc = 0.0
        for i in range(rho.shape[0]):
            acc += abs(rho[i]) ** p + abs(xi[i]) ** p
        return acc

    @njit(cache=True)
    def _nb_shifted_pair_pow_sum(rho, xi, c, p):
        acc = 0.0
        for i in range(rho.shape[0]):
            acc += abs(rho[i] - c) ** p + abs(xi[i] - c) ** p
        return acc

    @njit(cache=True)
    def _nb_dissipation_sum(a, rho, xi, p):
        q = p - 1.0
        acc = 0.0
        for i in range(rho.shape[0]):
            r = rho[i]
            x = xi[i]
            pr = abs(r) ** q if r >= 0.0 else -(abs(r) ** q)
            px = abs(x) ** q if x >= 0.0 else -(abs(x) ** q)
            acc += a[i] * (r - x) * (pr - px)
        return acc

    @njit(cache=True)
    def _nb_weighted_abs_pow_sum(a, rho, xi, p):
        acc = 0.0
        for i in range(rho.shape[0]):
            acc += a[i] * abs(rho[i] - xi[i]) ** p
        return acc

    @njit(cache=True)
    def _nb_shifted_diff_pow_sums(u, weights, n_shifts, p):
        m = weights.shape[0]
        out = np.empty(n_shifts + 1, dtype=np.float64)
        out[0] = 0.0
        for k in range(1, n_shifts + 1):
            acc = 0.0
            for j in range(m):
                acc += weights[j] * abs(u[j + k] - u[j]) ** p
            out[k] = acc
        return out


# -- backend dispatch ---------------------------------------------------------

if BACKEND == "numba":
    shift_pair = _nb_shift_pair
    relax_pair = _nb_relax_pair
    abs_pow_sum = _nb_abs_pow_sum
    pair_pow_sum = _nb_pair_pow_sum
    shifted_pair_pow_sum = _nb_shifted_pair_pow_sum
    dissipation_sum = _nb_dissipation_sum
    weighted_abs_pow_sum = _nb_weighted_abs_pow_sum
    shifted_diff_pow_sums = _nb_shifted_diff_pow_sums
else:
    shift_pair = _np_shift_pair
    relax_pair = _np_relax_pair
    abs_pow_sum = _np_abs_pow_sum
    pair_pow_sum = _np_pair_pow_sum
    shifted_pair_pow_sum = _np_shifted_pair_pow_sum
    dissipation_sum = _np_dissipation_sum
    weighted_abs_pow_sum = _np_weighted_abs_pow_sum
    shifted_diff_pow_sums = _np_shifted_diff_pow_sums


def warm_up() -> None:
    """Trigger JIT compilation of every kernel on tiny inputs."""
    rho = np.array([1.0, -0.5, 0.25])
    xi = np.array([0.5, 0.25, -1.0])
    a = np.array([1.0, 0.0, 2.0])
    out1 = np.empty(3)
    out2 = np.empty(3)
    shift_pair(rho, xi, 0.1, -0.1, out1, out2)
    relax_pair(rho, xi, a, out1, out2)
    abs_pow_sum(rho, 2.0)
    pair_pow_sum(rho, xi, 1.5)
    shifted_pair_pow_sum(rho, xi, 0.5, 3.0)
    dissipation_sum(a, rho, xi, 2.0)
    weighted_abs_pow_sum(a, rho, xi, 2.5)
    shifted_diff_pow_sums(np.array([0.0, 1.0, 0.5, 2.0]), np.array([1.0, 1.0]), 2, 2.0)
