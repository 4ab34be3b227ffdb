"""Backend equivalence: the numba kernels and the numpy fallbacks must agree.

State-advancing kernels (shift, relax) use only +, -, * arithmetic and are
required to match bitwise; reductions involve libm powers and summation
order, so they are compared to tight tolerances instead.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from dampedwave import _kernels as K


def _random_pair(n, seed):
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, 0], dtype=np.uint64)))
    return rng.normal(size=n), rng.normal(size=n)


numba_only = pytest.mark.skipif(K.BACKEND != "numba", reason="numba backend not active")


@numba_only
class TestBackendAgreement:
    def test_shift_pair_bitwise(self):
        rho, xi = _random_pair(257, 1)
        outs = []
        for fn in (K._np_shift_pair, K._nb_shift_pair):
            o1, o2 = np.empty_like(rho), np.empty_like(xi)
            fn(rho, xi, 0.125, -2.5, o1, o2)
            outs.append((o1.copy(), o2.copy()))
        np.testing.assert_array_equal(outs[0][0], outs[1][0])
        np.testing.assert_array_equal(outs[0][1], outs[1][1])

    def test_relax_pair_bitwise(self):
        rho, xi = _random_pair(257, 2)
        factor = np.exp(-np.abs(np.sin(np.arange(257))))
        factor[::5] = 1.0
        outs = []
        for fn in (K._np_relax_pair, K._nb_relax_pair):
            o1, o2 = np.empty_like(rho), np.empty_like(xi)
            fn(rho, xi, factor, o1, o2)
            outs.append((o1.copy(), o2.copy()))
        np.testing.assert_array_equal(outs[0][0], outs[1][0])
        np.testing.assert_array_equal(outs[0][1], outs[1][1])

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_reductions_match_to_roundoff(self, p):
        rho, xi = _random_pair(301, 3)
        a = np.abs(np.cos(np.arange(301)))
        pairs = [
            (K._np_abs_pow_sum(rho, p), K._nb_abs_pow_sum(rho, p)),
            (K._np_pair_pow_sum(rho, xi, p), K._nb_pair_pow_sum(rho, xi, p)),
            (K._np_shifted_pair_pow_sum(rho, xi, 0.3, p), K._nb_shifted_pair_pow_sum(rho, xi, 0.3, p)),
            (K._np_dissipation_sum(a, rho, xi, p), K._nb_dissipation_sum(a, rho, xi, p)),
            (K._np_weighted_abs_pow_sum(a, rho, xi, p), K._nb_weighted_abs_pow_sum(a, rho, xi, p)),
        ]
        for np_val, nb_val in pairs:
            assert np_val == pytest.approx(nb_val, rel=1e-13)

    def test_shifted_diff_pow_sums_match(self):
        u = np.sin(np.linspace(0.0, 9.0, 241))
        w = np.full(161, 1.0 / 160)
        a = K._np_shifted_diff_pow_sums(u, w, 80, 1.5)
        b = K._nb_shifted_diff_pow_sums(u, w, 80, 1.5)
        np.testing.assert_allclose(a, b, rtol=1e-13)


def test_relax_pair_supports_aliased_output():
    rho, xi = _random_pair(64, 4)
    factor = np.full(64, 0.5)
    expected_rho, expected_xi = np.empty_like(rho), np.empty_like(xi)
    K.relax_pair(rho.copy(), xi.copy(), factor, expected_rho, expected_xi)
    r2, x2 = rho.copy(), xi.copy()
    K.relax_pair(r2, x2, factor, r2, x2)
    np.testing.assert_array_equal(r2, expected_rho)
    np.testing.assert_array_equal(x2, expected_xi)


def test_env_flag_forces_numpy_backend():
    code = "import dampedwave; print(dampedwave.BACKEND)"
    env = dict(os.environ, DAMPEDWAVE_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "numpy"


def test_env_flag_rejects_unknown_backend():
    code = "import dampedwave"
    env = dict(os.environ, DAMPEDWAVE_BACKEND="fortran")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode != 0


def test_states_identical_across_backends_end_to_end(tmp_path):
    # A short damped run must produce bitwise-identical final states under
    # both backends (the decay factors are always computed by numpy).
    script = tmp_path / "runner.py"
    script.write_text(
        "import math\n"
        "import numpy as np\n"
        "import dampedwave as dw\n"
        "from dampedwave.solver import run\n"
        "g = dw.Grid(50)\n"
        "x = g.centers\n"
        "rho0 = 1 + np.sin(2 * math.pi * x)\n"
        "cfg = dw.SimConfig(grid=g, boundary=dw.dirichlet(), damping=dw.indicator_field(),\n"
        "                   t_final=1.0, p=2.0)\n"
        "res = run(dw.GridState(g, rho0, rho0.copy()), cfg)\n"
        "print(repr(res.final.rho.tobytes().hex()))\n"
        "print(repr(res.final.xi.tobytes().hex()))\n"
    )
    outputs = []
    for backend in ("numpy", "numba" if K.BACKEND == "numba" else "numpy"):
        env = dict(os.environ, DAMPEDWAVE_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, str(script)], env=env, capture_output=True, text=True, check=True
        )
        outputs.append(out.stdout)
    assert outputs[0] == outputs[1]
