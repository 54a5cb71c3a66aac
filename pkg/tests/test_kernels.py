"""Backend agreement: the jitted kernels must match the numpy reference."""

import os
import subprocess
import sys

import numpy as np
import pytest

from bqchan import _kernels
from bqchan._kernels import (
    KIND_BOUNDED_RATIONAL,
    KIND_CONSTANT,
    KIND_QUADRATIC_KAPPA,
    backend_name,
    eval_antiderivative,
    eval_coefficients,
    overshoot_integrals,
    pnorm_pow,
    quad_inner,
    rhs_products,
    rhs_products_from_arrays,
    weighted_quadratic,
)

KINDS = [
    (KIND_CONSTANT, (1.5, 2.5, 0.0, 0.0)),
    (KIND_BOUNDED_RATIONAL, (1.0, 1.0, 1.0, 1.0)),
    (KIND_QUADRATIC_KAPPA, (0.0, 0.0, 0.0, 0.0)),
]


@pytest.fixture(scope="module")
def fields():
    rng = np.random.default_rng(0)
    shape = (16, 9)
    names = "theta u1 u2 u1x u1y u2x u2y thx thy".split()
    return {n: rng.normal(size=shape) for n in names}


@pytest.fixture(scope="module")
def wy():
    w = np.full(9, 1.0 / 8)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


@pytest.mark.parametrize("kind,params", KINDS)
def test_coefficients_match_reference(fields, kind, params):
    got = eval_coefficients(fields["theta"], kind, params)
    ref = _kernels._coeffs_numpy(fields["theta"], kind, np.asarray(params))
    for g, r in zip(got, ref):
        assert np.abs(g - r).max() < 1e-14


@pytest.mark.parametrize("kind,params", KINDS)
def test_antiderivative_matches_reference(fields, kind, params):
    got = eval_antiderivative(fields["theta"], kind, params)
    ref = _kernels._antiderivative_numpy(fields["theta"], kind, np.asarray(params))
    assert np.abs(got - ref).max() < 1e-14


@pytest.mark.parametrize("kind,params", KINDS)
def test_products_match_reference(fields, kind, params):
    args = [fields[n] for n in "theta u1 u2 u1x u1y u2x u2y thx thy".split()]
    got = rhs_products(*args, kind, params)
    ref = _kernels._rhs_products_numpy(*args, kind, np.asarray(params))
    for g, r in zip(got, ref):
        assert np.abs(g - r).max() < 1e-13


def test_products_from_arrays_match(fields):
    nu, ka, kp = eval_coefficients(fields["theta"], KIND_QUADRATIC_KAPPA, (0, 0, 0, 0))
    args = [fields[n] for n in "u1 u2 u1x u1y u2x u2y thx thy".split()]
    got = rhs_products_from_arrays(*args, nu, ka, kp)
    ref = _kernels._products_from_arrays_numpy(*args, nu, ka, kp)
    for g, r in zip(got, ref):
        assert np.abs(g - r).max() < 1e-13


def test_reductions_match_reference(fields, wy):
    v = fields["theta"]
    nx = v.shape[0]
    assert pnorm_pow(v, wy, 2.0) == pytest.approx(
        float(((np.abs(v) ** 2) @ wy).sum()) / nx, rel=1e-13
    )
    assert pnorm_pow(v, wy, 3.7) == pytest.approx(
        float(((np.abs(v) ** 3.7) @ wy).sum()) / nx, rel=1e-13
    )
    assert quad_inner(fields["u1"], fields["u2"], wy) == pytest.approx(
        float(((fields["u1"] * fields["u2"]) @ wy).sum()) / nx, rel=1e-12, abs=1e-15
    )
    assert weighted_quadratic(np.abs(v), fields["u1x"], fields["u1y"], wy) == pytest.approx(
        float(((np.abs(v) * (fields["u1x"] ** 2 + fields["u1y"] ** 2)) @ wy).sum()) / nx,
        rel=1e-13,
    )


def test_overshoot_integrals_match(fields, wy):
    th = 2.0 * fields["theta"]
    got = overshoot_integrals(th, wy)
    ref = _kernels._overshoot_integrals_numpy(th, wy)
    for g, r in zip(got, ref):
        assert g == pytest.approx(r, rel=1e-13, abs=1e-300)


def test_env_flag_selects_numpy_backend():
    code = "from bqchan._kernels import backend_name; print(backend_name())"
    env = dict(os.environ, BQ_BACKEND="numpy")
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert out.stdout.strip() == "numpy"


def test_invalid_backend_rejected():
    code = "import bqchan._kernels"
    env = dict(os.environ, BQ_BACKEND="nmba")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.returncode != 0
    assert "BQ_BACKEND" in out.stderr


def test_numpy_backend_runs_a_step():
    code = (
        "from bqchan.spectral import Grid\n"
        "from bqchan.coefficients import get_model\n"
        "from bqchan.timestepper import initial_state, step, StepperConfig\n"
        "g = Grid(16, 8)\n"
        "s = initial_state(g, 'single-mode', amplitude=0.2, theta_amplitude=0.2)\n"
        "s2 = step(s, get_model('quadratic-kappa'), StepperConfig(dt=1e-4, t_end=1.0))\n"
        "print('%.17g' % s2.theta.coeffs[0, 0].real)\n"
    )
    outs = {}
    for backend in ("numpy", "numba"):
        env = dict(os.environ, BQ_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs[backend] = proc.stdout.strip()
    a, b = float(outs["numpy"]), float(outs["numba"])
    assert a == pytest.approx(b, rel=1e-12)


def test_backend_name_reports():
    assert backend_name() in ("numba", "numpy")
