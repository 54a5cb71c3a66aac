"""Hot pointwise kernels: numba-jitted loops with a pure-numpy fallback.

Backend selection is done once at import time from the ``BQ_BACKEND``
environment variable: ``numba`` forces the jitted path, ``numpy`` forces the
fallback, anything else (or unset) auto-selects numba when importable.
``benchmarks/bench_backends.py`` times the two paths against each other.

The jitted kernels fuse coefficient evaluation with the flux/advection
products so each grid point is touched once; the numpy fallback spells the
same arithmetic with array temporaries. Both paths must agree to roundoff
(covered by tests/test_kernels.py).
"""

from __future__ import annotations

import math
import os

import numpy as np

# Coefficient-law tags shared with coefficients.py. CUSTOM models evaluate
# their callables outside the kernels and use the *_from_arrays entry points.
KIND_CUSTOM = -1
KIND_CONSTANT = 0
KIND_BOUNDED_RATIONAL = 1
KIND_QUADRATIC_KAPPA = 2


def _select_backend() -> bool:
    choice = os.environ.get("BQ_BACKEND", "auto").strip().lower()
    if choice in ("numpy", "np"):
        return False
    if choice == "numba":
        import numba  # noqa: F401  (hard error if forced but unavailable)

        return True
    if choice not in ("", "auto"):
        raise ValueError(f"BQ_BACKEND must be 'numba', 'numpy' or 'auto', got {choice!r}")
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_USE_NUMBA = _select_backend()


def backend_name() -> str:
    """Active kernel backend, either ``"numba"`` or ``"numpy"``."""
    return "numba" if _USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _coeffs_numpy(theta, kind, params):
    if kind == KIND_CONSTANT:
        nu = np.full_like(theta, params[0])
        ka = np.full_like(theta, params[1])
        kp = np.zeros_like(theta)
    elif kind == KIND_BOUNDED_RATIONAL:
        a, b, c, d = params[0], params[1], params[2], params[3]
        s = 1.0 / (1.0 + theta * theta)
        nu = a + b * s
        ka = c + d * s
        kp = -2.0 * d * theta * s * s
    elif kind == KIND_QUADRATIC_KAPPA:
        nu = 2.0 + np.sin(theta)
        ka = 1.0 + theta * theta
        kp = 2.0 * theta
    else:
        raise ValueError(f"unknown coefficient kind {kind}")
    return nu, ka, kp


def _antiderivative_numpy(theta, kind, params):
    if kind == KIND_CONSTANT:
        return params[1] * theta
    if kind == KIND_BOUNDED_RATIONAL:
        c, d = params[2], params[3]
        return c * theta + d * np.arctan(theta)
    if kind == KIND_QUADRATIC_KAPPA:
        return theta + theta ** 3 / 3.0
    raise ValueError(f"unknown coefficient kind {kind}")


def _products_from_arrays_numpy(u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu, ka, kp):
    return (
        nu * u1x,
        nu * u1y,
        nu * u2x,
        nu * u2y,
        ka * thx,
        ka * thy,
        u1 * u1x + u2 * u1y,
        u1 * u2x + u2 * u2y,
        u1 * thx + u2 * thy,
        kp * thy,
    )


def _rhs_products_numpy(theta, u1, u2, u1x, u1y, u2x, u2y, thx, thy, kind, params):
    nu, ka, kp = _coeffs_numpy(theta, kind, params)
    return _products_from_arrays_numpy(u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu, ka, kp)


def _inner_numpy(f, g, wy):
    nx = f.shape[0]
    return float(((f * g) @ wy).sum()) / nx


def _weighted_quadratic_numpy(c, fx, fy, wy):
    # integral of c * (fx^2 + fy^2)
    nx = fx.shape[0]
    return float(((c * (fx * fx + fy * fy)) @ wy).sum()) / nx


def _overshoot_integrals_numpy(theta, wy):
    nx = theta.shape[0]
    plus = np.maximum(theta - 1.0, 0.0)
    minus = np.maximum(-(theta + 1.0), 0.0)
    p2 = float(((plus ** 2) @ wy).sum()) / nx
    p4 = float(((plus ** 4) @ wy).sum()) / nx
    m2 = float(((minus ** 2) @ wy).sum()) / nx
    m4 = float(((minus ** 4) @ wy).sum()) / nx
    return p2, p4, m2, m4


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if _USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _coeffs_point(th, kind, p0, p1, p2, p3):
        if kind == KIND_CONSTANT:
            return p0, p1, 0.0
        if kind == KIND_BOUNDED_RATIONAL:
            s = 1.0 / (1.0 + th * th)
            return p0 + p1 * s, p2 + p3 * s, -2.0 * p3 * th * s * s
        # KIND_QUADRATIC_KAPPA
        return 2.0 + math.sin(th), 1.0 + th * th, 2.0 * th

    @njit(cache=True)
    def _coeffs_numba(theta, kind, params):
        nu = np.empty_like(theta)
        ka = np.empty_like(theta)
        kp = np.empty_like(theta)
        p0, p1, p2, p3 = params[0], params[1], params[2], params[3]
        for i in range(theta.shape[0]):
            for j in range(theta.shape[1]):
                n, k, q = _coeffs_point(theta[i, j], kind, p0, p1, p2, p3)
                nu[i, j] = n
                ka[i, j] = k
                kp[i, j] = q
        return nu, ka, kp

    @njit(cache=True)
    def _antiderivative_numba(theta, kind, params):
        out = np.empty_like(theta)
        for i in range(theta.shape[0]):
            for j in range(theta.shape[1]):
                th = theta[i, j]
                if kind == KIND_CONSTANT:
                    out[i, j] = params[1] * th
                elif kind == KIND_BOUNDED_RATIONAL:
                    out[i, j] = params[2] * th + params[3] * math.atan(th)
                else:
                    out[i, j] = th + th * th * th / 3.0
        return out

    @njit(cache=True)
    def _rhs_products_numba(theta, u1, u2, u1x, u1y, u2x, u2y, thx, thy, kind, params):
        shape = theta.shape
        q11 = np.empty(shape)
        q12 = np.empty(shape)
        q21 = np.empty(shape)
        q22 = np.empty(shape)
        r1 = np.empty(shape)
        r2 = np.empty(shape)
        a1 = np.empty(shape)
        a2 = np.empty(shape)
        at = np.empty(shape)
        src = np.empty(shape)
        p0, p1, p2, p3 = params[0], params[1], params[2], params[3]
        for i in range(shape[0]):
            for j in range(shape[1]):
                nu, ka, kp = _coeffs_point(theta[i, j], kind, p0, p1, p2, p3)
                q11[i, j] = nu * u1x[i, j]
                q12[i, j] = nu * u1y[i, j]
                q21[i, j] = nu * u2x[i, j]
                q22[i, j] = nu * u2y[i, j]
                r1[i, j] = ka * thx[i, j]
                r2[i, j] = ka * thy[i, j]
                a1[i, j] = u1[i, j] * u1x[i, j] + u2[i, j] * u1y[i, j]
                a2[i, j] = u1[i, j] * u2x[i, j] + u2[i, j] * u2y[i, j]
                at[i, j] = u1[i, j] * thx[i, j] + u2[i, j] * thy[i, j]
                src[i, j] = kp * thy[i, j]
        return q11, q12, q21, q22, r1, r2, a1, a2, at, src

    @njit(cache=True)
    def _products_from_arrays_numba(u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu, ka, kp):
        shape = u1.shape
        q11 = np.empty(shape)
        q12 = np.empty(shape)
        q21 = np.empty(shape)
        q22 = np.empty(shape)
        r1 = np.empty(shape)
        r2 = np.empty(shape)
        a1 = np.empty(shape)
        a2 = np.empty(shape)
        at = np.empty(shape)
        src = np.empty(shape)
        for i in range(shape[0]):
            for j in range(shape[1]):
                q11[i, j] = nu[i, j] * u1x[i, j]
                q12[i, j] = nu[i, j] * u1y[i, j]
                q21[i, j] = nu[i, j] * u2x[i, j]
                q22[i, j] = nu[i, j] * u2y[i, j]
                r1[i, j] = ka[i, j] * thx[i, j]
                r2[i, j] = ka[i, j] * thy[i, j]
                a1[i, j] = u1[i, j] * u1x[i, j] + u2[i, j] * u1y[i, j]
                a2[i, j] = u1[i, j] * u2x[i, j] + u2[i, j] * u2y[i, j]
                at[i, j] = u1[i, j] * thx[i, j] + u2[i, j] * thy[i, j]
                src[i, j] = kp[i, j] * thy[i, j]
        return q11, q12, q21, q22, r1, r2, a1, a2, at, src

    @njit(cache=True)
    def _pnorm_pow_numba(values, wy, p):
        # integer powers dominate the diagnostics; float ** is slow in loops
        acc = 0.0
        if p == 2.0:
            for i in range(values.shape[0]):
                for j in range(values.shape[1]):
                    v = values[i, j]
                    acc += v * v * wy[j]
        elif p == 4.0:
            for i in range(values.shape[0]):
                for j in range(values.shape[1]):
                    v = values[i, j]
                    v2 = v * v
                    acc += v2 * v2 * wy[j]
        else:
            for i in range(values.shape[0]):
                for j in range(values.shape[1]):
                    acc += abs(values[i, j]) ** p * wy[j]
        return acc / values.shape[0]

    @njit(cache=True)
    def _inner_numba(f, g, wy):
        acc = 0.0
        for i in range(f.shape[0]):
            for j in range(f.shape[1]):
                acc += f[i, j] * g[i, j] * wy[j]
        return acc / f.shape[0]

    @njit(cache=True)
    def _weighted_quadratic_numba(c, fx, fy, wy):
        acc = 0.0
        for i in range(fx.shape[0]):
            for j in range(fx.shape[1]):
                acc += c[i, j] * (fx[i, j] ** 2 + fy[i, j] ** 2) * wy[j]
        return acc / fx.shape[0]

    @njit(cache=True)
    def _overshoot_integrals_numba(theta, wy):
        p2 = 0.0
        p4 = 0.0
        m2 = 0.0
        m4 = 0.0
        for i in range(theta.shape[0]):
            for j in range(theta.shape[1]):
                th = theta[i, j]
                w = wy[j]
                if th > 1.0:
                    d = th - 1.0
                    p2 += d * d * w
                    p4 += d * d * d * d * w
                elif th < -1.0:
                    d = -(th + 1.0)
                    m2 += d * d * w
                    m4 += d * d * d * d * w
        nx = theta.shape[0]
        return p2 / nx, p4 / nx, m2 / nx, m4 / nx


# ---------------------------------------------------------------------------
# public entry points
# ---------------------------------------------------------------------------


def eval_coefficients(theta, kind, params):
    """Pointwise (nu, kappa, kappa') for a preset coefficient law."""
    params = np.asarray(params, dtype=np.float64)
    if _USE_NUMBA:
        return _coeffs_numba(theta, kind, params)
    return _coeffs_numpy(theta, kind, params)


def eval_antiderivative(theta, kind, params):
    """Pointwise K(theta) = integral of kappa from 0 for a preset law."""
    params = np.asarray(params, dtype=np.float64)
    if _USE_NUMBA:
        return _antiderivative_numba(theta, kind, params)
    return _antiderivative_numpy(theta, kind, params)


def rhs_products(theta, u1, u2, u1x, u1y, u2x, u2y, thx, thy, kind, params):
    """Fused pointwise stage of the right-hand side for preset laws.

    Returns the ten collocation arrays
    (nu*u1x, nu*u1y, nu*u2x, nu*u2y, kappa*thx, kappa*thy,
     u.grad u1, u.grad u2, u.grad theta, kappa'(theta)*thy).
    """
    params = np.asarray(params, dtype=np.float64)
    if _USE_NUMBA:
        return _rhs_products_numba(theta, u1, u2, u1x, u1y, u2x, u2y, thx, thy, kind, params)
    return _rhs_products_numpy(theta, u1, u2, u1x, u1y, u2x, u2y, thx, thy, kind, params)


def rhs_products_from_arrays(u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu, ka, kp):
    """Same products as :func:`rhs_products` with coefficients given as arrays
    (path used by custom, non-preset coefficient models)."""
    if _USE_NUMBA:
        return _products_from_arrays_numba(u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu, ka, kp)
    return _products_from_arrays_numpy(u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu, ka, kp)


def pnorm_pow(values, wy, p):
    """Quadrature of |values|**p with trapezoid-in-y, rectangle-in-x weights."""
    if _USE_NUMBA:
        return _pnorm_pow_numba(values, wy, float(p))
    return float(((np.abs(values) ** p) @ wy).sum()) / values.shape[0]


def quad_inner(f, g, wy):
    """Quadrature of f*g."""
    if _USE_NUMBA:
        return _inner_numba(f, g, wy)
    return _inner_numpy(f, g, wy)


def weighted_quadratic(c, fx, fy, wy):
    """Quadrature of c*(fx**2 + fy**2); used for the dissipation integrals."""
    if _USE_NUMBA:
        return _weighted_quadratic_numba(c, fx, fy, wy)
    return _weighted_quadratic_numpy(c, fx, fy, wy)


def overshoot_integrals(theta, wy):
    """Quadratures of (theta-1)_+ and (theta+1)_- to the powers 2 and 4.

    Returns (plus_p2, plus_p4, minus_p2, minus_p4), each the raw integral
    before the 1/p root.
    """
    if _USE_NUMBA:
        return _overshoot_integrals_numba(theta, wy)
    return _overshoot_integrals_numpy(theta, wy)
