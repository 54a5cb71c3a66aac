"""Temperature-dependent viscosity/diffusivity models and their audits.

A CoefficientModel bundles nu, kappa, their derivatives, the antiderivatives
K(tau) = int_0^tau kappa and B(tau) = int_0^tau sqrt(kappa), and the
assumption constants (floors, growth constants, ratio bound). Shipped presets:

* ``constant``         nu = nu0, kappa = kappa0
* ``bounded-rational`` nu = a + b/(1+tau^2), kappa = c + d/(1+tau^2)
* ``quadratic-kappa``  nu = 2 + sin(tau),    kappa = 1 + tau^2

The audit checks the floor, growth and ratio assumptions by dense sampling
and cross-checks every supplied derivative/antiderivative against finite
differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad

from . import _kernels
from ._kernels import (
    KIND_BOUNDED_RATIONAL,
    KIND_CONSTANT,
    KIND_CUSTOM,
    KIND_QUADRATIC_KAPPA,
)
from .spectral import (
    Parity,
    RealField,
    ddx,
    ddy,
    laplacian,
    to_physical,
    to_spectral,
)


@dataclass(frozen=True)
class CoefficientModel:
    name: str
    nu: Callable
    nu_prime: Callable
    kappa: Callable
    kappa_prime: Callable
    kappa_double_prime: Callable
    kappa_antiderivative: Callable
    sqrt_kappa_antiderivative: Callable
    nu_min: float
    kappa_min: float
    c0: float
    r: float
    c0_tilde: float
    kind: int = KIND_CUSTOM
    params: tuple = field(default=(0.0, 0.0, 0.0, 0.0))

    def eval_coefficients(self, theta_values: np.ndarray):
        """(nu, kappa, kappa') on an array of temperatures; preset models go
        through the jitted kernels, custom models through their callables."""
        if self.kind != KIND_CUSTOM:
            return _kernels.eval_coefficients(theta_values, self.kind, self.params)
        th = np.asarray(theta_values, dtype=float)
        return (
            np.asarray(self.nu(th), dtype=float),
            np.asarray(self.kappa(th), dtype=float),
            np.asarray(self.kappa_prime(th), dtype=float),
        )

    def eval_antiderivative(self, theta_values: np.ndarray) -> np.ndarray:
        if self.kind != KIND_CUSTOM:
            return _kernels.eval_antiderivative(theta_values, self.kind, self.params)
        return np.asarray(self.kappa_antiderivative(np.asarray(theta_values, dtype=float)), dtype=float)


def _quadrature_B(kappa: Callable) -> Callable:
    """Adaptive-quadrature fallback for B(tau) = int_0^tau sqrt(kappa)."""

    def B_scalar(tau: float) -> float:
        val, _ = quad(lambda s: np.sqrt(kappa(s)), 0.0, tau, epsabs=1e-10, epsrel=1e-10)
        return val

    def B(tau):
        arr = np.asarray(tau, dtype=float)
        if arr.ndim == 0:
            return B_scalar(float(arr))
        flat = np.array([B_scalar(float(v)) for v in arr.ravel()])
        return flat.reshape(arr.shape)

    return B


def make_constant(nu0: float = 1.0, kappa0: float = 1.0) -> CoefficientModel:
    if nu0 <= 0 or kappa0 <= 0:
        raise ValueError("constant model needs positive nu0, kappa0")
    return CoefficientModel(
        name="constant",
        nu=lambda t: np.full_like(np.asarray(t, dtype=float), nu0),
        nu_prime=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        kappa=lambda t: np.full_like(np.asarray(t, dtype=float), kappa0),
        kappa_prime=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        kappa_double_prime=lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        kappa_antiderivative=lambda t: kappa0 * np.asarray(t, dtype=float),
        sqrt_kappa_antiderivative=lambda t: np.sqrt(kappa0) * np.asarray(t, dtype=float),
        nu_min=nu0,
        kappa_min=kappa0,
        c0=max(nu0, kappa0),
        r=0.0,
        c0_tilde=1.0,
        kind=KIND_CONSTANT,
        params=(nu0, kappa0, 0.0, 0.0),
    )


def make_bounded_rational(
    a: float = 1.0, b: float = 1.0, c: float = 1.0, d: float = 1.0
) -> CoefficientModel:
    if min(a, c) <= 0 or min(b, d) < 0:
        raise ValueError("bounded-rational model needs a, c > 0 and b, d >= 0")

    def s(t):
        t = np.asarray(t, dtype=float)
        return 1.0 / (1.0 + t * t)

    # max |d/dt (1/(1+t^2))| = 3*sqrt(3)/8 at t = 1/sqrt(3)
    slope = 3.0 * np.sqrt(3.0) / 8.0
    c0 = max(a + b, c + d, b * slope, d * slope)
    kappa_fn = lambda t: c + d * s(t)
    return CoefficientModel(
        name="bounded-rational",
        nu=lambda t: a + b * s(t),
        nu_prime=lambda t: -2.0 * b * np.asarray(t, dtype=float) * s(t) ** 2,
        kappa=kappa_fn,
        kappa_prime=lambda t: -2.0 * d * np.asarray(t, dtype=float) * s(t) ** 2,
        kappa_double_prime=lambda t: d
        * (6.0 * np.asarray(t, dtype=float) ** 2 - 2.0)
        * s(t) ** 3,
        kappa_antiderivative=lambda t: c * np.asarray(t, dtype=float)
        + d * np.arctan(np.asarray(t, dtype=float)),
        sqrt_kappa_antiderivative=_quadrature_B(kappa_fn),
        nu_min=a,
        kappa_min=c,
        c0=c0,
        r=0.0,
        c0_tilde=max(2.0 * b, 2.0 * d, b * slope, d * slope) / c + 1e-9,
        kind=KIND_BOUNDED_RATIONAL,
        params=(a, b, c, d),
    )


def make_quadratic_kappa() -> CoefficientModel:
    def B(t):
        t = np.asarray(t, dtype=float)
        return 0.5 * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))

    return CoefficientModel(
        name="quadratic-kappa",
        nu=lambda t: 2.0 + np.sin(np.asarray(t, dtype=float)),
        nu_prime=lambda t: np.cos(np.asarray(t, dtype=float)),
        kappa=lambda t: 1.0 + np.asarray(t, dtype=float) ** 2,
        kappa_prime=lambda t: 2.0 * np.asarray(t, dtype=float),
        kappa_double_prime=lambda t: np.full_like(np.asarray(t, dtype=float), 2.0),
        kappa_antiderivative=lambda t: np.asarray(t, dtype=float)
        + np.asarray(t, dtype=float) ** 3 / 3.0,
        sqrt_kappa_antiderivative=B,
        nu_min=1.0,
        kappa_min=1.0,
        # nu(tau) <= 3 <= 3(|tau|^2+1) everywhere; c0 = 2 would fail the
        # growth bound near tau ~ 0.45 where 2 + sin(tau) > 2(tau^2 + 1)
        c0=3.0,
        r=1.0,
        c0_tilde=2.0,
        kind=KIND_QUADRATIC_KAPPA,
        params=(0.0, 0.0, 0.0, 0.0),
    )


PRESETS = {
    "constant": make_constant,
    "bounded-rational": make_bounded_rational,
    "quadratic-kappa": make_quadratic_kappa,
}


def get_model(name: str, **params) -> CoefficientModel:
    if name not in PRESETS:
        raise ValueError(f"unknown model preset {name!r}; known: {sorted(PRESETS)}")
    return PRESETS[name](**params)


# ---------------------------------------------------------------------------
# assumption audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    assumption: str
    tau: float
    lhs: float
    rhs: float


@dataclass(frozen=True)
class AssumptionAuditReport:
    ok: bool
    margins: dict
    violations: tuple

    def worst(self, assumption: str) -> float:
        return self.margins[assumption]


def audit_assumptions(
    model: CoefficientModel, tau_lo: float = -20.0, tau_hi: float = 20.0, samples: int = 10_000
) -> AssumptionAuditReport:
    """Check the floor, growth, ratio and consistency assumptions by sampling.

    Margins are (rhs - lhs) minima, so a negative margin is a violation; the
    report records every violated assumption with the worst offending tau.
    """
    if not tau_lo < tau_hi:
        raise ValueError("need tau_lo < tau_hi")
    if samples < 2:
        raise ValueError("need samples >= 2")
    tau = np.unique(np.concatenate([np.linspace(tau_lo, tau_hi, samples), [-1.0, 0.0, 1.0]]))

    nu = np.asarray(model.nu(tau), dtype=float)
    nup = np.asarray(model.nu_prime(tau), dtype=float)
    ka = np.asarray(model.kappa(tau), dtype=float)
    kap = np.asarray(model.kappa_prime(tau), dtype=float)
    kapp = np.asarray(model.kappa_double_prime(tau), dtype=float)

    margins = {}
    violations = []

    def check(name, lhs, rhs):
        margin = rhs - lhs
        i = int(np.argmin(margin))
        margins[name] = float(margin[i])
        if margin[i] < 0.0:
            violations.append(Violation(name, float(tau[i]), float(lhs[i]), float(rhs[i])))

    growth = model.c0 * (np.abs(tau) ** model.r + 1.0)
    growth_hi = model.c0 * (np.abs(tau) ** (model.r + 1.0) + 1.0)

    check("floor_nu", np.full_like(tau, model.nu_min), nu)
    check("floor_kappa", np.full_like(tau, model.kappa_min), ka)
    check("growth_nu_prime", np.abs(nup), growth)
    check("growth_kappa_prime", np.abs(kap), growth)
    check("growth_nu", nu, growth_hi)
    check("growth_kappa", ka, growth_hi)
    check("ratio_nu_prime", np.abs(nup) / ka, np.full_like(tau, model.c0_tilde))
    check("ratio_kappa_prime", np.abs(kap) / ka, np.full_like(tau, model.c0_tilde))
    check("ratio_kappa_double_prime", np.abs(kapp) / ka, np.full_like(tau, model.c0_tilde))

    # derivative / antiderivative consistency on a thinned sample
    h = 1e-5
    thin = tau[:: max(1, len(tau) // 200)]
    scale = np.maximum.reduce([np.abs(model.kappa_prime(thin)), np.abs(model.kappa(thin)), np.ones_like(thin)])
    fd_kp = (model.kappa(thin + h) - model.kappa(thin - h)) / (2 * h)
    check("consistency_kappa_prime", np.abs(fd_kp - model.kappa_prime(thin)) / scale, np.full_like(thin, 1e-6))
    fd_K = (model.kappa_antiderivative(thin + h) - model.kappa_antiderivative(thin - h)) / (2 * h)
    check("consistency_K_prime", np.abs(fd_K - model.kappa(thin)) / scale, np.full_like(thin, 1e-6))
    coarse = thin[:: max(1, len(thin) // 20)]
    fd_B = (
        np.asarray(model.sqrt_kappa_antiderivative(coarse + h), dtype=float)
        - np.asarray(model.sqrt_kappa_antiderivative(coarse - h), dtype=float)
    ) / (2 * h)
    check(
        "consistency_B_prime",
        np.abs(fd_B - np.sqrt(model.kappa(coarse))) / np.maximum(np.sqrt(model.kappa(coarse)), 1.0),
        np.full_like(coarse, 1e-6),
    )

    K0 = float(np.asarray(model.kappa_antiderivative(0.0)))
    B0 = float(np.asarray(model.sqrt_kappa_antiderivative(0.0)))
    check("anchor_K0", np.array([abs(K0)]), np.array([1e-12]))
    check("anchor_B0", np.array([abs(B0)]), np.array([1e-12]))
    Kvals = np.asarray(model.kappa_antiderivative(tau), dtype=float)
    check("monotone_K", np.zeros(len(tau) - 1), np.diff(Kvals))

    return AssumptionAuditReport(ok=not violations, margins=margins, violations=tuple(violations))


# ---------------------------------------------------------------------------
# Kirchhoff transforms
# ---------------------------------------------------------------------------


def kirchhoff_hat(theta: RealField, model: CoefficientModel) -> RealField:
    """Pointwise K(theta); vanishes wherever theta vanishes since K(0) = 0."""
    return RealField(theta.grid, model.eval_antiderivative(theta.values))


def kirchhoff_breve(theta: RealField, model: CoefficientModel) -> RealField:
    """Pointwise B(theta) = int_0^theta sqrt(kappa)."""
    vals = np.asarray(model.sqrt_kappa_antiderivative(theta.values), dtype=float)
    return RealField(theta.grid, vals)


@dataclass(frozen=True)
class KirchhoffReport:
    max_rel_err_grad: float
    max_rel_err_lap: float
    aliasing_flagged: bool


def verify_kirchhoff_identities(theta: RealField, model: CoefficientModel) -> KirchhoffReport:
    """Check grad(K(theta)) = kappa(theta) grad(theta) and
    lap(K(theta)) = kappa(theta) lap(theta) + kappa'(theta) |grad theta|^2
    spectrally/pointwise, reporting relative L2 discrepancies."""
    grid = theta.grid
    F = to_spectral(theta, Parity.SINE)
    hat = to_spectral(kirchhoff_hat(theta, model), Parity.SINE)

    nu_v, ka_v, kp_v = model.eval_coefficients(theta.values)
    thx = to_physical(ddx(F)).values
    thy = to_physical(ddy(F)).values
    hat_x = to_physical(ddx(hat)).values
    hat_y = to_physical(ddy(hat)).values

    num_g = np.sqrt(
        _quad2(grid, hat_x - ka_v * thx) + _quad2(grid, hat_y - ka_v * thy)
    )
    den_g = max(np.sqrt(_quad2(grid, ka_v * thx) + _quad2(grid, ka_v * thy)), 1e-300)

    lap_hat = to_physical(laplacian(hat)).values
    lap_th = to_physical(laplacian(F)).values
    rhs = ka_v * lap_th + kp_v * (thx ** 2 + thy ** 2)
    num_l = np.sqrt(_quad2(grid, lap_hat - rhs))
    den_l = max(np.sqrt(_quad2(grid, rhs)), 1e-300)

    grad_err = num_g / den_g
    lap_err = num_l / den_l
    return KirchhoffReport(grad_err, lap_err, bool(max(grad_err, lap_err) > 1e-3))


def _quad2(grid, values) -> float:
    return _kernels.pnorm_pow(values, grid.wy, 2.0)
