"""Spatial discretization of the perturbative Boussinesq system.

Velocity tendency:    P[ div(nu(theta) grad u) - u.grad u + theta e2 + (1-y) e2 ]
Temperature tendency:    div(kappa(theta) grad theta) - u.grad theta + u2
                          - kappa'(theta) theta_y

with P the Leray projector, exact per mode in the sine/cosine eigenbasis.
Variable-coefficient diffusion is evaluated in flux form on the collocation
mesh; every pointwise product is 2/3-dealiased after transforming back.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as _fft

from . import _kernels
from ._kernels import KIND_CUSTOM
from .coefficients import CoefficientModel
from .spectral import (
    Grid,
    Parity,
    RealField,
    SpectralField,
    dealias,
    ddx,
    ddy,
    sobolev_norm,
    to_physical,
    to_spectral,
)


@dataclass(frozen=True)
class State:
    """Divergence-free velocity plus perturbative temperature at time t."""

    u1: SpectralField  # COSINE
    u2: SpectralField  # SINE
    theta: SpectralField  # SINE
    t: float

    @property
    def grid(self) -> Grid:
        return self.u1.grid


@dataclass(frozen=True)
class Tendency:
    du1: SpectralField
    du2: SpectralField
    dtheta: SpectralField


@dataclass(frozen=True)
class PressureField:
    p: SpectralField  # COSINE, zero mean


@dataclass(frozen=True)
class RhsAux:
    """Pointwise extrema needed for the CFL checks, gathered for free while
    the collocation values are in hand."""

    max_speed: float
    max_nu_excess: float
    max_kappa_excess: float


def _require(field: SpectralField, parity: Parity, name: str):
    if field.parity is not parity:
        raise ValueError(f"{name} must have {parity.name} parity, got {field.parity.name}")


@lru_cache(maxsize=8)
def buoyancy_coeffs(grid: Grid) -> np.ndarray:
    """Sine coefficients of the background buoyancy (1 - y), x-independent.

    The series decays like 1/n; that is acceptable because the Leray
    projector annihilates every k = 0 contribution to u2 exactly.
    """
    vals = 1.0 - grid.y
    out = np.zeros((grid.nx, grid.ny), dtype=complex)
    out[0, : grid.ny - 1] = _fft.dst(vals[1:-1], type=1) / grid.ny
    return out


def divergence_coeffs(u1: SpectralField, u2: SpectralField) -> np.ndarray:
    """COSINE-layout coefficients of d/dx u1 + d/dy u2."""
    grid = u1.grid
    d = 1j * grid.kx[:, None] * u1.coeffs
    d[:, 1:] += (np.pi * np.arange(1, grid.ny + 1))[None, :] * u2.coeffs
    return d


def leray_project(f1: SpectralField, f2: SpectralField):
    """Remove the gradient component per mode; output is exactly
    divergence-free at coefficient level and the projector is idempotent."""
    _require(f1, Parity.COSINE, "f1")
    _require(f2, Parity.SINE, "f2")
    grid = f1.grid
    d = divergence_coeffs(f1, f2)
    lam = grid.lam(Parity.COSINE)
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(lam > 0.0, d / (-lam), 0.0)
    nsin = (np.pi * np.arange(1, grid.ny + 1))[None, :]
    g1 = f1.coeffs - 1j * grid.kx[:, None] * phi
    g2 = f2.coeffs + nsin * phi[:, 1:]
    return f1.with_coeffs(g1), f2.with_coeffs(g2)


def state_divergence_residual(s: State) -> float:
    """|div u|_2 relative to the velocity H1 magnitude."""
    div = SpectralField(s.grid, Parity.COSINE, divergence_coeffs(s.u1, s.u2))
    mag = np.hypot(sobolev_norm(s.u1, 1), sobolev_norm(s.u2, 1))
    return sobolev_norm(div, 0) / max(mag, 1e-300)


def mean_u1(s: State) -> float:
    return float(s.u1.coeffs[0, 0].real)


def _collocation(s: State):
    u1 = to_physical(s.u1).values
    u2 = to_physical(s.u2).values
    th = to_physical(s.theta).values
    u1x = to_physical(ddx(s.u1)).values
    u1y = to_physical(ddy(s.u1)).values
    u2x = to_physical(ddx(s.u2)).values
    u2y = to_physical(ddy(s.u2)).values
    thx = to_physical(ddx(s.theta)).values
    thy = to_physical(ddy(s.theta)).values
    return u1, u2, th, u1x, u1y, u2x, u2y, thx, thy


def _products(model: CoefficientModel, th, u1, u2, u1x, u1y, u2x, u2y, thx, thy):
    if model.kind != KIND_CUSTOM:
        return _kernels.rhs_products(
            th, u1, u2, u1x, u1y, u2x, u2y, thx, thy, model.kind, model.params
        )
    nu_v, ka_v, kp_v = model.eval_coefficients(th)
    return _kernels.rhs_products_from_arrays(
        u1, u2, u1x, u1y, u2x, u2y, thx, thy, nu_v, ka_v, kp_v
    )


def _spec(grid: Grid, values: np.ndarray, parity: Parity) -> SpectralField:
    return dealias(to_spectral(RealField(grid, values), parity))


def _assemble(s: State, model: CoefficientModel, forcing=None):
    """Unprojected velocity forcing (G1, G2), temperature tendency, and aux.

    G = div(nu(theta) grad u) - u.grad u + theta e2 + (1-y) e2 (+ injected
    forcing); the caller applies the Leray projector for the dynamics or the
    Poisson solve for the pressure.
    """
    grid = s.grid
    u1, u2, th, u1x, u1y, u2x, u2y, thx, thy = _collocation(s)
    q11, q12, q21, q22, r1, r2, a1, a2, at, src = _products(
        model, th, u1, u2, u1x, u1y, u2x, u2y, thx, thy
    )

    terms = {
        "div(nu grad u1)": ddx(_spec(grid, q11, Parity.COSINE)).coeffs
        + ddy(_spec(grid, q12, Parity.SINE)).coeffs,
        "div(nu grad u2)": ddx(_spec(grid, q21, Parity.SINE)).coeffs
        + ddy(_spec(grid, q22, Parity.COSINE)).coeffs,
        "div(kappa grad theta)": ddx(_spec(grid, r1, Parity.SINE)).coeffs
        + ddy(_spec(grid, r2, Parity.COSINE)).coeffs,
        "u.grad u1": _spec(grid, a1, Parity.COSINE).coeffs,
        "u.grad u2": _spec(grid, a2, Parity.SINE).coeffs,
        "u.grad theta": _spec(grid, at, Parity.SINE).coeffs,
        "kappa'(theta) theta_y": _spec(grid, src, Parity.SINE).coeffs,
    }

    g1 = terms["div(nu grad u1)"] - terms["u.grad u1"]
    g2 = (
        terms["div(nu grad u2)"]
        - terms["u.grad u2"]
        + s.theta.coeffs
        + buoyancy_coeffs(grid)
    )
    dth = (
        terms["div(kappa grad theta)"]
        - terms["u.grad theta"]
        + s.u2.coeffs
        - terms["kappa'(theta) theta_y"]
    )

    if forcing is not None:
        fu1, fu2, fth = forcing.eval(s.t, grid)
        g1 = g1 + _spec(grid, fu1, Parity.COSINE).coeffs
        g2 = g2 + _spec(grid, fu2, Parity.SINE).coeffs
        dth = dth + _spec(grid, fth, Parity.SINE).coeffs

    for name, arr in terms.items():
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite right-hand-side term: {name}")
    for name, arr in (("velocity forcing", g1), ("buoyancy sum", g2), ("temperature tendency", dth)):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError(f"non-finite right-hand-side term: {name}")

    nu_v, ka_v, _ = model.eval_coefficients(th)
    aux = RhsAux(
        max_speed=float(max(np.abs(u1).max(), np.abs(u2).max())),
        max_nu_excess=max(float((nu_v - model.nu_min).max()), 0.0),
        max_kappa_excess=max(float((ka_v - model.kappa_min).max()), 0.0),
    )
    return g1, g2, dth, aux


def rhs_with_aux(s: State, model: CoefficientModel, forcing=None):
    grid = s.grid
    g1, g2, dth, aux = _assemble(s, model, forcing)
    f1 = SpectralField(grid, Parity.COSINE, g1)
    f2 = SpectralField(grid, Parity.SINE, g2)
    p1, p2 = leray_project(f1, f2)
    c1 = p1.coeffs.copy()
    # the mean of u1 is a conserved quantity of the continuous system; pin
    # its tendency so quadrature noise cannot drift it
    c1[0, 0] = 0.0
    tend = Tendency(
        du1=SpectralField(grid, Parity.COSINE, c1),
        du2=p2,
        dtheta=SpectralField(grid, Parity.SINE, dth),
    )
    return tend, aux


def rhs(s: State, model: CoefficientModel, forcing=None) -> Tendency:
    """Full (projected) semi-discrete tendency of the state."""
    return rhs_with_aux(s, model, forcing)[0]


def recover_pressure(s: State, model: CoefficientModel) -> PressureField:
    """Solve lap p = div G mode by mode with G the unprojected velocity
    forcing; u_t is divergence-free and drops. Zero-mean normalization."""
    grid = s.grid
    g1, g2, _, _ = _assemble(s, model)
    d = divergence_coeffs(
        SpectralField(grid, Parity.COSINE, g1), SpectralField(grid, Parity.SINE, g2)
    )
    lam = grid.lam(Parity.COSINE)
    with np.errstate(invalid="ignore", divide="ignore"):
        phat = np.where(lam > 0.0, d / (-lam), 0.0)
    phat[0, 0] = 0.0
    return PressureField(p=SpectralField(grid, Parity.COSINE, phat))


def velocity_forcing_fields(s: State, model: CoefficientModel):
    """Unprojected G = div(nu grad u) - u.grad u + theta e2 + (1-y) e2 as
    spectral fields (test/diagnostic hook for the pressure residual)."""
    grid = s.grid
    g1, g2, _, _ = _assemble(s, model)
    return (
        SpectralField(grid, Parity.COSINE, g1),
        SpectralField(grid, Parity.SINE, g2),
    )


def project_state(s: State) -> State:
    """Re-impose the State invariants (projection, pinned u1 mean)."""
    u1p, u2p = leray_project(s.u1, s.u2)
    c = u1p.coeffs.copy()
    c[0, 0] = 0.0
    return State(u1p.with_coeffs(c), u2p, s.theta, s.t)


def validate_state(s: State, div_tol: float = 1e-12, mean_tol: float = 1e-12):
    """Raise if the divergence/mean/parity invariants fail."""
    _require(s.u1, Parity.COSINE, "u1")
    _require(s.u2, Parity.SINE, "u2")
    _require(s.theta, Parity.SINE, "theta")
    for name, f in (("u1", s.u1), ("u2", s.u2), ("theta", s.theta)):
        if not np.all(np.isfinite(f.coeffs)):
            raise ValueError(f"non-finite coefficients in {name}")
    div = state_divergence_residual(s)
    if div > div_tol:
        raise ValueError(f"divergence residual {div:.3e} exceeds {div_tol:.1e}")
    m = abs(mean_u1(s))
    if m > mean_tol:
        raise ValueError(f"mean of u1 is {m:.3e}, exceeds {mean_tol:.1e}")
