"""IMEX time integration with the constant-floor diffusion handled exactly.

The coefficient floors give a linear part L = diag(-nu_min*lambda) (velocity)
and diag(-kappa_min*lambda) (temperature) that is diagonal in the eigenbasis
and integrated by its exact exponential; the remainder (variable-coefficient
excess diffusion, advection, buoyancy, the kappa' source) is explicit.

Schemes: IMEX_EULER is the exponential (Lawson) Euler step
    X(t+dt) = E (X + dt N(X)),          E = exp(L dt),
IMEX_BDF2 is BDF2 applied to the integrating-factor variable with the
nonlinearity extrapolated, one evaluation per step:
    X(t+dt) = (4 E X - E^2 X_prev + 2 dt (2 E N - E^2 N_prev)) / 3,
started with one Euler step (and restarted the same way after dt changes).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .coefficients import CoefficientModel
from .dynamics import State, leray_project, rhs_with_aux
from .spectral import (
    Grid,
    Parity,
    SpectralField,
    random_band_limited,
    sobolev_norm,
    to_physical,
)

SCHEMES = ("IMEX_EULER", "IMEX_BDF2")


class CFLViolation(RuntimeError):
    pass


@dataclass
class StepperConfig:
    dt: float
    t_end: float
    scheme: str = "IMEX_BDF2"
    cfl_safety: float = 0.9
    adaptive: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")


@dataclass
class Trajectory:
    times: list = dc_field(default_factory=list)
    records: list = dc_field(default_factory=list)
    states: list = dc_field(default_factory=list)
    extra: list = dc_field(default_factory=list)
    dt_log: list = dc_field(default_factory=list)
    failed: str | None = None
    final_state: State | None = None


def _cfl_limits(grid: Grid, aux, cfg: StepperConfig):
    h = min(1.0 / grid.nx, 1.0 / grid.ny)
    adv = np.inf if aux.max_speed < 1e-14 else cfg.cfl_safety * h / aux.max_speed
    excess = max(aux.max_nu_excess, aux.max_kappa_excess)
    diff = np.inf if excess < 1e-14 else cfg.cfl_safety * h * h / (2.0 * excess)
    return adv, diff


class Stepper:
    """Stateful driver for one trajectory (holds the BDF2 history)."""

    def __init__(self, model: CoefficientModel, cfg: StepperConfig, forcing=None):
        self.model = model
        self.cfg = cfg
        self.forcing = forcing
        self.dt = cfg.dt
        self.dt_log: list = []
        self._history = None  # (E, E2 triples valid-for-dt, X_prev, N_prev)
        self._exp_cache: dict = {}

    def _factors(self, grid: Grid, dt: float):
        key = (grid.nx, grid.ny, dt)
        if key not in self._exp_cache:
            lam_c = grid.lam(Parity.COSINE)
            lam_s = grid.lam(Parity.SINE)
            Eu1 = np.exp(-self.model.nu_min * lam_c * dt)
            Eu2 = np.exp(-self.model.nu_min * lam_s * dt)
            Eth = np.exp(-self.model.kappa_min * lam_s * dt)
            self._exp_cache.clear()  # dt rarely changes; keep one entry
            self._exp_cache[key] = (Eu1, Eu2, Eth)
        return self._exp_cache[key]

    def _explicit_part(self, s: State):
        tend, aux = rhs_with_aux(s, self.model, self.forcing)
        grid = s.grid
        lam_c = grid.lam(Parity.COSINE)
        lam_s = grid.lam(Parity.SINE)
        n1 = tend.du1.coeffs + self.model.nu_min * lam_c * s.u1.coeffs
        n2 = tend.du2.coeffs + self.model.nu_min * lam_s * s.u2.coeffs
        nt = tend.dtheta.coeffs + self.model.kappa_min * lam_s * s.theta.coeffs
        return (n1, n2, nt), aux

    def _adjust_dt(self, limits, dt_max):
        adv, diff = limits
        limit = min(adv, diff)
        dt = self.dt
        if dt > limit:
            if not self.cfg.adaptive:
                which = "advective" if adv <= diff else "explicit-diffusion"
                raise CFLViolation(
                    f"{which} CFL exceeded: dt={dt:.3e} > limit={limit:.3e}"
                )
            while dt > limit:
                dt *= 0.5
        elif self.cfg.adaptive and dt < min(self.cfg.dt, limit / 1.1):
            dt = min(dt * 1.1, self.cfg.dt, limit)
        dt = min(dt, dt_max)
        if dt != self.dt:
            self.dt_log.append(dt)
            self._history = None  # BDF2 restart after a step-size change
        self.dt = dt
        return dt

    def step(self, s: State, dt_max: float = np.inf) -> State:
        N, aux = self._explicit_part(s)
        dt = self._adjust_dt(_cfl_limits(s.grid, aux, self.cfg), dt_max)
        E = self._factors(s.grid, dt)
        X = (s.u1.coeffs, s.u2.coeffs, s.theta.coeffs)

        use_bdf2 = self.cfg.scheme == "IMEX_BDF2" and self._history is not None
        new = []
        if use_bdf2:
            Xp, Np = self._history
            for e, x, n, xp, np_ in zip(E, X, N, Xp, Np):
                e2 = e * e
                new.append((4.0 * e * x - e2 * xp + 2.0 * dt * (2.0 * e * n - e2 * np_)) / 3.0)
        else:
            for e, x, n in zip(E, X, N):
                new.append(e * (x + dt * n))

        grid = s.grid
        for arr, parity in zip(new, (Parity.COSINE, Parity.SINE, Parity.SINE)):
            arr *= grid.mask(parity)
        u1 = SpectralField(grid, Parity.COSINE, new[0])
        u2 = SpectralField(grid, Parity.SINE, new[1])
        u1, u2 = leray_project(u1, u2)
        c1 = u1.coeffs
        c1[0, 0] = 0.0
        for name, arr in (("u1", c1), ("u2", u2.coeffs), ("theta", new[2])):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError(f"non-finite state after step in {name}")

        if self.cfg.scheme == "IMEX_BDF2":
            self._history = (X, N)
        return State(u1, u2, SpectralField(grid, Parity.SINE, new[2]), s.t + dt)


def step(s: State, model: CoefficientModel, cfg: StepperConfig, forcing=None) -> State:
    """Single step from a cold start (fresh history)."""
    return Stepper(model, cfg, forcing).step(s)


def run(
    s0: State,
    model: CoefficientModel,
    cfg: StepperConfig,
    record_every: int = 1,
    forcing=None,
    extra_record=None,
    keep_states_every: int = 0,
) -> Trajectory:
    """March to t_end, recording diagnostics every record_every steps.

    extra_record(state) -> dict is merged into a parallel per-record list on
    the trajectory (used by scenarios for tendency norms); keep_states_every
    stashes full states every that many records (0 = never).
    """
    from .diagnostics import record as record_diagnostics

    if record_every < 1:
        raise ValueError("record_every must be a positive integer")
    traj = Trajectory()

    def emit(s: State):
        traj.times.append(s.t)
        traj.records.append(record_diagnostics(s, model))
        if extra_record is not None:
            traj.extra.append(extra_record(s))
        if keep_states_every and (len(traj.records) - 1) % keep_states_every == 0:
            traj.states.append(s)

    stepper = Stepper(model, cfg, forcing)
    s = s0
    emit(s)
    nstep = 0
    try:
        while s.t < cfg.t_end - 1e-12:
            s = stepper.step(s, dt_max=cfg.t_end - s.t)
            nstep += 1
            if nstep % record_every == 0:
                emit(s)
    except (CFLViolation, FloatingPointError, ValueError) as exc:
        traj.failed = f"{type(exc).__name__}: {exc}"
    traj.dt_log = stepper.dt_log
    traj.final_state = s
    return traj


# ---------------------------------------------------------------------------
# initial-data presets
# ---------------------------------------------------------------------------

INITIAL_PRESETS = ("conduction", "single-mode", "random-smooth", "overshoot")


def _zero_state(grid: Grid) -> State:
    z = lambda parity: SpectralField(grid, parity, np.zeros((grid.nx, grid.modes(parity)), complex))
    return State(z(Parity.COSINE), z(Parity.SINE), z(Parity.SINE), 0.0)


def _velocity_from_streamfunction(psi: SpectralField):
    """u = (psi_y, -psi_x): exactly divergence-free, free-slip compatible."""
    from .spectral import ddx, ddy

    u1 = ddy(psi)
    u2f = ddx(psi)
    return u1, u2f.with_coeffs(-u2f.coeffs)


def _scale_velocity(u1: SpectralField, u2: SpectralField, target_l2: float):
    cur = np.hypot(sobolev_norm(u1, 0), sobolev_norm(u2, 0))
    if cur < 1e-300 or target_l2 == 0.0:
        return u1.with_coeffs(u1.coeffs * 0.0), u2.with_coeffs(u2.coeffs * 0.0)
    f = target_l2 / cur
    return u1.with_coeffs(u1.coeffs * f), u2.with_coeffs(u2.coeffs * f)


def initial_state(
    grid: Grid,
    preset: str = "conduction",
    amplitude: float = 0.0,
    theta_amplitude: float = 0.0,
    seed: int = 0,
) -> State:
    """Construct one of the named initial conditions.

    ``amplitude`` is the L2 norm of the velocity; ``theta_amplitude`` the mesh
    max of theta (for "overshoot" it is the sine-mode amplitude, default 1.5).
    """
    if preset == "conduction":
        return _zero_state(grid)

    base = _zero_state(grid)
    if preset == "single-mode":
        psi = np.zeros((grid.nx, grid.ny), dtype=complex)
        # k = +-1, n = 1 streamfunction mode: sin(2 pi x) sin(pi y)
        psi[1, 0] = -0.5j
        psi[-1, 0] = 0.5j
        u1, u2 = _velocity_from_streamfunction(SpectralField(grid, Parity.SINE, psi))
        u1, u2 = _scale_velocity(u1, u2, amplitude)
        thc = np.zeros((grid.nx, grid.ny), dtype=complex)
        thc[0, 0] = theta_amplitude
        return State(u1, u2, SpectralField(grid, Parity.SINE, thc), 0.0)

    if preset == "random-smooth":
        psi = random_band_limited(grid, Parity.SINE, seed=seed, sigma=3.0)
        u1, u2 = _velocity_from_streamfunction(psi)
        u1, u2 = leray_project(u1, u2)
        c1 = u1.coeffs.copy()
        c1[0, 0] = 0.0
        u1 = u1.with_coeffs(c1)
        u1, u2 = _scale_velocity(u1, u2, amplitude)
        th = random_band_limited(grid, Parity.SINE, seed=seed + 7919, sigma=3.0)
        vals = to_physical(th).values
        peak = float(np.abs(vals).max())
        factor = 0.0 if peak < 1e-300 else theta_amplitude / peak
        th = th.with_coeffs(th.coeffs * factor)
        return State(u1, u2, th, 0.0)

    if preset == "overshoot":
        a = theta_amplitude if theta_amplitude else 1.5
        thc = np.zeros((grid.nx, grid.ny), dtype=complex)
        thc[0, 0] = a
        return State(base.u1, base.u2, SpectralField(grid, Parity.SINE, thc), 0.0)

    raise ValueError(f"unknown initial preset {preset!r}; known: {INITIAL_PRESETS}")


def refine_state(s: State, grid2: Grid) -> State:
    """Inject a state into a finer grid by zero-padding coefficients (the
    continuum field is unchanged; used for resolution-doubling studies)."""
    if grid2.nx < s.grid.nx or grid2.ny < s.grid.ny:
        raise ValueError("refine_state only embeds into finer grids")

    def embed(f: SpectralField) -> SpectralField:
        src = s.grid
        out = np.zeros((grid2.nx, grid2.modes(f.parity)), dtype=complex)
        half = src.nx // 2
        cols = src.modes(f.parity)
        out[:half, :cols] = f.coeffs[:half]
        out[grid2.nx - half :, :cols] = f.coeffs[half:]
        return SpectralField(grid2, f.parity, out)

    return State(embed(s.u1), embed(s.u2), embed(s.theta), s.t)
