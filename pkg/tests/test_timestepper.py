"""Time integration: exactness, stability guards, determinism, presets."""

import numpy as np
import pytest
from scipy.linalg import expm

from bqchan.coefficients import get_model
from bqchan.dynamics import State, mean_u1, state_divergence_residual
from bqchan.spectral import (
    Grid,
    Parity,
    SpectralField,
    norm_lp,
    sobolev_norm,
    to_physical,
    zero_field,
)
from bqchan.timestepper import (
    CFLViolation,
    Stepper,
    StepperConfig,
    initial_state,
    refine_state,
    run,
    step,
)


@pytest.fixture(scope="module")
def grid():
    return Grid(32, 16)


@pytest.fixture(scope="module")
def model():
    return get_model("constant")


def march(s, model, cfg, forcing=None):
    stepper = Stepper(model, cfg, forcing)
    while s.t < cfg.t_end - 1e-12:
        s = stepper.step(s, dt_max=cfg.t_end - s.t)
    return s


class TestStepBasics:
    def test_conduction_fixed_point(self, grid, model):
        s = initial_state(grid, "conduction")
        s1 = step(s, model, StepperConfig(dt=1e-3, t_end=1.0))
        drift = max(
            np.abs(s1.u1.coeffs).max(), np.abs(s1.u2.coeffs).max(), np.abs(s1.theta.coeffs).max()
        )
        assert drift <= 1e-13
        assert s1.t == pytest.approx(1e-3)

    def test_shear_mode_exact_integrating_factor(self, grid, model):
        # k=0 shear mode: every nonlinear/coupling term vanishes identically,
        # so the amplitude follows the exact exponential of the floor operator
        c = np.zeros((grid.nx, grid.ny + 1), dtype=complex)
        c[0, 1] = 1.0
        s = State(
            SpectralField(grid, Parity.COSINE, c),
            zero_field(grid, Parity.SINE),
            zero_field(grid, Parity.SINE),
            0.0,
        )
        T = 0.1
        s = march(s, model, StepperConfig(dt=1e-3, t_end=T))
        exact = np.exp(-np.pi ** 2 * T)
        assert abs(s.u1.coeffs[0, 1].real - exact) <= 1e-6 * exact
        assert abs(s.u1.coeffs[0, 1].real - exact) <= 1e-12  # exact per mode

    def test_single_mode_against_expm_oracle(self, grid, model):
        # linearized coupled (u1, u2, theta) system at mode (k, n) = (1, 1);
        # tiny amplitude keeps the nonlinearity at roundoff
        amp = 1e-6
        s0 = initial_state(grid, "single-mode", amplitude=amp, theta_amplitude=0.0)
        lam = 4 * np.pi ** 2 + np.pi ** 2
        kx, ky = 2 * np.pi, np.pi
        A = np.array(
            [
                [-lam, 0.0, 1j * kx * ky / lam],
                [0.0, -lam, 1.0 - ky ** 2 / lam],
                [0.0, 1.0, -lam],
            ],
            dtype=complex,
        )
        u0 = np.array([s0.u1.coeffs[1, 1], s0.u2.coeffs[1, 0], 0.0], dtype=complex)
        T = 0.05
        s = march(s0, model, StepperConfig(dt=5e-4, t_end=T))
        num = np.array([s.u1.coeffs[1, 1], s.u2.coeffs[1, 0], s.theta.coeffs[1, 0]])
        exact = expm(A * T) @ u0
        assert np.abs(num - exact).max() <= 1e-5 * np.abs(exact).max()

    def test_invariants_preserved(self, grid):
        model = get_model("quadratic-kappa")
        s = initial_state(grid, "random-smooth", amplitude=0.5, theta_amplitude=0.4, seed=2)
        cfg = StepperConfig(dt=2e-4, t_end=0.05)
        stepper = Stepper(model, cfg)
        for _ in range(100):
            s = stepper.step(s)
            assert abs(mean_u1(s)) <= 1e-13
            assert state_divergence_residual(s) <= 1e-12

    def test_kinetic_energy_nonincreasing_without_coupling(self, grid, model):
        # constant coefficients, theta = 0: buoyancy projects away and no
        # temperature forcing exists, so KE decays monotonically
        s = initial_state(grid, "random-smooth", amplitude=1.0, theta_amplitude=0.0, seed=7)
        cfg = StepperConfig(dt=1e-3, t_end=1.0)
        stepper = Stepper(model, cfg)
        # theta stays zero only if u2 = 0 feeds nothing: u2 source makes theta
        # grow, which would couple back; zero the coupling by zeroing theta
        # each step and measuring the velocity energy alone
        prev = sobolev_norm(s.u1, 0) ** 2 + sobolev_norm(s.u2, 0) ** 2
        for _ in range(50):
            s = stepper.step(s)
            s = State(s.u1, s.u2, zero_field(grid, Parity.SINE), s.t)
            cur = sobolev_norm(s.u1, 0) ** 2 + sobolev_norm(s.u2, 0) ** 2
            assert cur <= prev * (1 + 1e-10)
            prev = cur


class TestCFL:
    def test_violation_aborts_with_constraint_name(self, grid):
        model = get_model("quadratic-kappa")  # nu(0) - nu_min = 1: stiff remainder
        s = initial_state(grid, "single-mode", amplitude=0.1, theta_amplitude=0.5)
        with pytest.raises(CFLViolation, match="explicit-diffusion"):
            step(s, model, StepperConfig(dt=0.5, t_end=1.0, adaptive=False))
        fast = initial_state(grid, "single-mode", amplitude=50.0, theta_amplitude=0.0)
        with pytest.raises(CFLViolation, match="advective"):
            step(fast, get_model("constant"), StepperConfig(dt=0.03, t_end=1.0))

    def test_adaptive_halves_and_logs(self, grid):
        model = get_model("quadratic-kappa")
        s = initial_state(grid, "single-mode", amplitude=0.1, theta_amplitude=0.5)
        cfg = StepperConfig(dt=1e-2, t_end=1.0, adaptive=True)
        stepper = Stepper(model, cfg)
        s1 = stepper.step(s)
        assert stepper.dt < 1e-2
        assert stepper.dt_log  # change recorded
        h = min(1.0 / grid.nx, 1.0 / grid.ny)
        th = to_physical(s.theta).values
        nu_v, ka_v, _ = model.eval_coefficients(th)
        excess = max((nu_v - model.nu_min).max(), (ka_v - model.kappa_min).max())
        assert stepper.dt <= 0.9 * h * h / (2 * excess) * (1 + 1e-12)

    def test_adaptive_never_exceeds_bounds_over_run(self, grid):
        model = get_model("quadratic-kappa")
        s = initial_state(grid, "random-smooth", amplitude=0.4, theta_amplitude=0.4, seed=5)
        cfg = StepperConfig(dt=5e-3, t_end=0.2, adaptive=True)
        traj = run(s, model, cfg, record_every=10)
        assert traj.failed is None


class TestRun:
    def test_zero_horizon_gives_initial_record(self, grid, model):
        s = initial_state(grid, "conduction")
        traj = run(s, model, StepperConfig(dt=1e-3, t_end=0.0), record_every=5)
        assert len(traj.records) == 1
        assert traj.times == [0.0]

    def test_conduction_all_zero(self, grid, model):
        s = initial_state(grid, "conduction")
        traj = run(s, model, StepperConfig(dt=1e-2, t_end=1.0), record_every=10)
        for r in traj.records:
            assert r.norm_u_l2 <= 1e-12
            assert r.norm_theta_l2 <= 1e-12
            assert r.norm_grad_u <= 1e-12

    def test_record_count_formula(self, grid, model):
        s = initial_state(grid, "single-mode", amplitude=0.1, theta_amplitude=0.1)
        steps, every = 40, 7
        traj = run(s, model, StepperConfig(dt=1e-3, t_end=steps * 1e-3), record_every=every)
        assert len(traj.records) == steps // every + 1

    def test_determinism(self, grid, model):
        def one():
            s = initial_state(grid, "random-smooth", amplitude=0.6, theta_amplitude=0.5, seed=77)
            return run(s, model, StepperConfig(dt=1e-3, t_end=0.05), record_every=5)

        a, b = one(), one()
        rows_a = [r.as_row() for r in a.records]
        rows_b = [r.as_row() for r in b.records]
        assert rows_a == rows_b  # bitwise identical records

    def test_failure_marker_preserves_partial_trajectory(self, grid):
        model = get_model("quadratic-kappa")
        s = initial_state(grid, "single-mode", amplitude=0.1, theta_amplitude=0.5)
        traj = run(s, model, StepperConfig(dt=1e-2, t_end=1.0, adaptive=False), record_every=1)
        assert traj.failed is not None
        assert "CFL" in traj.failed
        assert len(traj.records) >= 1


class TestPresetsAndRefinement:
    def test_amplitudes_are_norms(self, grid):
        s = initial_state(grid, "random-smooth", amplitude=1.7, theta_amplitude=0.9, seed=5)
        u_norm = np.hypot(sobolev_norm(s.u1, 0), sobolev_norm(s.u2, 0))
        assert u_norm == pytest.approx(1.7, rel=1e-12)
        assert norm_lp(to_physical(s.theta), np.inf) == pytest.approx(0.9, rel=1e-12)

    def test_overshoot_exceeds_band(self, grid):
        s = initial_state(grid, "overshoot", theta_amplitude=1.5)
        assert norm_lp(to_physical(s.theta), np.inf) == pytest.approx(1.5, rel=1e-12)

    def test_unknown_preset_rejected(self, grid):
        with pytest.raises(ValueError, match="unknown initial preset"):
            initial_state(grid, "bogus")

    def test_refinement_preserves_continuum_field(self, grid):
        s = initial_state(grid, "random-smooth", amplitude=1.0, theta_amplitude=0.5, seed=3)
        fine = refine_state(s, Grid(64, 32))
        # evaluate both on the coarse mesh points (every other fine node)
        coarse_vals = to_physical(s.theta).values
        fine_vals = to_physical(fine.theta).values
        assert np.abs(fine_vals[::2, ::2] - coarse_vals).max() < 1e-12
        assert state_divergence_residual(fine) <= 1e-13
