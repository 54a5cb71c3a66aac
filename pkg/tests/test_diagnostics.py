"""Diagnostics: records, decay fits, envelopes, time averages."""

import numpy as np
import pytest
from scipy.integrate import quad

from bqchan.coefficients import get_model
from bqchan.diagnostics import (
    CSV_COLUMNS,
    check_energy_inequality,
    decay_bound,
    fit_decay_rate,
    l2_envelope,
    record,
    time_average,
)
from bqchan.spectral import Grid
from bqchan.timestepper import StepperConfig, initial_state, run


@pytest.fixture(scope="module")
def grid():
    return Grid(32, 16)


@pytest.fixture(scope="module")
def model():
    return get_model("constant")


class TestRecord:
    def test_conduction_only_pressure(self, grid, model):
        r = record(initial_state(grid, "conduction"), model)
        assert r.norm_u_l2 == 0.0
        assert r.norm_theta_l2 == 0.0
        assert r.norm_grad_u == 0.0
        assert r.overshoot_plus_2 == 0.0
        assert r.dissipation_u == 0.0
        assert r.norm_pressure_l2 > 0.1  # hydrostatic background
        assert r.mean_u1 == 0.0

    def test_overshoot_against_quadrature_oracle(self, model):
        # theta = 1.5 sin(pi y): reference from adaptive quadrature of the
        # analytic positive part; mesh value converges at the trapezoid rate
        ref_sq, _ = quad(
            lambda y: max(1.5 * np.sin(np.pi * y) - 1.0, 0.0) ** 2, 0.0, 1.0, limit=200
        )
        ref = np.sqrt(ref_sq)
        vals = {}
        for ny in (32, 64, 128):
            g = Grid(8, ny)
            s = initial_state(g, "overshoot", theta_amplitude=1.5)
            vals[ny] = record(s, get_model("constant")).overshoot_plus_2
        assert vals[128] == pytest.approx(ref, abs=2e-5)
        assert abs(vals[128] - ref) < abs(vals[32] - ref)  # converging

    def test_overshoot_vanishes_iff_inside_band(self, grid, model):
        inside = initial_state(grid, "single-mode", amplitude=0.0, theta_amplitude=0.99)
        r = record(inside, model)
        assert r.overshoot_plus_2 == 0.0 and r.overshoot_minus_2 == 0.0
        outside = initial_state(grid, "overshoot", theta_amplitude=1.01)
        r2 = record(outside, model)
        assert r2.overshoot_plus_2 > 0.0

    def test_holder_chain(self, grid):
        model = get_model("quadratic-kappa")
        s = initial_state(grid, "random-smooth", amplitude=0.7, theta_amplitude=0.8, seed=6)
        r = record(s, model)
        assert r.norm_theta_l2 <= r.norm_theta_l4 * (1 + 1e-12)
        assert r.norm_theta_l4 <= r.norm_theta_linf * (1 + 1e-10)

    def test_dissipation_floors(self, grid):
        model = get_model("quadratic-kappa")
        s = initial_state(grid, "random-smooth", amplitude=0.7, theta_amplitude=0.8, seed=6)
        r = record(s, model)
        assert r.dissipation_u >= model.nu_min * r.norm_grad_u ** 2 - 1e-8
        assert r.dissipation_theta >= model.kappa_min * r.norm_grad_theta ** 2 - 1e-8

    def test_row_matches_columns(self, grid, model):
        r = record(initial_state(grid, "conduction"), model)
        assert len(r.as_row()) == len(CSV_COLUMNS)


class TestDecayFit:
    @pytest.mark.parametrize("lam", [0.1, 1.0, 3.0, 10.0])
    def test_exact_exponential(self, lam):
        t = np.linspace(0, 5, 200)
        fit = fit_decay_rate(t, np.exp(-lam * t))
        assert fit.lam == pytest.approx(lam, abs=1e-6)
        assert fit.r_squared >= 1 - 1e-9

    def test_constant_series(self):
        t = np.linspace(0, 1, 50)
        fit = fit_decay_rate(t, np.full_like(t, 0.7))
        assert fit.lam == pytest.approx(0.0, abs=1e-12)

    def test_floor_marker(self):
        t = np.linspace(0, 1, 50)
        fit = fit_decay_rate(t, np.full_like(t, 1e-16))
        assert fit.fully_decayed

    def test_too_few_samples_rejected(self):
        t = np.linspace(0, 1, 5)
        with pytest.raises(ValueError, match="10 samples"):
            fit_decay_rate(t, np.exp(-t))

    def test_window_selection(self):
        t = np.linspace(0, 10, 500)
        v = np.exp(-2.0 * t) + 0.0
        fit = fit_decay_rate(t, v, window=(1.0, 4.0))
        assert fit.lam == pytest.approx(2.0, abs=1e-6)

    def test_decay_bound_values(self):
        assert decay_bound(2, 1.0) == pytest.approx(1.0)
        assert decay_bound(4, 1.0) == pytest.approx(0.75)
        assert decay_bound(2, 2.0) == pytest.approx(2.0)


class TestEnvelope:
    def test_degenerate_limit_formula(self):
        t = np.linspace(0, 5, 100)
        env_eq = l2_envelope(t, 1.0, 0.5, 1.0, 1.0)
        env_near = l2_envelope(t, 1.0, 0.5, 1.0, 1.0 + 5e-11)
        assert np.all(np.isfinite(env_eq))
        assert np.abs(env_eq - env_near).max() < 1e-8
        # limit form is t e^{-nu t}
        expect = np.exp(-t) + 2.0 * (1 - np.exp(-t)) + 0.5 * t * np.exp(-t)
        assert np.abs(env_eq - expect).max() < 1e-12

    def test_distinct_rates(self):
        t = np.array([0.0, 1.0])
        env = l2_envelope(t, 2.0, 1.0, 1.0, 0.5)
        relax = (np.exp(-0.5) - np.exp(-1.0)) / 0.5
        assert env[1] == pytest.approx(2 * np.exp(-1) + 2 * (1 - np.exp(-1)) + relax)
        assert env[0] == pytest.approx(2.0)


class TestTimeAverage:
    def test_constant_series(self):
        t = np.linspace(0, 3, 400)
        assert time_average(t, np.full_like(t, 2.5), 1.0, 1.0) == pytest.approx(2.5, abs=1e-12)

    def test_sin_squared(self):
        t = np.arange(0, 2.0 + 1e-12, 1e-3)
        v = np.sin(2 * np.pi * t) ** 2
        assert time_average(t, v, 0.5, 1.0) == pytest.approx(0.5, abs=1e-6)

    def test_span_rejected(self):
        t = np.linspace(0, 1, 10)
        with pytest.raises(ValueError, match="outside"):
            time_average(t, t, 0.5, 1.0)


class TestEnergyCheck:
    def test_requires_dense_records(self, grid, model):
        s = initial_state(grid, "single-mode", amplitude=0.3, theta_amplitude=0.3)
        traj = run(s, model, StepperConfig(dt=1e-3, t_end=0.2), record_every=100)
        with pytest.raises(ValueError, match="sparse"):
            check_energy_inequality(traj)

    def test_decaying_run_strictly_satisfies(self, grid, model):
        s = initial_state(grid, "single-mode", amplitude=0.3, theta_amplitude=0.3)
        traj = run(s, model, StepperConfig(dt=1e-3, t_end=0.2), record_every=1)
        rep = check_energy_inequality(traj, dt=1e-3)
        assert rep.ok
        assert rep.max_residual < 0  # margin ~ dissipation
