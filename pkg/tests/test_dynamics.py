import math

import numpy as np
import pytest

from redosc.dynamics import (
    IntegratorConfig,
    Trajectory,
    acceleration,
    analytic_steady_state,
    greens_convolution,
    integrate,
    integration_window,
    repetition_time,
)
from redosc.errors import (
    DegenerateSpectrumError,
    DivergenceError,
    ParameterError,
    StiffnessError,
)
from redosc.params import CODATA, FieldConfig, OscillatorParams, derive_windows
from redosc.vacuum_field import field_x_dipole, sample_modes_single_angle

from conftest import toy_mode_set


def small_mode_set(paper_params, paper_delta, n=12, seed=7):
    cfg = FieldConfig(delta=paper_delta, n_omega=n, seed=seed)
    return sample_modes_single_angle(paper_params, cfg)


def timescales(params, modes):
    tau_tran = 2.0 / (params.gamma * params.omega0**2)
    tau_coh = 2 * np.pi / np.abs(modes.omegas - params.omega0).max()
    return tau_tran, tau_coh


class TestAcceleration:
    def test_equilibrium(self, paper_params):
        zero_charge = OscillatorParams(charge=0.0, mass=paper_params.mass, omega0=1e16)
        assert acceleration(0.0, 0.0, 0.0, zero_charge, None) == 0.0

    def test_pure_spring(self, paper_params):
        zero_charge = OscillatorParams(charge=0.0, mass=paper_params.mass, omega0=1e16)
        x0 = 1e-9
        assert acceleration(x0, 0.0, 0.0, zero_charge, None) == -zero_charge.omega0**2 * x0

    def test_damping_toggle(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta)
        x, v, t = 2e-9, 3e7, 1.1e-15
        with_damping = acceleration(x, v, t, paper_params, modes, damping_enabled=True)
        without = acceleration(x, v, t, paper_params, modes, damping_enabled=False)
        assert without - with_damping == pytest.approx(
            paper_params.gamma * paper_params.omega0**2 * v, rel=1e-12
        )

    def test_matches_manual_formula(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta)
        x, v, t = -1e-9, 5e6, 3e-15
        expected = (
            -paper_params.omega0**2 * x
            - paper_params.gamma * paper_params.omega0**2 * v
            + paper_params.charge / paper_params.mass * field_x_dipole(modes, t)
        )
        assert acceleration(x, v, t, paper_params, modes) == pytest.approx(expected, rel=1e-14)


class TestIntegrate:
    def test_free_oscillator_accuracy(self, paper_params):
        # criterion: relative RMS below 1e-6 over 100 periods
        amp = 1e-9
        cfg = IntegratorConfig.for_oscillator(paper_params, rel_tol=1e-10)
        traj = integrate(
            paper_params, None, 0.0, 100 * paper_params.natural_period, amp, 0.0, cfg,
            damping_enabled=False,
        )
        ref = amp * np.cos(paper_params.omega0 * traj.times)
        rms = np.sqrt(np.mean((traj.x - ref) ** 2)) / (amp / np.sqrt(2))
        assert rms < 1e-6

    def test_damped_envelope_decay_rate(self, paper_params):
        amp = 1e-9
        cfg = IntegratorConfig.for_oscillator(paper_params, rel_tol=1e-8)
        tau_tran = 2 / (paper_params.gamma * paper_params.omega0**2)
        traj = integrate(paper_params, None, 0.0, 2 * tau_tran, amp, 0.0, cfg)
        env = np.hypot(traj.x, traj.v / paper_params.omega0)
        rate = np.polyfit(traj.times, np.log(env), 1)[0]
        assert rate == pytest.approx(-paper_params.gamma * paper_params.omega0**2 / 2, rel=1e-2)

    def test_records_endpoints_and_stride(self, paper_params):
        cfg = IntegratorConfig.for_oscillator(paper_params)
        t1 = 10 * paper_params.natural_period
        traj = integrate(paper_params, None, 0.0, t1, 1e-9, 0.0, cfg, record_stride=7)
        assert traj.times[0] == 0.0
        assert traj.times[-1] == t1
        assert len(traj) >= traj.n_accepted // 7

    def test_deterministic(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta)
        cfg = IntegratorConfig.for_oscillator(paper_params)
        t1 = 50 * paper_params.natural_period
        a = integrate(paper_params, modes, 0.0, t1, 0.0, 0.0, cfg)
        b = integrate(paper_params, modes, 0.0, t1, 0.0, 0.0, cfg)
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.times, b.times)

    def test_stiffness_error_on_step_underflow(self, paper_params):
        # Absolute tolerances far below representable local error force the
        # controller to shrink past the 1e-6 * initial_step floor.
        cfg = IntegratorConfig(
            initial_step=paper_params.natural_period / 20,
            rel_tol=0.0, abs_tol_x=1e-300, abs_tol_v=1e-300,
        )
        with pytest.raises(StiffnessError):
            integrate(paper_params, None, 0.0, paper_params.natural_period, 1e-9, 0.0, cfg)

    def test_divergence_error_when_unstable(self, paper_params):
        # One step per period puts omega*h far outside the stability region;
        # with error control disabled the state blows up to non-finite.
        cfg = IntegratorConfig(
            initial_step=paper_params.natural_period, rel_tol=np.inf,
        )
        with pytest.raises(DivergenceError):
            integrate(
                paper_params, None, 0.0, 1e5 * paper_params.natural_period, 1e-9, 0.0, cfg,
                record_stride=2**62, damping_enabled=False,
            )

    def test_invalid_span(self, paper_params):
        cfg = IntegratorConfig.for_oscillator(paper_params)
        with pytest.raises(ParameterError):
            integrate(paper_params, None, 1.0, 0.5, 0.0, 0.0, cfg)


class TestOracleTriangle:
    def test_integrate_vs_analytic(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta, n=12, seed=7)
        tau_tran, tau_coh = timescales(paper_params, modes)
        t_end = 5 * tau_tran + 30 * tau_coh
        cfg = IntegratorConfig.for_oscillator(paper_params, rel_tol=1e-8)
        traj = integrate(paper_params, modes, 0.0, t_end, 0.0, 0.0, cfg)
        mask = traj.times >= 5 * tau_tran
        x_ref, v_ref = analytic_steady_state(modes, paper_params, traj.times[mask])
        sigma = np.std(x_ref)
        rms = np.sqrt(np.mean((traj.x[mask] - x_ref) ** 2)) / sigma
        assert rms < 0.01
        rms_v = np.sqrt(np.mean((traj.v[mask] - v_ref) ** 2)) / np.std(v_ref)
        assert rms_v < 0.01

    def test_analytic_vs_green_ten_modes(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta, n=10, seed=3)
        tau_tran, _ = timescales(paper_params, modes)
        x_ref, _ = analytic_steady_state(modes, paper_params, 6.1 * tau_tran)
        sigma = np.sqrt(
            np.mean(analytic_steady_state(
                modes, paper_params, np.linspace(5, 6, 400) * tau_tran
            )[0] ** 2)
        )
        green = greens_convolution(modes, paper_params, 6.1 * tau_tran, 10 * tau_tran)
        assert not green.truncation_warning
        assert abs(green.position - x_ref) / sigma < 0.005

    def test_integrate_vs_green(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta, n=8, seed=11)
        tau_tran, _ = timescales(paper_params, modes)
        t_probe = 5.5 * tau_tran
        cfg = IntegratorConfig.for_oscillator(paper_params, rel_tol=1e-8)
        traj = integrate(paper_params, modes, 0.0, t_probe, 0.0, 0.0, cfg, record_stride=2**62)
        sigma = np.sqrt(
            np.mean(analytic_steady_state(
                modes, paper_params, np.linspace(5, 5.5, 400) * tau_tran
            )[0] ** 2)
        )
        green = greens_convolution(modes, paper_params, t_probe, 10 * tau_tran)
        assert abs(traj.x[-1] - green.position) / sigma < 0.01


class TestAnalyticSteadyState:
    def test_zero_charge_is_zero(self, paper_delta):
        params = OscillatorParams(charge=0.0, mass=1e-4 * CODATA.electron_mass, omega0=1e16)
        modes = small_mode_set(params, paper_delta, n=6, seed=2)
        x, v = analytic_steady_state(modes, params, 1.23e-14)
        assert x == 0.0 and v == 0.0

    def test_resonant_single_mode(self, paper_params):
        w0 = paper_params.omega0
        modes = toy_mode_set([w0], directions=([0.0], [0.0]), chi=[0.0], phases=[[0.0, 0.0]])
        amp = modes.amplitudes[0]
        gain = paper_params.charge / paper_params.mass
        expect_amp = gain * amp / (paper_params.gamma * w0**3)
        ts = np.linspace(0, 4 * np.pi / w0, 2001)
        x, v = analytic_steady_state(modes, paper_params, ts)
        assert np.abs(x).max() == pytest.approx(expect_amp, rel=1e-3)
        # at resonance the response lags the cos driving by pi/2: x ~ sin(w0 t)
        drive_phase = np.cos(w0 * ts)
        quadrature = np.sin(w0 * ts)
        corr_in = np.mean(x * drive_phase) / (expect_amp / 2)
        corr_quad = np.mean(x * quadrature) / (expect_amp / 2)
        assert abs(corr_in) < 1e-3
        assert corr_quad == pytest.approx(1.0, rel=1e-3)

    def test_velocity_is_time_derivative(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta, n=9, seed=4)
        t = 2.7e-13
        h = 1e-22
        x_plus, _ = analytic_steady_state(modes, paper_params, t + h)
        x_minus, _ = analytic_steady_state(modes, paper_params, t - h)
        _, v = analytic_steady_state(modes, paper_params, t)
        fd = (x_plus - x_minus) / (2 * h)
        assert v == pytest.approx(fd, rel=1e-5)


class TestGreensConvolution:
    def test_zero_charge(self, paper_delta):
        params = OscillatorParams(charge=0.0, mass=1e-4 * CODATA.electron_mass, omega0=1e16)
        modes = small_mode_set(params, paper_delta, n=6, seed=2)
        tau_tran = 2 / (params.gamma * params.omega0**2) if params.gamma else 1.0
        res = greens_convolution(modes, params, 1e-13, 1e-13)
        assert res.position == 0.0

    def test_off_resonance_single_mode(self, paper_params, paper_delta):
        w = paper_params.omega0 + paper_delta / 4
        modes = toy_mode_set(
            [w], directions=([0.0], [0.0]), chi=[0.0], phases=[[1.1, 2.2]],
            omega0=paper_params.omega0,
        )
        tau_tran = 2 / (paper_params.gamma * paper_params.omega0**2)
        t = 11 * tau_tran
        x_ref, _ = analytic_steady_state(modes, paper_params, t)
        amp_ref = np.abs(
            analytic_steady_state(modes, paper_params, np.linspace(10, 11, 300) * tau_tran)[0]
        ).max()
        green = greens_convolution(modes, paper_params, t, 10 * tau_tran)
        assert abs(green.position - x_ref) / amp_ref < 0.01

    def test_truncation_metadata_and_convergence(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta, n=6, seed=8)
        tau_tran, _ = timescales(paper_params, modes)
        short = greens_convolution(modes, paper_params, 12 * tau_tran, 5 * tau_tran)
        assert short.truncation_warning
        a = greens_convolution(modes, paper_params, 12 * tau_tran, 10 * tau_tran)
        b = greens_convolution(modes, paper_params, 12 * tau_tran, 20 * tau_tran)
        assert not a.truncation_warning
        # the exponential kernel bounds the tail contribution by e^-10
        assert abs(b.position - a.position) <= 2e-4 * abs(a.position) + 1e-30

    def test_step_contract(self, paper_params, paper_delta):
        modes = small_mode_set(paper_params, paper_delta, n=6, seed=8)
        with pytest.raises(ParameterError):
            greens_convolution(
                modes, paper_params, 1e-13, 1e-13, step=paper_params.natural_period / 10
            )


class TestRepetitionTime:
    def test_beat_wave_periods(self):
        # components with periods 1.5 and 2 repeat together at 6
        assert repetition_time([2 * np.pi / 1.5, 2 * np.pi / 2.0]) == 6.0

    def test_single_frequency(self):
        w = 3.7e4
        assert repetition_time([w]) == pytest.approx(2 * np.pi / w, rel=1e-15)

    def test_irrational_pair_effectively_infinite(self):
        assert repetition_time([1.0, math.sqrt(2.0)]) == math.inf

    def test_invalid_inputs(self):
        with pytest.raises(ParameterError):
            repetition_time([])
        with pytest.raises(ParameterError):
            repetition_time([1.0, -2.0])
        with pytest.raises(ParameterError):
            repetition_time([0.0])

    def test_rational_triple(self):
        # 4:5:6 ladder over the base 0.25 -> gcd 0.25, tau = 8 pi
        assert repetition_time([1.0, 1.25, 1.5]) == pytest.approx(8 * np.pi, rel=1e-12)


class TestIntegrationWindow:
    def test_uniform_gap(self):
        modes = toy_mode_set([1.0e16, 1.002e16, 1.004e16], seed=5)
        assert integration_window(modes) == pytest.approx(2 * np.pi / 0.002e16, rel=1e-9)

    def test_not_exceeding_repetition_time(self):
        omegas = [1.0e3, 1.25e3, 1.75e3]
        modes = toy_mode_set(omegas, seed=6)
        assert integration_window(modes) <= repetition_time(omegas) * (1 + 1e-12)

    def test_degenerate(self):
        modes = toy_mode_set([5e15, 5e15], seed=1)
        with pytest.raises(DegenerateSpectrumError):
            integration_window(modes)

    def test_desk_scale_value(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=2000, seed=1)
        modes = sample_modes_single_angle(paper_params, cfg)
        # approximate uniform-gap estimate ~ 9.1e-12 s; exact gap is smaller
        # at the top of the band so the window comes out ~14% longer
        assert integration_window(modes) == pytest.approx(9.1e-12, rel=0.2)
        assert integration_window(modes) / paper_params.natural_period > 1.3e4


class TestEnergyBalance:
    def test_steady_state_power_balance(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=2000, seed=5)
        modes = sample_modes_single_angle(paper_params, cfg)
        win = derive_windows(paper_params, modes)
        icfg = IntegratorConfig.for_oscillator(paper_params)
        t_end = 5 * win.tau_tran + win.tau_int
        traj = integrate(paper_params, modes, 0.0, t_end, 0.0, 0.0, icfg)
        mask = traj.times >= 5 * win.tau_tran
        assert (traj.times[mask][-1] - traj.times[mask][0]) >= 10 * win.tau_coh
        drive = field_x_dipole(modes, traj.times[mask])
        power_in = np.mean(paper_params.charge * drive * traj.v[mask])
        power_out = np.mean(
            paper_params.mass * paper_params.gamma * paper_params.omega0**2
            * traj.v[mask] ** 2
        )
        assert power_in == pytest.approx(power_out, rel=0.05)


class TestTrajectory:
    def test_validation(self, paper_params):
        with pytest.raises(ParameterError):
            Trajectory(times=[0.0, 1.0], x=[0.0], v=[0.0, 0.0], params_snapshot=paper_params)
        with pytest.raises(ParameterError):
            Trajectory(times=[0.0, 0.0], x=[0.0, 0.0], v=[0.0, 0.0], params_snapshot=paper_params)
        with pytest.raises(DivergenceError):
            Trajectory(times=[0.0, 1.0], x=[0.0, np.nan], v=[0.0, 0.0], params_snapshot=paper_params)

    def test_csv_and_sidecar_round_trip(self, paper_params, tmp_path):
        cfg = IntegratorConfig.for_oscillator(paper_params)
        traj = integrate(
            paper_params, None, 0.0, 5 * paper_params.natural_period, 1e-9, 0.0, cfg,
        )
        traj.save_csv(tmp_path / "t.csv")
        traj.save_sidecar(tmp_path / "t.json", seed=7)
        from redosc.runner import load_trajectory

        loaded, meta = load_trajectory(tmp_path / "t.csv", tmp_path / "t.json")
        assert meta["seed"] == 7
        assert meta["steps_accepted"] == traj.n_accepted
        np.testing.assert_allclose(loaded.x, traj.x, rtol=1e-12)
