import numpy as np
import pytest
from hypothesis import given, strategies as st

from redosc.errors import ConfigurationRejectedError, DegenerateSpectrumError, ParameterError
from redosc.params import (
    CODATA,
    FieldConfig,
    OscillatorParams,
    SimWindows,
    approx_frequency_gap,
    derive_gamma,
    derive_windows,
    validate_regime,
)
from redosc.vacuum_field import sample_modes_single_angle

from conftest import toy_mode_set


class TestDeriveGamma:
    def test_paper_working_point(self):
        gamma = derive_gamma(CODATA.electron_charge, 1e-4 * CODATA.electron_mass)
        # Direct evaluation of 2 e^2/(3 m c^3 4 pi eps0) with CODATA values.
        expected = (
            2 * CODATA.electron_charge**2
            / (3 * 1e-4 * CODATA.electron_mass * CODATA.c**3)
            / (4 * np.pi * CODATA.epsilon0)
        )
        assert gamma == pytest.approx(expected, rel=1e-14)
        assert gamma == pytest.approx(6.266e-20, rel=1e-3)
        assert gamma * 1e16 == pytest.approx(6.27e-4, rel=2e-3)

    def test_zero_charge(self):
        assert derive_gamma(0.0, CODATA.electron_mass) == 0.0

    def test_mass_scaling(self):
        g1 = derive_gamma(CODATA.electron_charge, CODATA.electron_mass)
        g2 = derive_gamma(CODATA.electron_charge, 2 * CODATA.electron_mass)
        assert g1 == pytest.approx(2 * g2, rel=1e-14)

    def test_nonpositive_mass_rejected(self):
        with pytest.raises(ParameterError):
            derive_gamma(CODATA.electron_charge, 0.0)
        with pytest.raises(ParameterError):
            derive_gamma(CODATA.electron_charge, -1e-30)

    @given(
        charge_scale=st.floats(0.1, 10.0),
        mass_scale=st.floats(0.1, 10.0),
    )
    def test_quadratic_in_charge_inverse_in_mass(self, charge_scale, mass_scale):
        base = derive_gamma(CODATA.electron_charge, CODATA.electron_mass)
        scaled = derive_gamma(
            charge_scale * CODATA.electron_charge, mass_scale * CODATA.electron_mass
        )
        assert scaled == pytest.approx(base * charge_scale**2 / mass_scale, rel=1e-12)


class TestOscillatorParams:
    def test_gamma_derived(self, paper_params):
        assert paper_params.gamma == derive_gamma(paper_params.charge, paper_params.mass)

    def test_invalid_inputs(self):
        with pytest.raises(ParameterError):
            OscillatorParams(charge=0.0, mass=-1.0, omega0=1e16)
        with pytest.raises(ParameterError):
            OscillatorParams(charge=0.0, mass=1e-30, omega0=0.0)

    def test_sharp_resonance_enforced(self):
        # 1000x electron charge at tiny mass pushes gamma*omega0 above threshold
        with pytest.raises(ParameterError, match="sharp resonance"):
            OscillatorParams(
                charge=1e3 * CODATA.electron_charge, mass=1e-9 * CODATA.electron_mass,
                omega0=1e18,
            )


class TestValidateRegime:
    def test_paper_regime_passes(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=100, seed=0)
        report = validate_regime(paper_params, cfg)
        assert report.passed
        assert report.narrowband == pytest.approx(0.1379, rel=1e-3)
        assert report.resonance_coverage == pytest.approx(1 / 220, rel=1e-12)

    def test_delta_too_narrow_fails(self, paper_params):
        cfg = FieldConfig(delta=paper_params.resonance_width, n_omega=100, seed=0)
        report = validate_regime(paper_params, cfg)
        assert not report.passed
        assert any("cover" in m for m in report.messages)

    def test_delta_too_wide_fails(self, paper_params):
        cfg = FieldConfig(delta=paper_params.omega0, n_omega=100, seed=0)
        report = validate_regime(paper_params, cfg)
        assert not report.passed
        assert any("narrowband" in m for m in report.messages)


class TestDeriveWindows:
    def test_transient_time(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=2000, seed=1)
        modes = sample_modes_single_angle(paper_params, cfg)
        win = derive_windows(paper_params, modes)
        assert win.tau_tran == pytest.approx(3.192e-13, rel=1e-3)
        assert win.tau_tran / paper_params.natural_period == pytest.approx(508, rel=2e-2)

    def test_coherence_time_symmetric_grid(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=400, seed=5)
        modes = sample_modes_single_angle(paper_params, cfg)
        win = derive_windows(paper_params, modes, min_int_ratio=0.0)
        # largest detuning on the symmetric grid is delta/2
        assert win.tau_coh * (paper_delta / (4 * np.pi)) == pytest.approx(1.0, rel=1e-2)

    def test_integration_time_desk_config(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=2000, seed=1)
        modes = sample_modes_single_angle(paper_params, cfg)
        win = derive_windows(paper_params, modes)
        uniform_estimate = 2 * np.pi * (cfg.n_omega - 1) / paper_delta
        assert uniform_estimate == pytest.approx(9.11e-12, rel=1e-2)
        # exact minimum gap sits at the top of the band, ~ (1+delta/2w0)^2 larger
        assert win.tau_int == pytest.approx(uniform_estimate, rel=0.16)
        assert win.tau_int <= 2 * np.pi / win.delta_omega_min * (1 + 1e-12)

    def test_gap_approximation_narrow_band(self, paper_params):
        # The analytic gap formula is an O(delta/omega0) approximation; in a
        # narrow band it matches the exact grid gap to 1%.
        delta = 5 * paper_params.resonance_width
        cfg = FieldConfig(delta=delta, n_omega=200, seed=2)
        modes = sample_modes_single_angle(paper_params, cfg)
        win = derive_windows(paper_params, modes, min_int_ratio=0.0)
        assert approx_frequency_gap(paper_params, cfg) == pytest.approx(
            win.delta_omega_min, rel=1e-2
        )

    def test_short_window_rejected(self, paper_params, paper_delta):
        cfg = FieldConfig(delta=paper_delta, n_omega=120, seed=3)
        modes = sample_modes_single_angle(paper_params, cfg)
        with pytest.raises(ConfigurationRejectedError):
            derive_windows(paper_params, modes, min_int_ratio=10.0)
        win = derive_windows(paper_params, modes, min_int_ratio=0.0)
        assert win.tau_int > 0

    def test_degenerate_spectrum(self, paper_params):
        modes = toy_mode_set([1e16, 1e16, 1e16])
        with pytest.raises(DegenerateSpectrumError):
            derive_windows(paper_params, modes)

    def test_windows_type_invariants(self):
        with pytest.raises(ConfigurationRejectedError):
            SimWindows(tau_tran=1.0, tau_coh=0.1, delta_omega_min=1.0, tau_int=2 * np.pi)
        with pytest.raises(ParameterError):
            SimWindows(
                tau_tran=0.01, tau_coh=0.1, delta_omega_min=1.0, tau_int=10.0,
                min_int_ratio=0.0,
            )


class TestFieldConfig:
    def test_mode_count(self):
        cfg = FieldConfig(
            delta=1.0, n_omega=0, seed=0, scheme="uniform_spherical",
            n_kappa=4, n_theta=3, n_phi=2,
        )
        assert cfg.n_modes == 24

    def test_invalid(self):
        with pytest.raises(ParameterError):
            FieldConfig(delta=-1.0, n_omega=10, seed=0)
        with pytest.raises(ParameterError):
            FieldConfig(delta=1.0, n_omega=1, seed=0)
        with pytest.raises(ParameterError):
            FieldConfig(delta=1.0, n_omega=10, seed=0, scheme="cubic")
