"""Simulation of a charged oscillator in classical zero-point radiation.

The steady-state motion of a radiation-damped harmonic oscillator driven
by a random-phase superposition of plane waves reproduces the Gaussian
position statistics and the minimum uncertainty product of the quantum
ground state; this package synthesizes the field, integrates the motion,
and provides the statistical analysis and ensemble machinery around it.
"""

from .params import (
    CODATA,
    FieldConfig,
    OscillatorParams,
    PhysicalConstants,
    RegimeReport,
    SimWindows,
    approx_frequency_gap,
    derive_gamma,
    derive_windows,
    validate_regime,
)
from .vacuum_field import (
    Mode,
    ModeSet,
    field_x_derivative,
    field_x_dipole,
    make_polarization,
    sample_modes,
    sample_modes_single_angle,
    sample_modes_spherical,
    substream,
)
from .dynamics import (
    GreenResult,
    IntegratorConfig,
    Trajectory,
    acceleration,
    analytic_steady_state,
    greens_convolution,
    integrate,
    integration_window,
    repetition_time,
)
from .analysis import (
    AmplitudeSeries,
    DistributionSummary,
    GofReport,
    Histogram,
    amplitude_distribution,
    coherence_time_empirical,
    diagnostics_x0_e0,
    double_peak_density,
    ensemble_sample,
    envelope,
    gaussian_target,
    goodness_of_fit,
    ground_state_energy,
    reconstruct,
    sequential_sample,
    summarize,
    target_sigma_p,
    target_sigma_x,
    total_variation,
)
from .config import RunConfig, build_run_config, parse_config
from .runner import (
    BenchResult,
    EnsembleResult,
    SequentialResult,
    SweepResult,
    convergence_sweep,
    member_seed,
    run_ensemble,
    run_sequential,
    scaling_benchmark,
)

__version__ = "0.1.0"
