"""Physical constants, oscillator parameters, regime checks, and timescales.

All quantities are in SI units throughout. The working point used in most
runs (electron charge, mass 1e-4 m_e, omega0 = 1e16 rad/s) keeps the slow
amplitude-modulation timescale and the fast oscillation period close enough
that both fit in one double-precision integration window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationRejectedError, DegenerateSpectrumError, ParameterError

#: Dimensionless ratio below which "a << b" is considered satisfied.
DEFAULT_SMALLNESS = 0.2


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA values used everywhere; never mutated."""

    hbar: float = 1.054571817e-34        # J s
    c: float = 2.99792458e8              # m / s
    epsilon0: float = 8.8541878128e-12   # F / m
    electron_charge: float = 1.602176634e-19  # C
    electron_mass: float = 9.1093837015e-31   # kg

    def __post_init__(self):
        for name in ("hbar", "c", "epsilon0", "electron_charge", "electron_mass"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"constant {name} must be positive")


CODATA = PhysicalConstants()


def derive_gamma(charge: float, mass: float, constants: PhysicalConstants = CODATA) -> float:
    """Radiation damping constant 2 e^2 / (3 m c^3) * 1/(4 pi eps0), in seconds.

    Parameters
    ----------
    charge : float
        Particle charge in C.
    mass : float
        Particle mass in kg; must be positive.
    """
    if mass <= 0:
        raise ParameterError(f"mass must be positive, got {mass}")
    return 2.0 * charge**2 / (3.0 * mass * constants.c**3) / (4.0 * np.pi * constants.epsilon0)


@dataclass(frozen=True)
class OscillatorParams:
    """Charged harmonic oscillator in the sharp-resonance regime.

    ``gamma`` is derived from (charge, mass) at construction. The
    sharp-resonance condition gamma * omega0 << 1 is enforced with a
    configurable smallness threshold; configurations outside it are refused
    because the narrowband field sampling would not be valid there.
    """

    charge: float
    mass: float
    omega0: float
    gamma: float = field(init=False)
    sharp_resonance_threshold: float = DEFAULT_SMALLNESS
    constants: PhysicalConstants = CODATA

    def __post_init__(self):
        if self.mass <= 0:
            raise ParameterError(f"mass must be positive, got {self.mass}")
        if self.omega0 <= 0:
            raise ParameterError(f"omega0 must be positive, got {self.omega0}")
        object.__setattr__(self, "gamma", derive_gamma(self.charge, self.mass, self.constants))
        if self.gamma * self.omega0 >= self.sharp_resonance_threshold:
            raise ParameterError(
                f"sharp resonance violated: gamma*omega0 = {self.gamma * self.omega0:.3e} "
                f">= {self.sharp_resonance_threshold}"
            )

    @property
    def natural_period(self) -> float:
        return 2.0 * np.pi / self.omega0

    @property
    def resonance_width(self) -> float:
        """Characteristic resonance width gamma * omega0^2, in rad/s."""
        return self.gamma * self.omega0**2


#: Mode-sampling schemes. ``single_angle`` draws one random direction per
#: frequency; ``uniform_spherical`` fills an (n_kappa, n_theta, n_phi) grid.
SCHEMES = ("single_angle", "uniform_spherical")


@dataclass(frozen=True)
class FieldConfig:
    """Sampling configuration for the synthesized zero-point field.

    ``delta`` is the full sampled frequency range, centred on omega0.
    For the ``uniform_spherical`` scheme the total mode count is
    n_kappa * n_theta * n_phi; for ``single_angle`` it is n_omega.
    ``shared_phi_offset`` reuses one random azimuthal grid offset for every
    (kappa, theta) pair instead of drawing one per pair.
    """

    delta: float
    n_omega: int
    seed: int
    scheme: str = "single_angle"
    n_kappa: int = 0
    n_theta: int = 0
    n_phi: int = 0
    shared_phi_offset: bool = False

    def __post_init__(self):
        if self.delta <= 0:
            raise ParameterError(f"delta must be positive, got {self.delta}")
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.scheme == "single_angle":
            if self.n_omega < 2:
                raise ParameterError(f"n_omega must be >= 2, got {self.n_omega}")
        else:
            if self.n_kappa < 2:
                raise ParameterError(f"n_kappa must be >= 2, got {self.n_kappa}")
            if self.n_theta < 2 or self.n_phi < 1:
                raise ParameterError("uniform_spherical needs n_theta >= 2 and n_phi >= 1")
        if not (0 <= self.seed < 2**64):
            raise ParameterError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_modes(self) -> int:
        if self.scheme == "single_angle":
            return self.n_omega
        return self.n_kappa * self.n_theta * self.n_phi


@dataclass(frozen=True)
class SimWindows:
    """Derived timescales of one run.

    tau_tran: decay time of initial-condition memory, 2/(gamma*omega0^2).
    tau_coh: shortest beat period against omega0 over the sampled modes.
    delta_omega_min: smallest nonzero gap of the sampled frequency ladder.
    tau_int: longest useful integration span, 2*pi/delta_omega_min.
    """

    tau_tran: float
    tau_coh: float
    delta_omega_min: float
    tau_int: float
    #: Required tau_int / tau_tran; sequential sampling needs a long window
    #: (default 10x), ensemble statistics none (pass 0).
    min_int_ratio: float = 10.0

    def __post_init__(self):
        for name in ("tau_tran", "tau_coh", "delta_omega_min", "tau_int"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if self.tau_int < self.min_int_ratio * self.tau_tran:
            raise ConfigurationRejectedError(
                f"tau_int/tau_tran = {self.tau_int / self.tau_tran:.2f} below required "
                f"{self.min_int_ratio:.2f}; increase n_omega or reduce delta"
            )
        if self.tau_int > 2.0 * np.pi / self.delta_omega_min * (1 + 1e-12):
            raise ParameterError("tau_int exceeds 2*pi/delta_omega_min")


@dataclass(frozen=True)
class RegimeReport:
    """Pass/fail report for gamma*omega0^2 << delta << omega0 (report only)."""

    resonance_coverage: float   # gamma*omega0^2 / delta; small when delta covers the line
    narrowband: float           # delta / omega0; small when the band is narrow
    threshold: float
    passed: bool
    messages: tuple[str, ...]


def validate_regime(
    params: OscillatorParams,
    cfg: FieldConfig,
    threshold: float = DEFAULT_SMALLNESS,
) -> RegimeReport:
    """Check the frequency-range conditions for valid narrowband sampling.

    Both dimensionless ratios must be below ``threshold``: the sampled range
    has to be much broader than the resonance width, and much narrower than
    the resonance frequency itself.
    """
    r_cov = params.resonance_width / cfg.delta
    r_nb = cfg.delta / params.omega0
    messages = []
    if r_cov >= threshold:
        messages.append(
            f"delta = {cfg.delta:.3e} does not cover the resonance width "
            f"{params.resonance_width:.3e} (ratio {r_cov:.3f} >= {threshold})"
        )
    if r_nb >= threshold:
        messages.append(
            f"delta/omega0 = {r_nb:.3f} >= {threshold}: narrowband assumption broken"
        )
    return RegimeReport(
        resonance_coverage=r_cov,
        narrowband=r_nb,
        threshold=threshold,
        passed=not messages,
        messages=tuple(messages),
    )


def minimum_frequency_gap(omegas: np.ndarray) -> float:
    """Smallest nonzero gap of a frequency ladder (rad/s)."""
    gaps = np.diff(np.unique(np.asarray(omegas, dtype=float)))
    if gaps.size == 0:
        raise DegenerateSpectrumError("all mode frequencies are identical")
    return float(gaps.min())


def derive_windows(params: OscillatorParams, modes, min_int_ratio: float = 10.0) -> SimWindows:
    """Derive all simulation timescales from the oscillator and its mode set.

    ``delta_omega_min`` is the exact minimum gap of the generated frequency
    ladder, not the analytic estimate (see ``approx_frequency_gap`` for the
    latter). Configurations with tau_int < min_int_ratio * tau_tran are
    rejected; pass ``min_int_ratio=0`` for ensemble-style runs whose
    statistics do not rely on a long sequential window.
    """
    omegas = np.asarray(modes.omegas, dtype=float)
    if omegas.size == 0:
        raise DegenerateSpectrumError("mode set is empty")
    tau_tran = 2.0 / (params.gamma * params.omega0**2)
    dw_min = minimum_frequency_gap(omegas)
    tau_int = 2.0 * np.pi / dw_min
    detuning = np.abs(omegas - params.omega0)
    detuning = detuning[detuning > 0]
    if detuning.size == 0:
        raise DegenerateSpectrumError("all modes sit exactly at omega0")
    tau_coh = 2.0 * np.pi / float(detuning.max())
    return SimWindows(
        tau_tran=tau_tran, tau_coh=tau_coh, delta_omega_min=dw_min, tau_int=tau_int,
        min_int_ratio=min_int_ratio,
    )


def approx_frequency_gap(
    params: OscillatorParams, cfg: FieldConfig, constants: PhysicalConstants = CODATA
) -> float:
    """Analytic estimate of the frequency-ladder gap (diagnostic only).

    Evaluates c*(3*kappa0)^(1/3) * dkappa / (3*kappa0) with kappa0 =
    omega0^3/(3 c^3) and dkappa the uniform step of the cubic-wavenumber
    grid. Accurate to O(delta/omega0); production code uses the exact gap.
    """
    c = constants.c
    lo = (params.omega0 - cfg.delta / 2) ** 3 / (3 * c**3)
    hi = (params.omega0 + cfg.delta / 2) ** 3 / (3 * c**3)
    n_kappa = cfg.n_omega if cfg.scheme == "single_angle" else cfg.n_kappa
    dkappa = (hi - lo) / (n_kappa - 1)
    kappa0 = params.omega0**3 / (3 * c**3)
    return c * (3 * kappa0) ** (1.0 / 3.0) * dkappa / (3 * kappa0)
