"""Equation of motion, numerical integration, analytic oracles, timing.

The reduced equation of motion is

    m x'' = -m omega0^2 x - m gamma omega0^2 x' + e E_x(t),

integrated with an embedded Cash-Karp 4(5) pair. Two independent closed
forms of the steady state are provided for cross-checks: the frequency-
domain solution (``analytic_steady_state``) and the damped Green-kernel
convolution (``greens_convolution``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from . import _kernels
from .errors import DivergenceError, ParameterError, StiffnessError
from .params import OscillatorParams, SimWindows, minimum_frequency_gap
from .vacuum_field import ModeSet, field_x_dipole


@dataclass(frozen=True)
class IntegratorConfig:
    """Adaptive-step configuration.

    The default initial and maximum step are both one twentieth of the
    natural period (``for_oscillator``); the error controller may shrink
    the step below that but never exceeds ``max_step``.
    """

    initial_step: float
    rel_tol: float = 3e-6
    abs_tol_x: float = 0.0
    abs_tol_v: float = 0.0
    max_step: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.max_step is None:
            object.__setattr__(self, "max_step", self.initial_step)
        if self.initial_step <= 0 or self.max_step <= 0:
            raise ParameterError("step sizes must be positive")
        if self.rel_tol <= 0 and (self.abs_tol_x <= 0 or self.abs_tol_v <= 0):
            raise ParameterError("tolerances must be positive")
        if self.rel_tol < 0 or self.abs_tol_x < 0 or self.abs_tol_v < 0:
            raise ParameterError("tolerances must be non-negative")
        if self.initial_step > self.max_step:
            raise ParameterError("initial_step must not exceed max_step")

    @classmethod
    def for_oscillator(
        cls,
        params: OscillatorParams,
        steps_per_period: float = 20.0,
        rel_tol: float = 3e-6,
        abs_tol_x: float = 0.0,
        abs_tol_v: float = 0.0,
    ) -> "IntegratorConfig":
        h = params.natural_period / steps_per_period
        return cls(initial_step=h, rel_tol=rel_tol, abs_tol_x=abs_tol_x,
                   abs_tol_v=abs_tol_v, max_step=h)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded (t, x, v) series with its provenance."""

    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    params_snapshot: OscillatorParams
    damping_enabled: bool = True
    n_accepted: int = 0
    n_rejected: int = 0

    def __post_init__(self):
        for name in ("times", "x", "v"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        if not (self.times.size == self.x.size == self.v.size):
            raise ParameterError("times, x, v must have equal lengths")
        if self.times.size >= 2 and np.diff(self.times).min() <= 0:
            raise ParameterError("times must be strictly increasing")
        for name in ("times", "x", "v"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise DivergenceError(f"non-finite values in {name}")

    def __len__(self) -> int:
        return self.times.size

    def save_csv(self, path) -> None:
        data = np.column_stack([self.times, self.x, self.v])
        np.savetxt(path, data, delimiter=",", header="t,x,v", comments="")

    def sidecar(self, seed: int | None = None, windows: SimWindows | None = None) -> dict:
        p = self.params_snapshot
        d = {
            "charge": p.charge,
            "mass": p.mass,
            "omega0": p.omega0,
            "gamma": p.gamma,
            "damping_enabled": self.damping_enabled,
            "steps_accepted": self.n_accepted,
            "steps_rejected": self.n_rejected,
            "n_recorded": len(self),
        }
        if seed is not None:
            d["seed"] = seed
        if windows is not None:
            d["windows"] = {
                "tau_tran": windows.tau_tran,
                "tau_coh": windows.tau_coh,
                "delta_omega_min": windows.delta_omega_min,
                "tau_int": windows.tau_int,
            }
        return d

    def save_sidecar(self, path, seed=None, windows=None) -> None:
        Path(path).write_text(json.dumps(self.sidecar(seed, windows), indent=2))


def acceleration(
    x: float,
    v: float,
    t: float,
    params: OscillatorParams,
    modes: ModeSet | None,
    damping_enabled: bool = True,
) -> float:
    """Reference right-hand side of the reduced equation of motion (m/s^2).

    ``modes=None`` means no driving field. The compiled integrator inlines
    the same expression; tests hold the two to agreement at rounding level.
    """
    drive = 0.0
    if modes is not None:
        drive = (params.charge / params.mass) * field_x_dipole(modes, t)
    damp = params.gamma * params.omega0**2 * v if damping_enabled else 0.0
    return -params.omega0**2 * x - damp + drive


def integrate(
    params: OscillatorParams,
    modes: ModeSet | None,
    t0: float,
    t1: float,
    x0: float,
    v0: float,
    cfg: IntegratorConfig,
    record_stride: int = 1,
    damping_enabled: bool = True,
) -> Trajectory:
    """Adaptive Cash-Karp integration of the reduced equation of motion.

    Records every ``record_stride``-th accepted step (the initial and final
    states are always recorded). Raises ``StiffnessError`` when the
    controller is forced below 1e-6 of the initial step and
    ``DivergenceError`` on non-finite state.
    """
    if t1 <= t0:
        raise ParameterError("t1 must exceed t0")
    if record_stride < 1:
        raise ParameterError("record_stride must be >= 1")
    if modes is None:
        w = np.empty(0)
        r = np.empty(0)
        psi = np.empty(0)
    else:
        w, r, psi = modes.folded_terms()
    damping_rate = params.gamma * params.omega0**2 if damping_enabled else 0.0
    times, xs, vs, n_acc, n_rej, status = _kernels.cash_karp_run(
        w, r, psi,
        params.omega0**2, damping_rate, params.charge / params.mass,
        float(t0), float(t1), float(x0), float(v0),
        cfg.initial_step, cfg.max_step, cfg.rel_tol, cfg.abs_tol_x, cfg.abs_tol_v,
        record_stride,
    )
    if status == _kernels.STATUS_STIFF:
        raise StiffnessError(
            f"required step fell below 1e-6 * initial_step after {n_acc} accepted steps"
        )
    if status == _kernels.STATUS_DIVERGED:
        raise DivergenceError(f"state became non-finite near t = {times[-1]:.6e} s")
    return Trajectory(
        times=times, x=xs, v=vs,
        params_snapshot=params, damping_enabled=damping_enabled,
        n_accepted=n_acc, n_rejected=n_rej,
    )


def _steady_coefficients(modes: ModeSet, params: OscillatorParams) -> tuple[np.ndarray, np.ndarray]:
    """Complex per-term coefficients X with x_ss(t) = Re sum X exp(-i w t)."""
    coef, omega, theta = modes.flat_terms()
    susceptibility = (params.omega0**2 - omega**2) - 1j * params.gamma * params.omega0**2 * omega
    x_coef = (params.charge / params.mass) * coef * np.exp(1j * theta) / susceptibility
    return omega, x_coef


def analytic_steady_state(modes: ModeSet, params: OscillatorParams, t):
    """Closed-form steady-state (x, v) of the driven damped oscillator.

    Each mode responds with amplitude divided by
    (omega0^2 - omega^2) - i*(gamma*omega0^2)*omega; velocity is the exact
    time derivative. ``t`` may be a scalar or an array.
    """
    omega, x_coef = _steady_coefficients(modes, params)
    v_coef = -1j * omega * x_coef
    t_arr = np.asarray(t, dtype=float)
    scalar = t_arr.ndim == 0
    flat_t = np.atleast_1d(t_arr).ravel()
    x_out = np.empty(flat_t.size)
    v_out = np.empty(flat_t.size)
    chunk = max(1, 4_000_000 // max(omega.size, 1))
    for i in range(0, flat_t.size, chunk):
        sl = slice(i, min(i + chunk, flat_t.size))
        phase = np.exp(-1j * np.outer(flat_t[sl], omega))
        x_out[sl] = (phase @ x_coef).real
        v_out[sl] = (phase @ v_coef).real
    if scalar:
        return float(x_out[0]), float(v_out[0])
    return x_out.reshape(t_arr.shape), v_out.reshape(t_arr.shape)


@dataclass(frozen=True)
class GreenResult:
    """Quadrature value of the Green-kernel convolution plus its metadata."""

    position: float
    history_span: float
    step: float
    truncation_warning: bool


def greens_convolution(
    modes: ModeSet,
    params: OscillatorParams,
    t: float,
    history_span: float,
    step: float | None = None,
) -> GreenResult:
    """Steady-state position by convolving the field with the damped kernel.

    Integrates (e / (m omega_R)) * E(t') * exp(-gamma omega0^2 (t-t')/2)
    * sin(omega_R (t-t')) over t' in [t - history_span, t] by Simpson
    quadrature. A span below 10 transient times sets
    ``truncation_warning`` instead of raising.
    """
    decay = params.gamma * params.omega0**2
    tau_tran = 2.0 / decay if decay > 0 else math.inf
    warn = history_span < 10.0 * tau_tran
    if step is None:
        step = params.natural_period / 40.0
    if step > params.natural_period / 40.0:
        raise ParameterError("quadrature step must be <= natural period / 40")
    n = int(math.ceil(history_span / step)) + 1
    tp = np.linspace(t - history_span, t, n)
    omega_r = params.omega0 * math.sqrt(1.0 - (params.gamma * params.omega0 / 2.0) ** 2)
    lag = t - tp
    kernel = np.exp(-params.gamma * params.omega0**2 * lag / 2.0) * np.sin(omega_r * lag)
    integrand = field_x_dipole(modes, tp) * kernel
    value = params.charge / (params.mass * omega_r) * simpson(integrand, x=tp)
    return GreenResult(
        position=float(value), history_span=history_span, step=float(tp[1] - tp[0]),
        truncation_warning=warn,
    )


def repetition_time(
    frequencies,
    rational_tolerance: float = 1e-13,
    max_denominator: int = 10**6,
) -> float:
    """Exact repetition period of a finite sum of cosines, 2*pi/gcd(omega).

    Frequency ratios are rationalized by continued-fraction approximation
    with denominators bounded by ``max_denominator``; a ratio that cannot be
    matched within ``rational_tolerance`` marks the set incommensurate and
    the function returns ``math.inf`` (effectively infinite). The default
    tolerance sits below the ~1/max_denominator^2 accuracy that continued
    fractions reach for irrational ratios, so only genuinely rational
    ratios (up to float rounding) count as commensurate.
    """
    freqs = np.asarray(frequencies, dtype=float).ravel()
    if freqs.size == 0 or np.any(freqs <= 0):
        raise ParameterError("frequencies must be positive and non-empty")
    if freqs.size == 1:
        return 2.0 * math.pi / float(freqs[0])
    ref = float(freqs[0])
    ratios = []
    for f in freqs:
        frac = Fraction(float(f) / ref).limit_denominator(max_denominator)
        if abs(float(frac) - f / ref) > rational_tolerance:
            return math.inf
        ratios.append(frac)
    lattice = 1
    for frac in ratios:
        lattice = lattice * frac.denominator // math.gcd(lattice, frac.denominator)
    counts = [int(frac * lattice) for frac in ratios]
    g = 0
    for c in counts:
        g = math.gcd(g, c)
    # tau_rep = 2*pi / (ref * g / lattice), computed via the reference period
    # so that commensurate inputs built from exact periods come back exact.
    return (2.0 * math.pi / ref) * lattice / g


def integration_window(modes: ModeSet) -> float:
    """Longest non-repeating span 2*pi over the minimum frequency gap (s)."""
    return 2.0 * math.pi / minimum_frequency_gap(modes.omegas)
