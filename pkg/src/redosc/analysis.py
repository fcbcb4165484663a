"""Distributions, moments, envelopes, and the double-peak reconstruction.

Position statistics of a steady-state run are compared against the
zero-mean Gaussian with variance hbar/(2 m omega0); the slowly varying
oscillation amplitude extracted from (x, v/omega0) quadratures is what
turns per-segment double-peak (arcsine) densities into that Gaussian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .dynamics import Trajectory
from .errors import InsufficientDataError, ParameterError
from .params import OscillatorParams
from .vacuum_field import ModeSet

#: Kolmogorov statistic quantile at the 1% significance level.
KS_C_ALPHA_1PCT = math.sqrt(-0.5 * math.log(0.005))

_DENSITY_TOL = 1e-9


# ---------------------------------------------------------------------------
# histograms


@dataclass(frozen=True, eq=False)
class Histogram:
    """Normalized histogram; density integrates to one."""

    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=float))
        object.__setattr__(self, "counts", np.asarray(self.counts))
        object.__setattr__(self, "density", np.asarray(self.density, dtype=float))
        if self.counts.size != self.edges.size - 1 or self.density.size != self.counts.size:
            raise ParameterError("need len(counts) = len(density) = len(edges) - 1")
        if np.diff(self.edges).min() <= 0:
            raise ParameterError("edges must be strictly increasing")
        if self.counts.min() < 0:
            raise ParameterError("counts must be non-negative")
        total = float(np.sum(self.density * np.diff(self.edges)))
        if abs(total - 1.0) > _DENSITY_TOL:
            raise ParameterError(f"density integrates to {total}, expected 1")

    @classmethod
    def from_samples(cls, samples, bins=None, limits=None) -> "Histogram":
        """Bin samples with Freedman-Diaconis widths unless told otherwise."""
        samples = np.asarray(samples, dtype=float)
        if samples.size == 0:
            raise InsufficientDataError("no samples to histogram")
        if bins is None:
            bins = "fd"
        counts, edges = np.histogram(samples, bins=bins, range=limits)
        kept = counts.sum()
        if kept == 0:
            raise InsufficientDataError("all samples fall outside the histogram range")
        density = counts / (kept * np.diff(edges))
        return cls(edges=edges, counts=counts, density=density)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    @property
    def masses(self) -> np.ndarray:
        """Per-bin probability masses (sum to one)."""
        return self.density * np.diff(self.edges)

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())

    def merge(self, other: "Histogram") -> "Histogram":
        """Additive merge of two histograms over identical edges."""
        if other.edges.shape != self.edges.shape or not np.array_equal(other.edges, self.edges):
            raise ParameterError("histogram edges differ; cannot merge")
        counts = self.counts + other.counts
        density = counts / (counts.sum() * np.diff(self.edges))
        return Histogram(edges=self.edges, counts=counts, density=density)


def total_variation(p_masses, q_masses) -> float:
    """Total variation distance between two per-bin mass vectors."""
    p_masses = np.asarray(p_masses, dtype=float)
    q_masses = np.asarray(q_masses, dtype=float)
    return 0.5 * float(np.abs(p_masses - q_masses).sum())


# ---------------------------------------------------------------------------
# sampling and summary statistics


def sequential_sample(traj: Trajectory, t_start: float, stride: int = 1):
    """(x, p) samples at regularly strided recorded times from one trajectory.

    ``t_start`` should sit past the transient (at least five transient
    times for damped runs); it must not exceed the trajectory end.
    """
    if stride < 1:
        raise ParameterError("stride must be >= 1")
    if t_start > traj.times[-1]:
        raise ParameterError(
            f"t_start = {t_start:.3e} s beyond trajectory end {traj.times[-1]:.3e} s"
        )
    i0 = int(np.searchsorted(traj.times, t_start))
    x = traj.x[i0::stride].copy()
    p = traj.params_snapshot.mass * traj.v[i0::stride]
    return x, p


def ensemble_sample(trajectories):
    """One (x, p) pair per member, taken at the shared final time."""
    trajectories = list(trajectories)
    if not trajectories:
        raise InsufficientDataError("empty ensemble")
    t_end = trajectories[0].times[-1]
    for traj in trajectories:
        if traj.times[-1] != t_end:
            raise ParameterError("ensemble members end at different times")
    x = np.array([traj.x[-1] for traj in trajectories])
    p = np.array([traj.params_snapshot.mass * traj.v[-1] for traj in trajectories])
    return x, p


@dataclass(frozen=True)
class DistributionSummary:
    """Widths, moments, and mean energy of an (x, p) sample set.

    ``moments`` holds raw moments of x about zero; order 2 carries the same
    Bessel correction as sigma_x so that moments[2] = sigma_x^2 + mean_x^2
    holds exactly.
    """

    sigma_x: float
    sigma_p: float
    uncertainty_product: float
    moments: dict
    mean_energy: float
    sample_count: int
    mean_x: float = 0.0
    mean_p: float = 0.0

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_p < 0:
            raise ParameterError("standard deviations must be non-negative")
        if 2 in self.moments:
            expect = self.sigma_x**2 + self.mean_x**2
            if abs(self.moments[2] - expect) > 1e-12 * max(abs(expect), 1e-300):
                raise ParameterError("moments[2] inconsistent with sigma_x and mean")


def summarize(samples, params: OscillatorParams, max_moment: int = 4) -> DistributionSummary:
    """Unbiased widths, raw moments, and mean energy of (x, p) samples."""
    x, p = (np.asarray(a, dtype=float) for a in samples)
    if x.size < 2 or p.size < 2:
        raise InsufficientDataError("need at least 2 samples")
    n = x.size
    mean_x = float(x.mean())
    mean_p = float(p.mean())
    sigma_x = float(x.std(ddof=1))
    sigma_p = float(p.std(ddof=1))
    moments = {}
    for order in range(1, max_moment + 1):
        if order == 2:
            moments[2] = sigma_x**2 + mean_x**2
        else:
            moments[order] = float(np.mean(x**order))
    v = p / params.mass
    energy = 0.5 * params.mass * params.omega0**2 * x**2 + 0.5 * params.mass * v**2
    return DistributionSummary(
        sigma_x=sigma_x,
        sigma_p=sigma_p,
        uncertainty_product=sigma_x * sigma_p,
        moments=moments,
        mean_energy=float(energy.mean()),
        sample_count=n,
        mean_x=mean_x,
        mean_p=mean_p,
    )


def target_sigma_x(params: OscillatorParams) -> float:
    return math.sqrt(params.constants.hbar / (2 * params.mass * params.omega0))


def target_sigma_p(params: OscillatorParams) -> float:
    return math.sqrt(params.constants.hbar * params.mass * params.omega0 / 2)


def ground_state_energy(params: OscillatorParams) -> float:
    return 0.5 * params.constants.hbar * params.omega0


def gaussian_target(x, params: OscillatorParams):
    """Ground-state position density sqrt(m w0 / pi hbar) exp(-m w0 x^2/hbar)."""
    a = params.mass * params.omega0 / params.constants.hbar
    return np.sqrt(a / np.pi) * np.exp(-a * np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class GofReport:
    """Kolmogorov-Smirnov and chi-square agreement with the Gaussian target."""

    ks_distance: float
    ks_threshold: float
    ks_passed: bool
    n_effective: int
    alpha: float
    chi2: float
    chi2_dof: int
    chi2_pvalue: float
    chi2_bins_used: int


def goodness_of_fit(
    hist: Histogram,
    params: OscillatorParams,
    n_effective: int | None = None,
    alpha: float = 0.01,
) -> GofReport:
    """Test a position histogram against the ground-state Gaussian.

    The KS distance compares the empirical CDF (exact at bin edges) with
    the target CDF. ``n_effective`` is the number of statistically
    independent samples backing the histogram: for sequential runs the
    recorded points are correlated over a coherence time, so pass
    span/tau_coh rather than the raw count. The chi-square sums over bins
    with expected count >= 5.
    """
    n_total = hist.n_samples
    if n_total == 0:
        raise InsufficientDataError("empty histogram")
    if n_effective is None:
        n_effective = n_total
    scale = target_sigma_x(params)
    cdf = stats.norm.cdf(hist.edges, loc=0.0, scale=scale)
    emp = np.concatenate([[0.0], np.cumsum(hist.masses)])
    ks = float(np.abs(emp - cdf).max())
    c_alpha = math.sqrt(-0.5 * math.log(alpha / 2.0))
    threshold = c_alpha / math.sqrt(n_effective)
    expected = n_total * np.diff(cdf)
    mask = expected >= 5.0
    if mask.any():
        chi2 = float(((hist.counts[mask] - expected[mask]) ** 2 / expected[mask]).sum())
        dof = int(mask.sum()) - 1
        pvalue = float(stats.chi2.sf(chi2, dof)) if dof > 0 else float("nan")
    else:
        chi2, dof, pvalue = float("nan"), 0, float("nan")
    return GofReport(
        ks_distance=ks,
        ks_threshold=threshold,
        ks_passed=ks < threshold,
        n_effective=int(n_effective),
        alpha=alpha,
        chi2=chi2,
        chi2_dof=dof,
        chi2_pvalue=pvalue,
        chi2_bins_used=int(mask.sum()),
    )


# ---------------------------------------------------------------------------
# amplitude extraction and reconstruction


@dataclass(frozen=True, eq=False)
class AmplitudeSeries:
    """Slowly varying oscillation amplitude sampled at recorded times."""

    times: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "amplitude", np.asarray(self.amplitude, dtype=float))
        if self.times.size != self.amplitude.size:
            raise ParameterError("times and amplitude must have equal lengths")
        if self.times.size >= 2 and np.diff(self.times).min() <= 0:
            raise ParameterError("times must be strictly increasing")
        if self.amplitude.size and self.amplitude.min() < 0:
            raise ParameterError("amplitudes must be non-negative")

    @property
    def span(self) -> float:
        return float(self.times[-1] - self.times[0])


def envelope(traj: Trajectory) -> AmplitudeSeries:
    """Quadrature envelope sqrt(x^2 + (v/omega0)^2) at the recorded times.

    Exact for a pure tone; equals the modulus of the complex amplitude of a
    narrowband signal up to corrections of order (bandwidth / omega0).
    """
    w0 = traj.params_snapshot.omega0
    amp = np.hypot(traj.x, traj.v / w0)
    return AmplitudeSeries(times=traj.times, amplitude=amp)


def amplitude_distribution(series: AmplitudeSeries, min_spacing: float, bins=None) -> Histogram:
    """Histogram of amplitudes subsampled at spacing >= min_spacing.

    ``min_spacing`` should be at least one coherence time so consecutive
    samples carry fresh amplitude information.
    """
    if min_spacing <= 0:
        raise ParameterError("min_spacing must be positive")
    if series.span < 10.0 * min_spacing:
        raise InsufficientDataError(
            f"series spans {series.span:.3e} s, need >= 10 * min_spacing = {10 * min_spacing:.3e} s"
        )
    tol = min_spacing * (1.0 - 1e-9)
    picked = [0]
    last = series.times[0]
    for i in range(1, series.times.size):
        if series.times[i] - last >= tol:
            picked.append(i)
            last = series.times[i]
    return Histogram.from_samples(series.amplitude[np.asarray(picked)], bins=bins)


def double_peak_density(amplitude: float, x):
    """Arcsine position density 1/(pi sqrt(A^2 - x^2)) of a fixed-amplitude tone."""
    if amplitude <= 0:
        raise ParameterError("amplitude must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < amplitude
    out[inside] = 1.0 / (np.pi * np.sqrt(amplitude**2 - x[inside] ** 2))
    return out


def arcsine_bin_masses(amplitude: float, edges) -> np.ndarray:
    """Exact per-bin probability of the arcsine density (handles endpoints)."""
    if amplitude <= 0:
        raise ParameterError("amplitude must be positive")
    edges = np.asarray(edges, dtype=float)
    cdf = (np.arcsin(np.clip(edges / amplitude, -1.0, 1.0)) + np.pi / 2) / np.pi
    return np.diff(cdf)


def reconstruct(f_a: Histogram, x_edges, subdivisions: int = 8) -> np.ndarray:
    """Amplitude-weighted sum of double-peak densities on an x grid.

    Returns the bin-averaged density sum_A P_A(bin) f(A) dA / bin_width,
    with each arcsine density integrated analytically across the x bin so
    the inverse-square-root endpoint singularities contribute their exact
    mass. Amplitude bins are treated as piecewise-uniform and integrated
    over ``subdivisions`` interior points; a single amplitude bin (a
    delta-like f(A) with ``subdivisions=1``) reproduces the classical
    double-peak density of its midpoint bin-exactly.
    """
    x_edges = np.asarray(x_edges, dtype=float)
    widths = np.diff(x_edges)
    masses = np.zeros(widths.size)
    for lo, hi, weight in zip(f_a.edges[:-1], f_a.edges[1:], f_a.masses):
        if weight == 0.0 or hi <= 0:
            continue
        points = lo + (hi - lo) * (np.arange(subdivisions) + 0.5) / subdivisions
        points = points[points > 0]
        for a in points:
            masses += (weight / points.size) * arcsine_bin_masses(float(a), x_edges)
    return masses / widths


# ---------------------------------------------------------------------------
# coherence time


@dataclass(frozen=True)
class CoherenceReport:
    """Empirical amplitude-decorrelation time of a trajectory."""

    value: float
    method: str
    saturated: bool          # envelope never crossed the threshold
    span: float


def coherence_time_empirical(
    traj: Trajectory,
    method: str = "one_over_e",
    min_span: float | None = None,
) -> CoherenceReport:
    """Width of the autocorrelation envelope of x(t).

    The envelope is built from the autocorrelation of x and the x-(v/w0)
    cross-correlation (quadrature pair), so the carrier oscillation drops
    out. ``method`` picks the first crossing of 1/e ("one_over_e") or the
    first zero of the in-phase autocorrelation ("first_zero"). A pure tone
    never decays; that case returns the record span with ``saturated``.

    Samples are assumed (and checked) to sit on a near-uniform time grid.
    """
    if method not in ("one_over_e", "first_zero"):
        raise ParameterError(f"unknown method {method!r}")
    if min_span is not None and traj.times[-1] - traj.times[0] < min_span:
        raise InsufficientDataError("trajectory segment too short for autocorrelation")
    n = len(traj)
    if n < 16:
        raise InsufficientDataError("too few recorded points")
    dts = np.diff(traj.times)
    dt = float(dts.mean())
    if dts.std() > 1e-3 * dt:
        raise ParameterError("recorded times are not uniform enough for FFT correlation")
    x = traj.x - traj.x.mean()
    q = traj.v / traj.params_snapshot.omega0
    q = q - q.mean()
    nfft = 1 << int(np.ceil(np.log2(2 * n)))
    fx = np.fft.rfft(x, nfft)
    fq = np.fft.rfft(q, nfft)
    overlap = np.arange(n, 0, -1, dtype=float)
    c_xx = np.fft.irfft(fx * np.conj(fx), nfft)[:n] / overlap
    c_xq = np.fft.irfft(fq * np.conj(fx), nfft)[:n] / overlap
    half = n // 2  # long lags have too few pairs to trust
    env = np.hypot(c_xx, c_xq)[:half]
    env = env / env[0]
    span = float(traj.times[half - 1] - traj.times[0])
    if method == "one_over_e":
        below = np.nonzero(env < 1.0 / np.e)[0]
        if below.size == 0:
            return CoherenceReport(value=span, method=method, saturated=True, span=span)
        return CoherenceReport(value=float(below[0] * dt), method=method, saturated=False, span=span)
    # first_zero: the envelope of a beat touches zero without changing sign,
    # so take the first local minimum that dips low enough to count as a null.
    interior = np.nonzero(
        (env[1:-1] < env[:-2]) & (env[1:-1] <= env[2:]) & (env[1:-1] < 0.2)
    )[0]
    if interior.size == 0:
        return CoherenceReport(value=span, method=method, saturated=True, span=span)
    return CoherenceReport(value=float((interior[0] + 1) * dt), method=method, saturated=False, span=span)


# ---------------------------------------------------------------------------
# order-of-magnitude diagnostics


@dataclass(frozen=True)
class RandomWalkScales:
    """Random-walk estimates of the field and displacement magnitudes."""

    e0: float                 # typical field magnitude, V/m
    x0: float                 # typical displacement from the full band
    x0_resonant_band: float   # same estimate confined to the resonance width
    sigma_x_target: float
    boyer_ratio: float        # x0_resonant_band / (sqrt(3/pi) sigma_x)


def diagnostics_x0_e0(modes: ModeSet, params: OscillatorParams) -> RandomWalkScales:
    """Random-walk magnitudes sqrt(2 N_w) * step/2 for field and position.

    The displacement estimate matches sqrt(3/pi) * sigma_x once the
    mode count is restricted to the resonance width gamma*omega0^2 (the
    oscillator only responds there); ``x0`` uses the full sampled band and
    scales as sqrt(delta / resonance width) above it.
    """
    n_omega = np.unique(modes.omegas).size
    hbar = params.constants.hbar
    eps0 = params.constants.epsilon0
    step_e = 0.5 * math.sqrt(hbar * params.omega0 / (eps0 * modes.volume))
    e0 = math.sqrt(2 * n_omega) * step_e
    if params.charge == 0.0:
        x_gain = 0.0  # uncharged particle is not driven at all
    else:
        x_gain = params.charge / (params.mass * params.gamma * params.omega0**3)
    x0 = math.sqrt(2 * n_omega) * 0.5 * x_gain * math.sqrt(hbar * params.omega0 / (eps0 * modes.volume))
    x0_res = x0 * math.sqrt(params.resonance_width / modes.delta)
    sx = target_sigma_x(params)
    boyer = x0_res / (math.sqrt(3.0 / np.pi) * sx) if sx > 0 else float("nan")
    return RandomWalkScales(
        e0=e0, x0=x0, x0_resonant_band=x0_res, sigma_x_target=sx, boyer_ratio=boyer
    )
