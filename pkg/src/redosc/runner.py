"""Experiment orchestration: sequential runs, ensembles, sweeps, benchmarks.

Ensemble members are fully independent: member i derives its own mode set
from ``member_seed(master_seed, i)`` and is integrated by the same compiled
kernel regardless of which worker process handles it, so serial and
parallel executions of one master seed are bitwise identical. Aggregation
is an order-independent merge over member indices.
"""

from __future__ import annotations

import json
import math
import multiprocessing as mp
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis
from .config import RunConfig
from .dynamics import Trajectory, integrate
from .errors import (
    ConfigurationRejectedError,
    DivergenceError,
    ParameterError,
    StiffnessError,
)
from .params import OscillatorParams, SimWindows, derive_windows, validate_regime
from .vacuum_field import sample_modes


def member_seed(master_seed: int, index: int) -> int:
    """Frozen member-seed derivation: hash of (master seed, member index)."""
    return int(np.random.SeedSequence((master_seed, index)).generate_state(1, np.uint64)[0])


def _integrate_member(cfg: RunConfig, index: int, t_end: float, checkpoints) :
    """One ensemble member; returns (index, seed, xs, vs, status_message)."""
    seed = member_seed(cfg.field.seed, index)
    modes = sample_modes(cfg.params, cfg.field, seed=seed)
    try:
        if checkpoints is None:
            traj = integrate(
                cfg.params, modes, 0.0, t_end, 0.0, 0.0, cfg.integrator,
                record_stride=2**62, damping_enabled=cfg.damping,
            )
            return index, seed, (float(traj.x[-1]),), (float(traj.v[-1]),), ""
        xs, vs = [], []
        x, v, t = 0.0, 0.0, 0.0
        for t_next in checkpoints:
            traj = integrate(
                cfg.params, modes, t, t_next, x, v, cfg.integrator,
                record_stride=2**62, damping_enabled=cfg.damping,
            )
            x, v, t = float(traj.x[-1]), float(traj.v[-1]), t_next
            xs.append(x)
            vs.append(v)
        return index, seed, tuple(xs), tuple(vs), ""
    except (StiffnessError, DivergenceError) as exc:
        return index, seed, (), (), f"{type(exc).__name__}: {exc}"


def _member_star(args):
    return _integrate_member(*args)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-member final states plus the order-independent aggregate."""

    seeds: np.ndarray
    final_x: np.ndarray
    final_v: np.ndarray
    summary: analysis.DistributionSummary
    windows: SimWindows
    t_end: float
    wall_time: float
    workers: int
    excluded: tuple          # (index, message) pairs
    checkpoint_times: np.ndarray | None = None
    checkpoint_sigma_x: np.ndarray | None = None
    checkpoint_sigma_p: np.ndarray | None = None

    @property
    def uncertainty_series(self) -> np.ndarray | None:
        if self.checkpoint_sigma_x is None:
            return None
        return self.checkpoint_sigma_x * self.checkpoint_sigma_p


def run_ensemble(cfg: RunConfig, checkpoints: int = 0) -> EnsembleResult:
    """Integrate n_particles independent members and aggregate final (x, p).

    All members share the oscillator parameters, the deterministic
    frequency ladder, and zero initial conditions; directions, polarization
    angles, and phases are redrawn per member. Members run to
    transient_multiples * tau_tran + coherence_multiples * tau_coh.
    With ``checkpoints > 0`` every member also records that many
    intermediate states on a fixed time grid (used by damping-off runs).

    Members that fail to integrate are excluded with a warning while they
    stay below 0.1% of the ensemble; beyond that the run fails.
    """
    regime = validate_regime(cfg.params, cfg.field)
    if not regime.passed:
        raise ConfigurationRejectedError("; ".join(regime.messages))
    reference_modes = sample_modes(cfg.params, cfg.field)
    windows = derive_windows(cfg.params, reference_modes, min_int_ratio=0.0)
    t_end = (
        cfg.transient_multiples * windows.tau_tran
        + cfg.coherence_multiples * windows.tau_coh
    )
    cp_times = None
    cp_arg = None
    if checkpoints > 0:
        cp_times = np.linspace(0.0, t_end, checkpoints + 1)[1:]
        cp_arg = tuple(float(t) for t in cp_times)

    tasks = [(cfg, i, t_end, cp_arg) for i in range(cfg.n_particles)]
    start = time.perf_counter()
    if cfg.workers == 1:
        results = [_member_star(task) for task in tasks]
    else:
        chunk = max(1, math.ceil(cfg.n_particles / (cfg.workers * 8)))
        with mp.get_context("fork").Pool(cfg.workers) as pool:
            results = pool.map(_member_star, tasks, chunksize=chunk)
    wall = time.perf_counter() - start

    results.sort(key=lambda r: r[0])
    good = [r for r in results if not r[4]]
    excluded = tuple((r[0], r[4]) for r in results if r[4])
    if len(excluded) > 0.001 * cfg.n_particles:
        raise DivergenceError(
            f"{len(excluded)} of {cfg.n_particles} members failed: {excluded[:3]}..."
        )
    seeds = np.array([r[1] for r in good], dtype=np.uint64)
    xs = np.array([r[2] for r in good])
    vs = np.array([r[3] for r in good])
    final_x = xs[:, -1]
    final_v = vs[:, -1]
    summary = analysis.summarize((final_x, cfg.params.mass * final_v), cfg.params)
    cp_sx = cp_sp = None
    if checkpoints > 0:
        cp_sx = xs.std(axis=0, ddof=1)
        cp_sp = (cfg.params.mass * vs).std(axis=0, ddof=1)
    return EnsembleResult(
        seeds=seeds,
        final_x=final_x,
        final_v=final_v,
        summary=summary,
        windows=windows,
        t_end=t_end,
        wall_time=wall,
        workers=cfg.workers,
        excluded=excluded,
        checkpoint_times=cp_times,
        checkpoint_sigma_x=cp_sx,
        checkpoint_sigma_p=cp_sp,
    )


@dataclass(frozen=True, eq=False)
class SequentialResult:
    """Artifacts of one long trajectory run."""

    trajectory: Trajectory
    windows: SimWindows
    summary: analysis.DistributionSummary
    gof: analysis.GofReport
    position_hist: analysis.Histogram
    momentum_hist: analysis.Histogram
    amplitude_hist: analysis.Histogram
    reconstruction: np.ndarray       # bin-averaged density on position_hist.edges
    tv_distance: float
    coherence: analysis.CoherenceReport
    scales: analysis.RandomWalkScales
    wall_time: float
    checks: dict
    uncertainty_blocks: np.ndarray | None = None   # (t, sigma_x*sigma_p) per block, undamped runs

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def run_sequential(cfg: RunConfig) -> SequentialResult:
    """One long trajectory; histogram, envelope, and reconstruction analysis.

    Integrates over [0, transient_multiples * tau_tran + tau_int], discards
    the transient, and checks the position statistics against the
    ground-state targets. The KS test uses span/tau_coh effective samples
    (recorded points are correlated within a coherence time).
    """
    regime = validate_regime(cfg.params, cfg.field)
    if not regime.passed:
        raise ConfigurationRejectedError("; ".join(regime.messages))
    modes = sample_modes(cfg.params, cfg.field)
    windows = derive_windows(cfg.params, modes, min_int_ratio=10.0)
    t_start = cfg.transient_multiples * windows.tau_tran if cfg.damping else 0.0
    t_end = cfg.transient_multiples * windows.tau_tran + windows.tau_int

    start = time.perf_counter()
    traj = integrate(
        cfg.params, modes, 0.0, t_end, 0.0, 0.0, cfg.integrator,
        record_stride=cfg.record_stride, damping_enabled=cfg.damping,
    )
    x, p = analysis.sequential_sample(traj, t_start)
    summary = analysis.summarize((x, p), cfg.params)
    position_hist = analysis.Histogram.from_samples(x)
    momentum_hist = analysis.Histogram.from_samples(p)
    n_eff = max(2, int(windows.tau_int / windows.tau_coh))
    gof = analysis.goodness_of_fit(position_hist, cfg.params, n_effective=n_eff, alpha=cfg.ks_alpha)

    i0 = int(np.searchsorted(traj.times, t_start))
    steady = Trajectory(
        times=traj.times[i0:], x=traj.x[i0:], v=traj.v[i0:],
        params_snapshot=traj.params_snapshot, damping_enabled=traj.damping_enabled,
        n_accepted=traj.n_accepted, n_rejected=traj.n_rejected,
    )
    env = analysis.envelope(steady)
    amplitude_hist = analysis.amplitude_distribution(env, 3.0 * windows.tau_coh)
    recon = analysis.reconstruct(amplitude_hist, position_hist.edges)
    tv = analysis.total_variation(recon * np.diff(position_hist.edges), position_hist.masses)
    coherence = analysis.coherence_time_empirical(steady)
    scales = analysis.diagnostics_x0_e0(modes, cfg.params)
    wall = time.perf_counter() - start

    sx_target = analysis.target_sigma_x(cfg.params)
    blocks = None
    if cfg.damping:
        checks = {
            "regime": regime.passed,
            "ks": gof.ks_passed,
            "sigma_x": abs(summary.sigma_x / sx_target - 1.0) < cfg.sigma_tolerance,
            "reconstruction_tv": tv < 0.05,
        }
    else:
        # Without damping there is no steady state; report the uncertainty
        # product over consecutive time blocks and require it to grow past
        # the minimum-uncertainty value.
        n_blocks = 20
        edges = np.linspace(traj.times[0], traj.times[-1], n_blocks + 1)
        rows = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            sel = (traj.times >= lo) & (traj.times < hi)
            if sel.sum() < 2:
                continue
            sx = traj.x[sel].std(ddof=1)
            sp = (cfg.params.mass * traj.v[sel]).std(ddof=1)
            rows.append((0.5 * (lo + hi), sx * sp))
        blocks = np.asarray(rows)
        hbar = cfg.params.constants.hbar
        checks = {
            "regime": regime.passed,
            "uncertainty_growth": bool(
                blocks[-1, 1] >= blocks[0, 1] and blocks[:, 1].max() > hbar
            ),
        }
    return SequentialResult(
        trajectory=traj,
        windows=windows,
        summary=summary,
        gof=gof,
        position_hist=position_hist,
        momentum_hist=momentum_hist,
        amplitude_hist=amplitude_hist,
        reconstruction=recon,
        tv_distance=tv,
        coherence=coherence,
        scales=scales,
        wall_time=wall,
        checks=checks,
        uncertainty_blocks=blocks,
    )


@dataclass(frozen=True)
class SweepRow:
    n_omega: int
    mean_energy: float
    deviation: float          # relative deviation from hbar*omega0/2
    sigma_x: float
    sigma_p: float
    wall_time: float


@dataclass(frozen=True, eq=False)
class SweepResult:
    rows: tuple
    trend_ok: bool            # |deviation| at largest n_omega <= at smallest

    def as_table(self) -> str:
        lines = ["n_omega,mean_energy,deviation,sigma_x,sigma_p,wall_time"]
        for r in self.rows:
            lines.append(
                f"{r.n_omega},{r.mean_energy!r},{r.deviation!r},"
                f"{r.sigma_x!r},{r.sigma_p!r},{r.wall_time!r}"
            )
        return "\n".join(lines) + "\n"


def convergence_sweep(cfg: RunConfig) -> SweepResult:
    """Ensemble mean energy against the ground-state target per n_omega.

    The trend check compares the endpoints of the sweep; intermediate
    points need not decrease monotonically because the deterministic
    frequency grid can straddle the resonance line differently at each
    n_omega.
    """
    from dataclasses import replace

    rows = []
    target = analysis.ground_state_energy(cfg.params)
    for n in cfg.n_omega_list:
        sub_field = replace(cfg.field, n_omega=n)
        sub = replace(cfg, field=sub_field, experiment="ensemble")
        res = run_ensemble(sub)
        rows.append(
            SweepRow(
                n_omega=n,
                mean_energy=res.summary.mean_energy,
                deviation=res.summary.mean_energy / target - 1.0,
                sigma_x=res.summary.sigma_x,
                sigma_p=res.summary.sigma_p,
                wall_time=res.wall_time,
            )
        )
    trend_ok = abs(rows[-1].deviation) <= abs(rows[0].deviation)
    return SweepResult(rows=tuple(rows), trend_ok=trend_ok)


@dataclass(frozen=True, eq=False)
class BenchResult:
    worker_counts: tuple
    wall_times: tuple
    alpha: float              # fitted exponent of t ~ w^(-alpha)
    residuals: tuple          # per-point relative residual of the fit
    identical: bool           # results bitwise identical across worker counts

    def as_table(self) -> str:
        lines = ["workers,wall_time"]
        for w, t in zip(self.worker_counts, self.wall_times):
            lines.append(f"{w},{t!r}")
        return "\n".join(lines) + "\n"


def scaling_benchmark(cfg: RunConfig, worker_counts) -> BenchResult:
    """Wall time of one fixed ensemble workload per worker count.

    Fits t = C * w^(-alpha); embarrassingly parallel members should give
    alpha near one up to the host's core count. Also verifies that results
    do not depend on the worker count.
    """
    from dataclasses import replace

    worker_counts = tuple(int(w) for w in worker_counts)
    if not worker_counts:
        raise ParameterError("need at least one worker count")
    # Warm-up: load the compiled kernel and OS caches outside the timing.
    warm = replace(cfg, n_particles=min(cfg.n_particles, 8), workers=worker_counts[0])
    run_ensemble(warm)

    times = []
    reference = None
    identical = True
    for w in worker_counts:
        res = run_ensemble(replace(cfg, workers=w))
        times.append(res.wall_time)
        if reference is None:
            reference = res
        else:
            identical = identical and np.array_equal(res.final_x, reference.final_x)
            identical = identical and np.array_equal(res.final_v, reference.final_v)
    if len(worker_counts) >= 2:
        logs_w = np.log(np.asarray(worker_counts, dtype=float))
        logs_t = np.log(np.asarray(times))
        slope, intercept = np.polyfit(logs_w, logs_t, 1)
        alpha = -float(slope)
        fit = np.exp(intercept + slope * logs_w)
        residuals = tuple(float(r) for r in (np.asarray(times) - fit) / fit)
    else:
        alpha = float("nan")
        residuals = (0.0,) * len(times)
    return BenchResult(
        worker_counts=worker_counts,
        wall_times=tuple(times),
        alpha=alpha,
        residuals=residuals,
        identical=identical,
    )


# ---------------------------------------------------------------------------
# artifact persistence


def _write_histogram_csv(hist: analysis.Histogram, path) -> None:
    data = np.column_stack([hist.edges[:-1], hist.edges[1:], hist.counts, hist.density])
    np.savetxt(path, data, delimiter=",", header="edge_lo,edge_hi,count,density", comments="")


def write_sequential_artifacts(cfg: RunConfig, result: SequentialResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.txt").write_text(cfg.echo_text())
    result.trajectory.save_csv(out / "trajectory.csv")
    result.trajectory.save_sidecar(out / "trajectory.json", seed=cfg.field.seed, windows=result.windows)
    _write_histogram_csv(result.position_hist, out / "position_hist.csv")
    _write_histogram_csv(result.momentum_hist, out / "momentum_hist.csv")
    _write_histogram_csv(result.amplitude_hist, out / "amplitude_hist.csv")
    np.savetxt(
        out / "reconstruction.csv",
        np.column_stack([result.position_hist.edges[:-1], result.position_hist.edges[1:], result.reconstruction]),
        delimiter=",", header="edge_lo,edge_hi,density", comments="",
    )
    sx_target = analysis.target_sigma_x(cfg.params)
    sp_target = analysis.target_sigma_p(cfg.params)
    report = {
        "experiment": "sequential",
        "checks": result.checks,
        "passed": result.passed,
        "sigma_x": result.summary.sigma_x,
        "sigma_x_target": sx_target,
        "sigma_p": result.summary.sigma_p,
        "sigma_p_target": sp_target,
        "uncertainty_product": result.summary.uncertainty_product,
        "mean_energy": result.summary.mean_energy,
        "mean_energy_target": analysis.ground_state_energy(cfg.params),
        "kurtosis": result.summary.moments[4] / result.summary.moments[2] ** 2,
        "ks_distance": result.gof.ks_distance,
        "ks_threshold": result.gof.ks_threshold,
        "ks_n_effective": result.gof.n_effective,
        "chi2": result.gof.chi2,
        "chi2_dof": result.gof.chi2_dof,
        "tv_distance": result.tv_distance,
        "coherence_time_empirical": result.coherence.value,
        "coherence_saturated": result.coherence.saturated,
        "tau_coh_spectral": result.windows.tau_coh,
        "tau_tran": result.windows.tau_tran,
        "tau_int": result.windows.tau_int,
        "x0_random_walk": result.scales.x0,
        "x0_resonant_band": result.scales.x0_resonant_band,
        "boyer_ratio": result.scales.boyer_ratio,
        "wall_time": result.wall_time,
        "sample_count": result.summary.sample_count,
    }
    if result.uncertainty_blocks is not None:
        np.savetxt(out / "uncertainty_blocks.csv", result.uncertainty_blocks,
                   delimiter=",", header="t,sigma_x_sigma_p", comments="")
    (out / "report.json").write_text(json.dumps(report, indent=2))
    return out


def write_ensemble_artifacts(
    cfg: RunConfig, result: EnsembleResult, out_dir, experiment: str = "ensemble"
) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "effective_config.txt").write_text(cfg.echo_text())
    members = np.column_stack([
        np.arange(result.final_x.size), result.seeds.astype(float), result.final_x, result.final_v,
    ])
    np.savetxt(out / "members.csv", members, delimiter=",",
               header="index,seed,final_x,final_v", comments="")
    hbar = cfg.params.constants.hbar
    target = hbar / 2.0
    product = result.summary.uncertainty_product
    checks = {
        "member_count": result.final_x.size + len(result.excluded) == cfg.n_particles,
        "uncertainty_product": abs(product / target - 1.0) < cfg.sigma_tolerance,
        "mean_energy": abs(
            result.summary.mean_energy / analysis.ground_state_energy(cfg.params) - 1.0
        ) < cfg.energy_tolerance,
    }
    report = {
        "experiment": experiment,
        "checks": checks,
        "passed": all(checks.values()) if cfg.damping else checks["member_count"],
        "n_members": int(result.final_x.size),
        "n_excluded": len(result.excluded),
        "excluded": [list(e) for e in result.excluded],
        "sigma_x": result.summary.sigma_x,
        "sigma_p": result.summary.sigma_p,
        "uncertainty_product": product,
        "uncertainty_target": target,
        "mean_energy": result.summary.mean_energy,
        "mean_energy_target": analysis.ground_state_energy(cfg.params),
        "t_end": result.t_end,
        "tau_tran": result.windows.tau_tran,
        "tau_coh": result.windows.tau_coh,
        "wall_time": result.wall_time,
        "workers": result.workers,
    }
    if result.checkpoint_times is not None:
        series = np.column_stack([
            result.checkpoint_times, result.checkpoint_sigma_x, result.checkpoint_sigma_p,
            result.uncertainty_series,
        ])
        np.savetxt(out / "uncertainty_series.csv", series, delimiter=",",
                   header="t,sigma_x,sigma_p,product", comments="")
        prod = result.uncertainty_series
        report["final_uncertainty_product"] = float(prod[-1])
        report["product_exceeds_2x_target"] = bool(prod.max() > 2.0 * target)
    (out / "report.json").write_text(json.dumps(report, indent=2))
    return out


def load_trajectory(csv_path, sidecar_path) -> tuple[Trajectory, dict]:
    """Rebuild a Trajectory (and its sidecar dict) from stored artifacts."""
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    meta = json.loads(Path(sidecar_path).read_text())
    params = OscillatorParams(charge=meta["charge"], mass=meta["mass"], omega0=meta["omega0"])
    traj = Trajectory(
        times=data[:, 0], x=data[:, 1], v=data[:, 2],
        params_snapshot=params, damping_enabled=meta.get("damping_enabled", True),
        n_accepted=meta.get("steps_accepted", 0), n_rejected=meta.get("steps_rejected", 0),
    )
    return traj, meta
