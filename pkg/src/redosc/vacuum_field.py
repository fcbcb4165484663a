"""Mode sampling, isotropic polarizations, and the synthesized field.

The field is a finite sum of plane waves restricted to a narrow frequency
shell around the oscillator resonance. Frequencies come from a uniform grid
in the cubic wavenumber kappa = k^3/3 so that every mode occupies the same
k-space volume; directions, polarization angles, and phases are random.

Randomness flows through named substreams of one 64-bit master seed::

    stream = Generator(Philox(SeedSequence(seed, spawn_key=(PURPOSE,))))

with PURPOSE codes 0 = azimuthal grid offsets, 1 = directions (cos-theta
and phi draws), 2 = polarization angle chi, 3 = per-polarization phases.
This rule is frozen: it is what makes mode sets reproducible and lets
ensemble members derive disjoint streams without coordination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .params import CODATA, FieldConfig, OscillatorParams, PhysicalConstants

STREAM_OFFSETS = 0
STREAM_DIRECTIONS = 1
STREAM_CHI = 2
STREAM_PHASES = 3

_TRIAD_TOL = 1e-12


def substream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for one named purpose under a master seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=path)))


def make_polarization(theta, phi, chi):
    """Orthonormal polarization pair for the direction (theta, phi).

    The xy-plane basis (cos chi, sin chi, 0), (-sin chi, cos chi, 0) is
    rotated counterclockwise about y by theta, then about z by phi, so that
    the unit vector along z maps onto the propagation direction. Accepts
    scalars or broadcastable arrays; returns arrays of shape (..., 3).

    Returns
    -------
    (eps1, eps2) : tuple of ndarray
        Right-handed with the propagation direction: eps1 x eps2 = k_hat.
    """
    theta, phi, chi = np.broadcast_arrays(theta, phi, chi)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    cc, sc = np.cos(chi), np.sin(chi)
    eps1 = np.stack([ct * cp * cc - sp * sc, ct * sp * cc + cp * sc, -st * cc], axis=-1)
    eps2 = np.stack([-ct * cp * sc - sp * cc, -ct * sp * sc + cp * cc, st * sc], axis=-1)
    return eps1, eps2


@dataclass(frozen=True, eq=False)
class Mode:
    """One sampled plane wave (read-only view into a ModeSet)."""

    k_vec: np.ndarray
    omega: float
    polarization: tuple[np.ndarray, np.ndarray]
    phases: np.ndarray
    amplitude: float


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Immutable collection of sampled modes plus its normalization volume.

    Stored as flat arrays (one row per wave vector); iterating or indexing
    yields ``Mode`` views. ``volume`` is the bounded-space normalization
    volume (2 pi)^3 N / V_k, and every amplitude equals
    sqrt(hbar * omega / (eps0 * volume)).
    """

    k_vecs: np.ndarray          # (N, 3) rad/m
    omegas: np.ndarray          # (N,) rad/s
    eps1: np.ndarray            # (N, 3)
    eps2: np.ndarray            # (N, 3)
    phases: np.ndarray          # (N, 2) rad, one per polarization
    amplitudes: np.ndarray      # (N,) V/m
    volume: float               # m^3
    k_shell_volume: float       # rad^3/m^3
    omega0: float
    delta: float
    seed: int
    constants: PhysicalConstants = CODATA
    _eval: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("k_vecs", "omegas", "eps1", "eps2", "phases", "amplitudes"):
            object.__setattr__(self, name, np.ascontiguousarray(getattr(self, name), dtype=float))
        self._validate()

    def _validate(self):
        n = self.omegas.size
        if n == 0:
            raise ParameterError("mode set is empty")
        c = self.constants.c
        if not np.allclose(self.omegas, c * np.linalg.norm(self.k_vecs, axis=1), rtol=1e-12, atol=0):
            raise ParameterError("omega != c*|k| for some mode")
        lo, hi = self.omega0 - self.delta / 2, self.omega0 + self.delta / 2
        if self.omegas.min() < lo * (1 - 1e-12) or self.omegas.max() > hi * (1 + 1e-12):
            raise ParameterError("mode frequency outside the sampled shell")
        khat = self.k_vecs / np.linalg.norm(self.k_vecs, axis=1, keepdims=True)
        for eps in (self.eps1, self.eps2):
            if np.abs(np.einsum("ij,ij->i", eps, khat)).max() > _TRIAD_TOL:
                raise ParameterError("polarization not transverse")
            if np.abs(np.einsum("ij,ij->i", eps, eps) - 1).max() > _TRIAD_TOL:
                raise ParameterError("polarization not unit length")
        if np.abs(np.einsum("ij,ij->i", self.eps1, self.eps2)).max() > _TRIAD_TOL:
            raise ParameterError("polarization pair not orthogonal")
        if self.phases.shape != (n, 2) or self.phases.min() < 0 or self.phases.max() >= 2 * np.pi:
            raise ParameterError("phases must have shape (N, 2) with values in [0, 2*pi)")
        expected_v = (2 * np.pi) ** 3 * n / self.k_shell_volume
        if abs(self.volume - expected_v) > 1e-12 * expected_v:
            raise ParameterError("volume inconsistent with (2*pi)^3 * N / V_k")
        expected_amp = np.sqrt(self.constants.hbar * self.omegas / (self.constants.epsilon0 * self.volume))
        if np.abs(self.amplitudes - expected_amp).max() > 1e-12 * expected_amp.max():
            raise ParameterError("amplitude inconsistent with sqrt(hbar*omega/(eps0*V))")

    def __len__(self) -> int:
        return self.omegas.size

    def __getitem__(self, i: int) -> Mode:
        return Mode(
            k_vec=self.k_vecs[i],
            omega=float(self.omegas[i]),
            polarization=(self.eps1[i], self.eps2[i]),
            phases=self.phases[i],
            amplitude=float(self.amplitudes[i]),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    # -- flat and folded views used by the field evaluation and integrator --

    def flat_terms(self):
        """Per-(mode, polarization) arrays (coef, omega, phase), mode-major.

        coef = amplitude * eps_x so the x-field is sum coef*cos(omega*t - phase).
        """
        if "flat" not in self._eval:
            coef = (self.amplitudes[:, None] * np.stack([self.eps1[:, 0], self.eps2[:, 0]], axis=1)).ravel()
            omega = np.repeat(self.omegas, 2)
            theta = self.phases.ravel()
            self._eval["flat"] = (coef, omega, theta)
        return self._eval["flat"]

    def folded_terms(self):
        """Equal-frequency terms folded to one cosine per distinct frequency.

        Returns (omega_u, r, psi) with the x-field equal to
        sum_j r_j * cos(omega_u_j * t - psi_j); exact up to rounding.
        """
        if "folded" not in self._eval:
            coef, omega, theta = self.flat_terms()
            omega_u, inverse = np.unique(omega, return_inverse=True)
            a = np.zeros(omega_u.size)
            b = np.zeros(omega_u.size)
            np.add.at(a, inverse, coef * np.cos(theta))
            np.add.at(b, inverse, coef * np.sin(theta))
            r = np.hypot(a, b)
            psi = np.arctan2(b, a)
            self._eval["folded"] = (omega_u, r, psi)
        return self._eval["folded"]

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "omega0": self.omega0,
            "delta": self.delta,
            "seed": self.seed,
            "volume": self.volume,
            "k_shell_volume": self.k_shell_volume,
            "k_vec": self.k_vecs.tolist(),
            "omega": self.omegas.tolist(),
            "eps1": self.eps1.tolist(),
            "eps2": self.eps2.tolist(),
            "phases": self.phases.tolist(),
            "amplitude": self.amplitudes.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModeSet":
        return cls(
            k_vecs=np.array(d["k_vec"]),
            omegas=np.array(d["omega"]),
            eps1=np.array(d["eps1"]),
            eps2=np.array(d["eps2"]),
            phases=np.array(d["phases"]),
            amplitudes=np.array(d["amplitude"]),
            volume=d["volume"],
            k_shell_volume=d["k_shell_volume"],
            omega0=d["omega0"],
            delta=d["delta"],
            seed=d["seed"],
        )

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load_json(cls, path) -> "ModeSet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _kappa_grid(params: OscillatorParams, delta: float, n_kappa: int, c: float):
    lo = (params.omega0 - delta / 2) ** 3 / (3 * c**3)
    hi = (params.omega0 + delta / 2) ** 3 / (3 * c**3)
    dkappa = (hi - lo) / (n_kappa - 1)
    return lo + dkappa * np.arange(n_kappa), dkappa


def _shell_volume(params: OscillatorParams, delta: float, c: float) -> float:
    hi = (params.omega0 + delta / 2) / c
    lo = (params.omega0 - delta / 2) / c
    return 4 * np.pi / 3 * (hi**3 - lo**3)


def _assemble(params, cfg, kappas, vartheta, phi, chi, constants, n_total, seed):
    c = constants.c
    k = (3.0 * kappas) ** (1.0 / 3.0)
    theta = np.arccos(vartheta)
    st = np.sin(theta)
    k_vecs = np.stack([k * st * np.cos(phi), k * st * np.sin(phi), k * vartheta], axis=1)
    omegas = c * k
    eps1, eps2 = make_polarization(theta, phi, chi)
    v_k = _shell_volume(params, cfg.delta, c)
    volume = (2 * np.pi) ** 3 * n_total / v_k
    amplitudes = np.sqrt(constants.hbar * omegas / (constants.epsilon0 * volume))
    phases = substream(seed, STREAM_PHASES).uniform(0, 2 * np.pi, (n_total, 2))
    return ModeSet(
        k_vecs=k_vecs,
        omegas=omegas,
        eps1=eps1,
        eps2=eps2,
        phases=phases,
        amplitudes=amplitudes,
        volume=volume,
        k_shell_volume=v_k,
        omega0=params.omega0,
        delta=cfg.delta,
        seed=seed,
        constants=constants,
    )


def sample_modes_single_angle(
    params: OscillatorParams,
    cfg: FieldConfig,
    constants: PhysicalConstants = CODATA,
    seed: int | None = None,
) -> ModeSet:
    """One random direction per frequency; N_k = n_omega modes.

    Frequencies sit on the deterministic uniform kappa grid spanning
    [omega0 - delta/2, omega0 + delta/2] and are strictly increasing;
    cos(theta) is uniform on [-1, 1] and phi uniform on [0, 2*pi) per mode.
    ``seed`` overrides cfg.seed (used for ensemble member derivation).
    """
    seed = cfg.seed if seed is None else seed
    n = cfg.n_omega
    if n < 2:
        raise ParameterError("n_omega must be >= 2")
    kappas, _ = _kappa_grid(params, cfg.delta, n, constants.c)
    rng_dir = substream(seed, STREAM_DIRECTIONS)
    vartheta = rng_dir.uniform(-1.0, 1.0, n)
    phi = rng_dir.uniform(0.0, 2 * np.pi, n)
    chi = substream(seed, STREAM_CHI).uniform(0.0, 2 * np.pi, n)
    return _assemble(params, cfg, kappas, vartheta, phi, chi, constants, n, seed)


def sample_modes_spherical(
    params: OscillatorParams,
    cfg: FieldConfig,
    constants: PhysicalConstants = CODATA,
    seed: int | None = None,
) -> ModeSet:
    """Uniform spherical sampling on an (n_kappa, n_theta, n_phi) grid.

    kappa and cos(theta) lie on uniform grids including their endpoints; the
    azimuthal grid carries a random offset, drawn independently per
    (kappa, theta) pair unless cfg.shared_phi_offset is set. Each mode
    occupies the same k-space volume element.
    """
    seed = cfg.seed if seed is None else seed
    nk, nt, np_ = cfg.n_kappa, cfg.n_theta, cfg.n_phi
    if nk < 2:
        raise ParameterError("n_kappa must be >= 2")
    kappa_1d, _ = _kappa_grid(params, cfg.delta, nk, constants.c)
    vartheta_1d = -1.0 + 2.0 / (nt - 1) * np.arange(nt)
    dphi = 2 * np.pi / np_
    rng_off = substream(seed, STREAM_OFFSETS)
    if cfg.shared_phi_offset:
        offsets = np.full((nk, nt), rng_off.uniform(0.0, 2 * np.pi))
    else:
        offsets = rng_off.uniform(0.0, 2 * np.pi, (nk, nt))
    kappas = np.repeat(kappa_1d, nt * np_)
    vartheta = np.tile(np.repeat(vartheta_1d, np_), nk)
    phi = (offsets[:, :, None] + dphi * np.arange(np_)[None, None, :]).ravel() % (2 * np.pi)
    n_total = nk * nt * np_
    chi = substream(seed, STREAM_CHI).uniform(0.0, 2 * np.pi, n_total)
    return _assemble(params, cfg, kappas, vartheta, phi, chi, constants, n_total, seed)


def sample_modes(
    params: OscillatorParams,
    cfg: FieldConfig,
    constants: PhysicalConstants = CODATA,
    seed: int | None = None,
) -> ModeSet:
    """Dispatch on cfg.scheme."""
    if cfg.scheme == "single_angle":
        return sample_modes_single_angle(params, cfg, constants, seed)
    return sample_modes_spherical(params, cfg, constants, seed)


def field_x_dipole(modes: ModeSet, t):
    """x-component of the synthesized field at the oscillator site (V/m).

    Evaluates sum over (mode, polarization) of
    amplitude * cos(omega*t - phase) * eps_x; ``t`` may be a scalar or an
    array (an array of times is evaluated in time-chunks to bound memory).
    """
    coef, omega, theta = modes.flat_terms()
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        return float(np.dot(coef, np.cos(omega * float(t_arr) - theta)))
    out = np.empty(t_arr.shape, dtype=float)
    flat_t = t_arr.ravel()
    flat_out = out.ravel()
    chunk = max(1, 8_000_000 // max(omega.size, 1))
    for i in range(0, flat_t.size, chunk):
        sl = slice(i, min(i + chunk, flat_t.size))
        flat_out[sl] = np.cos(np.outer(flat_t[sl], omega) - theta) @ coef
    return out


def field_x_derivative(modes: ModeSet, t):
    """Analytic time derivative of ``field_x_dipole`` (V/(m s))."""
    coef, omega, theta = modes.flat_terms()
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim == 0:
        return float(np.dot(coef * omega, -np.sin(omega * float(t_arr) - theta)))
    out = np.empty(t_arr.shape, dtype=float)
    flat_t = t_arr.ravel()
    flat_out = out.ravel()
    chunk = max(1, 8_000_000 // max(omega.size, 1))
    for i in range(0, flat_t.size, chunk):
        sl = slice(i, min(i + chunk, flat_t.size))
        flat_out[sl] = -np.sin(np.outer(flat_t[sl], omega) - theta) @ (coef * omega)
    return out
