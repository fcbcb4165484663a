import numpy as np
import pytest

from redosc.params import CODATA, FieldConfig, OscillatorParams
from redosc.vacuum_field import ModeSet, make_polarization


@pytest.fixture(scope="session")
def paper_params() -> OscillatorParams:
    """Electron charge, mass 1e-4 m_e, omega0 = 1e16 rad/s."""
    return OscillatorParams(
        charge=CODATA.electron_charge,
        mass=1e-4 * CODATA.electron_mass,
        omega0=1e16,
    )


@pytest.fixture(scope="session")
def paper_delta(paper_params) -> float:
    return 220.0 * paper_params.resonance_width


def paper_field_config(delta: float, n_omega: int, seed: int, **kw) -> FieldConfig:
    return FieldConfig(delta=delta, n_omega=n_omega, seed=seed, **kw)


def toy_mode_set(
    omegas,
    directions=None,
    chi=None,
    phases=None,
    volume: float = 1.0e-6,
    omega0: float | None = None,
    seed: int = 0,
) -> ModeSet:
    """Hand-built mode set with chosen frequencies (invariants satisfied).

    The normalization volume is chosen freely and the shell volume set to
    match it; amplitudes follow the sqrt(hbar*omega/(eps0*V)) rule.
    """
    omegas = np.asarray(omegas, dtype=float)
    n = omegas.size
    rng = np.random.default_rng(seed)
    if directions is None:
        ct = rng.uniform(-1, 1, n)
        phi = rng.uniform(0, 2 * np.pi, n)
        theta = np.arccos(ct)
    else:
        theta, phi = (np.asarray(a, dtype=float) for a in directions)
    if chi is None:
        chi = rng.uniform(0, 2 * np.pi, n)
    if phases is None:
        phases = rng.uniform(0, 2 * np.pi, (n, 2))
    k = omegas / CODATA.c
    khat = np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=1
    )
    eps1, eps2 = make_polarization(theta, phi, chi)
    lo, hi = omegas.min(), omegas.max()
    if omega0 is None:
        omega0 = 0.5 * (lo + hi)
    delta = max(2 * (hi - omega0), 2 * (omega0 - lo), 1e-6 * omega0) * (1 + 1e-9)
    return ModeSet(
        k_vecs=k[:, None] * khat,
        omegas=omegas,
        eps1=eps1,
        eps2=eps2,
        phases=np.asarray(phases, dtype=float),
        amplitudes=np.sqrt(CODATA.hbar * omegas / (CODATA.epsilon0 * volume)),
        volume=volume,
        k_shell_volume=(2 * np.pi) ** 3 * n / volume,
        omega0=float(omega0),
        delta=float(delta),
        seed=seed,
    )
