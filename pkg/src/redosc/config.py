"""Flat key = value run configuration with a strict, documented schema.

Unknown keys are rejected with their line number; every run writes back an
``effective config`` echo containing the full resolved key set, which
re-parses to the identical configuration (that echo is the reproducibility
record of a run).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import IntegratorConfig
from .errors import ParameterError
from .params import FieldConfig, OscillatorParams, CODATA

#: key -> (type, default). Types: float, int, bool, str, int_list.
SCHEMA = {
    "experiment": ("str", "sequential"),
    "charge_e": ("float", 1.0),             # charge in units of the elementary charge
    "mass_me_multiple": ("float", 1e-4),    # mass in units of the electron mass
    "omega0": ("float", 1e16),              # rad/s
    "delta_over_resonance_width": ("float", 220.0),
    "n_omega": ("int", 2000),
    "scheme": ("str", "single_angle"),
    "n_kappa": ("int", 0),
    "n_theta": ("int", 0),
    "n_phi": ("int", 0),
    "shared_phi_offset": ("bool", False),
    "seed": ("int", 12345),
    "n_particles": ("int", 2000),
    "n_omega_list": ("int_list", (50, 100, 200, 500)),
    "steps_per_period": ("float", 20.0),
    "rel_tol": ("float", 3e-6),
    "abs_tol_x": ("float", 0.0),
    "abs_tol_v": ("float", 0.0),
    "record_stride": ("int", 1),
    "transient_multiples": ("float", 5.0),
    "coherence_multiples": ("float", 10.0),
    "workers": ("int", 1),
    "out_dir": ("str", ""),
    "damping": ("bool", True),
    "sigma_tolerance": ("float", 0.05),
    "energy_tolerance": ("float", 0.04),
    "ks_alpha": ("float", 0.01),
}

EXPERIMENTS = ("sequential", "ensemble", "sweep", "damping_off")


def _coerce(key: str, raw: str, where: str):
    kind, _ = SCHEMA[key]
    raw = raw.strip()
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int_list":
            return tuple(int(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ParameterError(f"{where}: key {key!r}: {exc}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def read_config_file(path) -> dict:
    """Parse a flat config file into raw key -> typed value (strict keys)."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA:
            raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ParameterError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw, f"{path}:{lineno}")
    return values


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one experiment."""

    params: OscillatorParams
    field: FieldConfig
    integrator: IntegratorConfig
    experiment: str
    n_particles: int
    n_omega_list: tuple
    workers: int
    out_dir: str
    damping: bool
    record_stride: int
    transient_multiples: float
    coherence_multiples: float
    sigma_tolerance: float
    energy_tolerance: float
    ks_alpha: float
    effective: dict = field(repr=False)

    def echo_text(self) -> str:
        lines = ["# effective configuration (re-parsable)"]
        for key in sorted(self.effective):
            lines.append(f"{key} = {_format_value(self.effective[key])}")
        return "\n".join(lines) + "\n"


def build_run_config(values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve defaults + file values + overrides into a validated RunConfig."""
    effective = {key: default for key, (_, default) in SCHEMA.items()}
    for source in (values or {}), (overrides or {}):
        for key, value in source.items():
            if key not in SCHEMA:
                raise ParameterError(f"unknown configuration key {key!r}")
            if isinstance(value, str) and SCHEMA[key][0] != "str":
                value = _coerce(key, value, "override")
            effective[key] = value

    if effective["experiment"] not in EXPERIMENTS:
        raise ParameterError(
            f"key 'experiment': {effective['experiment']!r} not one of {EXPERIMENTS}"
        )
    if effective["mass_me_multiple"] <= 0:
        raise ParameterError("key 'mass_me_multiple': mass must be positive")
    if effective["omega0"] <= 0:
        raise ParameterError("key 'omega0': must be positive")
    if effective["delta_over_resonance_width"] <= 0:
        raise ParameterError("key 'delta_over_resonance_width': must be positive")
    if effective["n_particles"] < 1:
        raise ParameterError("key 'n_particles': must be >= 1")
    if effective["workers"] < 1:
        raise ParameterError("key 'workers': must be >= 1")
    n_list = effective["n_omega_list"]
    if not n_list or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ParameterError("key 'n_omega_list': must be non-empty and strictly increasing")
    if effective["record_stride"] < 1:
        raise ParameterError("key 'record_stride': must be >= 1")

    params = OscillatorParams(
        charge=effective["charge_e"] * CODATA.electron_charge,
        mass=effective["mass_me_multiple"] * CODATA.electron_mass,
        omega0=effective["omega0"],
    )
    try:
        field_cfg = FieldConfig(
            delta=effective["delta_over_resonance_width"] * params.resonance_width,
            n_omega=effective["n_omega"],
            seed=effective["seed"],
            scheme=effective["scheme"],
            n_kappa=effective["n_kappa"],
            n_theta=effective["n_theta"],
            n_phi=effective["n_phi"],
            shared_phi_offset=effective["shared_phi_offset"],
        )
    except ParameterError as exc:
        raise ParameterError(f"field configuration: {exc}") from None
    integrator = IntegratorConfig.for_oscillator(
        params,
        steps_per_period=effective["steps_per_period"],
        rel_tol=effective["rel_tol"],
        abs_tol_x=effective["abs_tol_x"],
        abs_tol_v=effective["abs_tol_v"],
    )
    return RunConfig(
        params=params,
        field=field_cfg,
        integrator=integrator,
        experiment=effective["experiment"],
        n_particles=effective["n_particles"],
        n_omega_list=tuple(n_list),
        workers=effective["workers"],
        out_dir=effective["out_dir"],
        damping=effective["damping"],
        record_stride=effective["record_stride"],
        transient_multiples=effective["transient_multiples"],
        coherence_multiples=effective["coherence_multiples"],
        sigma_tolerance=effective["sigma_tolerance"],
        energy_tolerance=effective["energy_tolerance"],
        ks_alpha=effective["ks_alpha"],
        effective=dict(effective),
    )


def parse_config(path, overrides: dict | None = None) -> RunConfig:
    """Load, validate, and resolve a config file (CLI overrides win)."""
    return build_run_config(read_config_file(path), overrides)
