"""Flat ``key = value`` configuration files for experiment runs.

Lines are ``key = value`` with ``#`` comments; booleans are true/false.
Every key has a default, so a config file only lists what it changes. Keys
are grouped by the object they land in (optimizer, controller, physics); see
the README for the full table.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from .bo import BOConfig
from .controller import ControllerConfig, LegGeometry
from .experiment import ExperimentConfig, SupportSchedule
from .gp import KernelParams, N_DIMS
from .sim import ContactParams, RobotModel, _box_inertia

_BOOL = {"true": True, "false": False, "yes": True, "no": False, "1": True, "0": False}

DEFAULTS: dict[str, Any] = {
    # experiment
    "condition": "minimum",
    "iters": 60,
    "seed": 0,
    "trial_duration_s": 15.0,
    "physics_dt_s": 1e-3,
    "control_dt_s": 1e-2,
    # optimizer
    "n_init": 5,
    "kappa": 2.0,
    "n_candidates": 2048,
    "n_local": 256,
    "local_sigma_frac": 0.05,
    "refit_hyperparams": False,
    "gp_length_scale": 0.3,
    "gp_signal_variance": 1.0,
    "gp_noise_variance": 1e-4,
    # controller
    "gait_period_s": 0.6,
    "duty_factor": 0.6,
    "stand_height_m": 0.32,
    "correction_clamp_rad": 0.5,
    # geometry / body
    "thigh_length_m": 0.21,
    "shank_length_m": 0.21,
    "mass_kg": 2.1,
    "gravity": 9.81,
    # rope and ground
    "rope_stiffness": 2000.0,
    "rope_damping": 50.0,
    "contact_stiffness": 1e4,
    "contact_damping": 100.0,
    "friction_mu": 0.8,
    "friction_viscous": 200.0,
    "servo_time_constant_s": 0.03,
    # sensors
    "imu_noise": False,
}


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse overrides; raises on unknown keys or malformed lines."""
    overrides: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in DEFAULTS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        overrides[key] = _coerce(key, value, lineno)
    return overrides


def _coerce(key: str, value: str, lineno: int) -> Any:
    default = DEFAULTS[key]
    if isinstance(default, bool):
        try:
            return _BOOL[value.lower()]
        except KeyError:
            raise ValueError(f"line {lineno}: {key} expects true/false") from None
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


def load_config(path: str | Path) -> dict[str, Any]:
    return parse_config_text(Path(path).read_text())


def build_experiment_config(overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Assemble an ExperimentConfig from defaults plus overrides."""
    cfg = dict(DEFAULTS)
    if overrides:
        unknown = set(overrides) - set(DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(overrides)

    geometry = LegGeometry(
        thigh_length=cfg["thigh_length_m"], shank_length=cfg["shank_length_m"]
    )
    model = RobotModel(
        mass=cfg["mass_kg"],
        inertia=_box_inertia(cfg["mass_kg"], 0.485, 0.42, 0.10),
        gravity=cfg["gravity"],
        geometry=geometry,
    )
    bo = BOConfig(
        n_init=cfg["n_init"],
        kappa=cfg["kappa"],
        n_candidates=cfg["n_candidates"],
        n_local=cfg["n_local"],
        local_sigma_frac=cfg["local_sigma_frac"],
        kernel=KernelParams(
            signal_variance=cfg["gp_signal_variance"],
            length_scales=(cfg["gp_length_scale"],) * N_DIMS,
            noise_variance=cfg["gp_noise_variance"],
        ),
        refit_hyperparams=cfg["refit_hyperparams"],
    )
    controller = ControllerConfig(
        gait_period=cfg["gait_period_s"],
        duty_factor=cfg["duty_factor"],
        nominal_stand_height=cfg["stand_height_m"],
        correction_clamp=cfg["correction_clamp_rad"],
    )
    contact = ContactParams(
        stiffness=cfg["contact_stiffness"],
        damping=cfg["contact_damping"],
        mu=cfg["friction_mu"],
        viscous=cfg["friction_viscous"],
    )
    condition = {"min": "minimum", "red": "reducing"}.get(cfg["condition"], cfg["condition"])
    return ExperimentConfig(
        schedule=SupportSchedule(condition),
        n_iter=cfg["iters"],
        trial_duration=cfg["trial_duration_s"],
        dt=cfg["physics_dt_s"],
        control_dt=cfg["control_dt_s"],
        bo=bo,
        seed=cfg["seed"],
        model=model,
        contact=contact,
        controller=controller,
        rope_stiffness=cfg["rope_stiffness"],
        rope_damping=cfg["rope_damping"],
        servo_tau=cfg["servo_time_constant_s"],
        imu_noise=cfg["imu_noise"],
    )
