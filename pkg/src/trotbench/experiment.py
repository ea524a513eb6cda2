"""Scaffolded-learning protocol: support schedules, fitness, experiment runner.

Three conditions drive the rope height over a 60-iteration optimization:

* ``minimum``  - 0.39 m for iterations 1-50, then 0.325 m for 51-60.
* ``reducing`` - 0.475 m (1-10), 0.45 (11-20), 0.42 (21-30), 0.39 (31-50),
  0.325 (51-60).
* ``none``     - rope disabled throughout.

Fitness is the fraction of body weight the robot carries itself: the mean of
clamp(1 - tension / weight, 0, 1) over the trial, with early-terminated
trials padded as zero self-support for the missing samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bo as bo_mod
from .bo import BOConfig, Bounds, OptimizationHistory, ParamVector, run_bo_loop
from .controller import ControllerConfig
from .sim import ContactParams, RobotModel, SupportConfig, TrialTrace, run_trial

CONDITIONS = ("minimum", "reducing", "none")
N_SCHEDULE_ITERATIONS = 60

_MINIMUM_PHASES = ((1, 50, 0.39), (51, 60, 0.325))
_REDUCING_PHASES = (
    (1, 10, 0.475),
    (11, 20, 0.45),
    (21, 30, 0.42),
    (31, 50, 0.39),
    (51, 60, 0.325),
)


class OutOfRange(Exception):
    """Iteration outside the schedule's 1..60 domain."""


def schedule_height(condition: str, iteration: int) -> Optional[float]:
    """Rope height in meters for the given iteration; None when disabled."""
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if not (1 <= iteration <= N_SCHEDULE_ITERATIONS):
        raise OutOfRange(f"iteration {iteration} outside 1..{N_SCHEDULE_ITERATIONS}")
    if condition == "none":
        return None
    phases = _MINIMUM_PHASES if condition == "minimum" else _REDUCING_PHASES
    for lo, hi, height in phases:
        if lo <= iteration <= hi:
            return height
    raise AssertionError("schedule phases must cover 1..60")


@dataclass(frozen=True)
class SupportSchedule:
    condition: str

    def __post_init__(self) -> None:
        if self.condition not in CONDITIONS:
            raise ValueError(f"unknown condition {self.condition!r}")

    def height_at(self, iteration: int) -> Optional[float]:
        return schedule_height(self.condition, iteration)

    @property
    def enabled(self) -> bool:
        return self.condition != "none"


@dataclass(frozen=True)
class ExperimentConfig:
    schedule: SupportSchedule
    n_iter: int = N_SCHEDULE_ITERATIONS
    trial_duration: float = 15.0
    dt: float = 1e-3
    control_dt: float = 1e-2
    bo: BOConfig = field(default_factory=BOConfig)
    seed: int = 0
    model: RobotModel = field(default_factory=RobotModel)
    contact: ContactParams = field(default_factory=ContactParams)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    rope_stiffness: float = 2000.0
    rope_damping: float = 50.0
    servo_tau: float = 0.03
    imu_noise: bool = False

    def __post_init__(self) -> None:
        if not (1 <= self.n_iter <= N_SCHEDULE_ITERATIONS):
            raise ValueError(f"n_iter must be in 1..{N_SCHEDULE_ITERATIONS}")
        if self.n_iter < self.bo.n_init:
            raise ValueError("n_iter must be at least the initial design size")

    def support_for(self, iteration: int) -> SupportConfig:
        height = self.schedule.height_at(iteration)
        if height is None:
            return SupportConfig.disabled()
        return SupportConfig(
            height=height,
            stiffness=self.rope_stiffness,
            damping=self.rope_damping,
            enabled=True,
        )


def compute_fitness(trace: TrialTrace, model: RobotModel) -> float:
    """Mean self-supported weight fraction, padded with zeros when truncated."""
    if trace.n_samples == 0:
        raise ValueError("trace has no samples")
    frac = 1.0 - trace.rope_tension / model.weight
    np.clip(frac, 0.0, 1.0, out=frac)
    return float(np.sum(frac) / trace.expected_samples)


def fitness_inverse_sum(
    trace: TrialTrace, floor_newtons: float = 0.1, scale: float = 1.0
) -> float:
    """Alternative metric: summed inverse rope force (floored to stay finite).

    Unbounded and unit-bearing, so it is not used as the optimization target;
    provided for post-hoc comparison only.
    """
    tension = np.maximum(trace.rope_tension, floor_newtons)
    return float(scale * np.sum(1.0 / tension))


@dataclass(frozen=True)
class ProbeResult:
    """Re-evaluation of the best pre-drop parameters at the lowest height."""

    params: ParamVector
    source_iteration: int
    height: float
    fitness: float
    trace: TrialTrace


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    history: OptimizationHistory
    traces: list[TrialTrace]
    probe: Optional[ProbeResult]

    def best_trace(self) -> tuple[int, TrialTrace]:
        record = self.history.best_record()
        return record.iteration, self.traces[record.iteration - 1]


PROBE_HEIGHT = 0.325
PROBE_THROUGH_ITERATION = 50


def _trial_seed(seed: int, iteration: int) -> int:
    return int(
        np.random.SeedSequence((seed, 31, iteration)).generate_state(1, dtype=np.uint32)[0]
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """One full optimization under the configured schedule, plus the probe.

    The surrogate persists across support-height changes (a single continuous
    optimization). For scheduled conditions the best parameters of the first
    50 iterations are afterwards re-run at 0.325 m and stored separately.
    """
    traces: list[TrialTrace] = []

    def objective(p: ParamVector, iteration: int) -> float:
        trace = run_trial(
            p,
            cfg.support_for(iteration),
            duration=cfg.trial_duration,
            dt=cfg.dt,
            seed=_trial_seed(cfg.seed, iteration),
            model=cfg.model,
            contact=cfg.contact,
            controller_cfg=cfg.controller,
            control_dt=cfg.control_dt,
            servo_tau=cfg.servo_tau,
            imu_noise=cfg.imu_noise,
        )
        traces.append(trace)
        return compute_fitness(trace, cfg.model)

    try:
        history = run_bo_loop(
            objective,
            n_iter=cfg.n_iter,
            config=cfg.bo,
            seed=cfg.seed,
            bounds=Bounds(),
            height_fn=cfg.schedule.height_at,
        )
    except bo_mod.ObjectiveError as exc:
        exc.partial_traces = traces  # persisted by the CLI on failure
        raise

    probe = None
    if cfg.schedule.enabled:
        best = history.best_record(min(PROBE_THROUGH_ITERATION, cfg.n_iter))
        probe_support = SupportConfig(
            height=PROBE_HEIGHT,
            stiffness=cfg.rope_stiffness,
            damping=cfg.rope_damping,
            enabled=True,
        )
        probe_trace = run_trial(
            best.params,
            probe_support,
            duration=cfg.trial_duration,
            dt=cfg.dt,
            seed=_trial_seed(cfg.seed, 10_001),
            model=cfg.model,
            contact=cfg.contact,
            controller_cfg=cfg.controller,
            control_dt=cfg.control_dt,
            servo_tau=cfg.servo_tau,
            imu_noise=cfg.imu_noise,
        )
        probe = ProbeResult(
            params=best.params,
            source_iteration=best.iteration,
            height=PROBE_HEIGHT,
            fitness=compute_fitness(probe_trace, cfg.model),
            trace=probe_trace,
        )
    return ExperimentResult(config=cfg, history=history, traces=traces, probe=probe)


def final_phase_best(history: OptimizationHistory, last_n: int = 10) -> float:
    """Best fitness over the closing iterations (the lowest-support phase)."""
    values = history.fitness_values()
    if len(values) == 0:
        raise ValueError("history is empty")
    return float(np.max(values[-last_n:]))
