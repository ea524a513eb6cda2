"""Sequential Bayesian optimization of the five-parameter gait controller.

The search box follows the controller encoding: x0 is the hopping height in
millimeters, x1..x4 are the pitch/roll position and rate gains. Acquisition
is upper confidence bound (mean + kappa * std), maximized over a deterministic
candidate set: a seeded Halton cloud covering the box plus Gaussian
perturbations around the incumbent best. Everything is reproducible from a
single integer seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import qmc

from . import gp
from .gp import Dataset, GPModel, KernelParams

X0_RANGE = (60.0, 120.0)
GAIN_RANGE = (-1.0, 1.0)


@dataclass(frozen=True)
class ParamVector:
    """One controller setting: hop height (mm) and the four attitude gains."""

    x0: float
    x1: float
    x2: float
    x3: float
    x4: float

    def __post_init__(self) -> None:
        if not (X0_RANGE[0] <= self.x0 <= X0_RANGE[1]):
            raise ValueError(f"x0={self.x0} outside {X0_RANGE}")
        for name in ("x1", "x2", "x3", "x4"):
            v = getattr(self, name)
            if not (GAIN_RANGE[0] <= v <= GAIN_RANGE[1]):
                raise ValueError(f"{name}={v} outside {GAIN_RANGE}")

    def to_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2, self.x3, self.x4])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "ParamVector":
        return cls(*(float(v) for v in arr))


@dataclass(frozen=True)
class Bounds:
    """Componentwise search box in raw parameter units."""

    lower: np.ndarray = field(
        default_factory=lambda: np.array([X0_RANGE[0], -1.0, -1.0, -1.0, -1.0])
    )
    upper: np.ndarray = field(
        default_factory=lambda: np.array([X0_RANGE[1], 1.0, 1.0, 1.0, 1.0])
    )

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.shape != upper.shape:
            raise ValueError("lower and upper must have the same shape")
        if not np.all(lower < upper):
            raise ValueError("bounds must satisfy lower < upper componentwise")

    @property
    def dim(self) -> int:
        return int(self.lower.shape[0])

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - self.lower) / self.span

    def denormalize(self, unit: np.ndarray) -> np.ndarray:
        return self.lower + np.asarray(unit, dtype=float) * self.span

    def contains(self, raw: np.ndarray, tol: float = 0.0) -> bool:
        raw = np.asarray(raw, dtype=float)
        return bool(np.all(raw >= self.lower - tol) and np.all(raw <= self.upper + tol))


@dataclass(frozen=True)
class HistoryRecord:
    iteration: int  # 1-based
    params: ParamVector
    support_height: Optional[float]  # meters; None when the rope is disabled
    fitness: float
    wall_time_s: float


@dataclass
class OptimizationHistory:
    """Per-iteration evaluation log; indices are contiguous from 1."""

    records: list[HistoryRecord] = field(default_factory=list)

    def append(self, record: HistoryRecord) -> None:
        expected = len(self.records) + 1
        if record.iteration != expected:
            raise ValueError(f"iteration {record.iteration}, expected {expected}")
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def fitness_values(self) -> np.ndarray:
        return np.array([r.fitness for r in self.records])

    def best_so_far(self) -> np.ndarray:
        return np.maximum.accumulate(self.fitness_values())

    def best_record(self, through_iteration: Optional[int] = None) -> HistoryRecord:
        pool = self.records
        if through_iteration is not None:
            pool = pool[:through_iteration]
        if not pool:
            raise ValueError("history is empty")
        return max(pool, key=lambda r: (r.fitness, -r.iteration))


@dataclass(frozen=True)
class BOConfig:
    """Loop settings: initial design size, acquisition, candidate budget."""

    n_init: int = 5
    kappa: float = 2.0
    n_candidates: int = 2048
    n_local: int = 256
    local_sigma_frac: float = 0.05
    kernel: KernelParams = field(default_factory=KernelParams)
    refit_hyperparams: bool = False

    def __post_init__(self) -> None:
        if self.n_init < 1:
            raise ValueError("n_init must be at least 1")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")


class ObjectiveError(Exception):
    """An objective evaluation failed; carries the partial history."""

    def __init__(self, iteration: int, history: OptimizationHistory, cause: Exception):
        super().__init__(f"objective failed at iteration {iteration}: {cause}")
        self.iteration = iteration
        self.history = history
        self.__cause__ = cause


def initial_design(n: int, bounds: Bounds, seed: int) -> list[ParamVector]:
    """n low-discrepancy (Halton) points inside the box, seeded."""
    if n < 1:
        raise ValueError("n must be at least 1")
    sampler = qmc.Halton(d=bounds.dim, scramble=True, seed=seed)
    unit = sampler.random(n)
    return [ParamVector.from_array(bounds.denormalize(u)) for u in unit]


def ucb_score(mean, variance, kappa: float):
    """Upper confidence bound: mean + kappa * sqrt(variance)."""
    return mean + kappa * np.sqrt(variance)


def candidate_set(
    model: GPModel, bounds: Bounds, seed: int, config: BOConfig | None = None
) -> np.ndarray:
    """Deterministic normalized candidate stack for one acquisition round.

    Halton points cover the box; when the model has data, Gaussian
    perturbations of the incumbent best (sigma = local_sigma_frac of the unit
    range, clipped to the cube) are appended for local refinement.
    """
    config = config or BOConfig()
    halton = qmc.Halton(d=bounds.dim, scramble=True, seed=seed)
    cands = halton.random(config.n_candidates)
    if model.n > 0 and config.n_local > 0:
        incumbent = model.data.inputs[int(np.argmax(model.data.targets))]
        rng = np.random.default_rng(np.random.SeedSequence((seed, 1)))
        local = incumbent + rng.normal(
            scale=config.local_sigma_frac, size=(config.n_local, bounds.dim)
        )
        np.clip(local, 0.0, 1.0, out=local)
        cands = np.vstack([cands, local])
    return cands


def propose_next(
    model: GPModel,
    bounds: Bounds,
    kappa: float,
    seed: int,
    config: BOConfig | None = None,
) -> ParamVector:
    """Argmax of the UCB score over the candidate set (ties: lowest index)."""
    config = config or BOConfig()
    cands = candidate_set(model, bounds, seed, config)
    if model.n == 0:
        return ParamVector.from_array(bounds.denormalize(cands[0]))
    mean, var = gp.posterior_predict_batch(model, cands)
    scores = ucb_score(mean, var, kappa)
    best = int(np.argmax(scores))  # first occurrence wins ties
    return ParamVector.from_array(bounds.denormalize(cands[best]))


def run_bo_loop(
    objective: Callable[[ParamVector, int], float],
    n_iter: int,
    config: BOConfig | None = None,
    seed: int = 0,
    bounds: Bounds | None = None,
    height_fn: Callable[[int], Optional[float]] | None = None,
) -> OptimizationHistory:
    """Run the evaluate-update loop for n_iter iterations.

    The first n_init evaluations come from the initial design; afterwards the
    surrogate is refit on all observations and the UCB argmax is evaluated.
    height_fn, when given, annotates each record with the scaffold height for
    that iteration (recording only; the objective itself decides what to do
    with the iteration index).
    """
    config = config or BOConfig()
    bounds = bounds or Bounds()
    if n_iter < config.n_init:
        raise ValueError("n_iter must be at least n_init")

    design = initial_design(config.n_init, bounds, seed)
    history = OptimizationHistory()
    inputs: list[np.ndarray] = []
    targets: list[float] = []
    kernel = config.kernel

    for i in range(1, n_iter + 1):
        t0 = time.perf_counter()
        if i <= config.n_init:
            params = design[i - 1]
        else:
            data = Dataset.from_observations(np.array(inputs), np.array(targets))
            if config.refit_hyperparams:
                kernel = gp.select_hyperparameters(data)
            model = gp.fit(data, kernel)
            iter_seed = int(
                np.random.SeedSequence((seed, i)).generate_state(1, dtype=np.uint32)[0]
            )
            params = propose_next(model, bounds, config.kappa, iter_seed, config)
        try:
            fitness = float(objective(params, i))
        except Exception as exc:  # noqa: BLE001 - surfaced with iteration context
            raise ObjectiveError(i, history, exc) from exc
        inputs.append(bounds.normalize(params.to_array()))
        targets.append(fitness)
        history.append(
            HistoryRecord(
                iteration=i,
                params=params,
                support_height=height_fn(i) if height_fn is not None else None,
                fitness=fitness,
                wall_time_s=time.perf_counter() - t0,
            )
        )
    return history


def random_search(
    objective: Callable[[ParamVector, int], float],
    n_iter: int,
    seed: int = 0,
    bounds: Bounds | None = None,
) -> OptimizationHistory:
    """Uniform-random baseline with the same record format as the BO loop."""
    bounds = bounds or Bounds()
    rng = np.random.default_rng(seed)
    history = OptimizationHistory()
    for i in range(1, n_iter + 1):
        t0 = time.perf_counter()
        params = ParamVector.from_array(
            bounds.denormalize(rng.uniform(size=bounds.dim))
        )
        fitness = float(objective(params, i))
        history.append(
            HistoryRecord(i, params, None, fitness, time.perf_counter() - t0)
        )
    return history
