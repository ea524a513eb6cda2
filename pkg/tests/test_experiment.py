"""Protocol tests: schedules, fitness functional, experiment runner."""

from __future__ import annotations

import numpy as np
import pytest

from trotbench.analysis import export_history
from trotbench.bo import BOConfig
from trotbench.experiment import (
    ExperimentConfig,
    OutOfRange,
    SupportSchedule,
    compute_fitness,
    final_phase_best,
    fitness_inverse_sum,
    run_experiment,
    schedule_height,
)
from trotbench.sim import TRACE_COLUMNS, RobotModel, TrialTrace

MODEL = RobotModel()


def synthetic_trace(
    tension: np.ndarray, dt: float = 0.01, duration: float | None = None,
    termination: str = "completed",
) -> TrialTrace:
    """Trace with a prescribed rope-tension series and neutral everything else."""
    tension = np.asarray(tension, dtype=float)
    n = tension.size
    table = np.zeros((n, len(TRACE_COLUMNS)))
    table[:, 0] = np.arange(n) * dt
    table[:, TRACE_COLUMNS.index("rope_N")] = tension
    if duration is None:
        duration = (n - 1) * dt
    return TrialTrace(dt=dt, duration=duration, termination=termination, table=table)


class TestScheduleHeight:
    def test_minimum_schedule_exact(self):
        for i in range(1, 51):
            assert schedule_height("minimum", i) == 0.39
        for i in range(51, 61):
            assert schedule_height("minimum", i) == 0.325

    def test_reducing_schedule_exact(self):
        expected = {
            range(1, 11): 0.475,
            range(11, 21): 0.45,
            range(21, 31): 0.42,
            range(31, 51): 0.39,
            range(51, 61): 0.325,
        }
        for span, height in expected.items():
            for i in span:
                assert schedule_height("reducing", i) == height

    def test_none_condition_disabled(self):
        assert all(schedule_height("none", i) is None for i in range(1, 61))

    def test_out_of_range_iterations(self):
        for i in (0, 61, -3):
            with pytest.raises(OutOfRange):
                schedule_height("minimum", i)

    def test_unknown_condition(self):
        with pytest.raises(ValueError):
            schedule_height("maximal", 1)

    def test_heights_non_increasing(self):
        for condition in ("minimum", "reducing"):
            heights = [schedule_height(condition, i) for i in range(1, 61)]
            assert all(b <= a for a, b in zip(heights, heights[1:]))

    def test_reducing_starts_higher_than_minimum(self):
        assert schedule_height("reducing", 1) > schedule_height("minimum", 1)


class TestComputeFitness:
    def test_zero_tension_is_full_self_support(self):
        trace = synthetic_trace(np.zeros(101))
        assert compute_fitness(trace, MODEL) == pytest.approx(1.0)

    def test_full_weight_on_rope_is_zero(self):
        trace = synthetic_trace(np.full(101, MODEL.weight))
        assert compute_fitness(trace, MODEL) == pytest.approx(0.0)

    def test_half_weight_is_half(self):
        trace = synthetic_trace(np.full(101, MODEL.weight / 2))
        assert compute_fitness(trace, MODEL) == pytest.approx(0.5)

    def test_bounded_under_excess_tension(self):
        trace = synthetic_trace(np.full(101, 3.0 * MODEL.weight))
        assert compute_fitness(trace, MODEL) == pytest.approx(0.0)

    def test_truncated_trials_padded_as_zero_self_support(self):
        # half the samples present, zero tension: padding halves the score
        trace = synthetic_trace(
            np.zeros(51), dt=0.01, duration=1.0, termination="fell"
        )
        assert trace.expected_samples == 101
        assert compute_fitness(trace, MODEL) == pytest.approx(51 / 101)

    def test_strictly_decreasing_in_constant_tension(self):
        levels = np.linspace(0.0, MODEL.weight, 9)
        scores = [
            compute_fitness(synthetic_trace(np.full(101, lv)), MODEL) for lv in levels
        ]
        assert all(b < a for a, b in zip(scores, scores[1:]))

    def test_always_in_unit_interval(self):
        rng = np.random.default_rng(51)
        for _ in range(50):
            tension = rng.uniform(0, 2 * MODEL.weight, size=200)
            fit = compute_fitness(synthetic_trace(tension), MODEL)
            assert 0.0 <= fit <= 1.0

    def test_empty_trace_rejected(self):
        trace = synthetic_trace(np.zeros(0), duration=1.0)
        with pytest.raises(ValueError):
            compute_fitness(trace, MODEL)


class TestInverseSumVariant:
    def test_decreasing_in_tension(self):
        low = fitness_inverse_sum(synthetic_trace(np.full(50, 1.0)))
        high = fitness_inverse_sum(synthetic_trace(np.full(50, 10.0)))
        assert low > high

    def test_finite_at_zero_tension(self):
        assert np.isfinite(fitness_inverse_sum(synthetic_trace(np.zeros(50))))


QUICK_BO = BOConfig(n_init=5, n_candidates=256, n_local=32)


def quick_config(condition: str, seed: int = 3, n_iter: int = 6) -> ExperimentConfig:
    return ExperimentConfig(
        schedule=SupportSchedule(condition),
        n_iter=n_iter,
        trial_duration=1.0,
        bo=QUICK_BO,
        seed=seed,
    )


class TestRunExperiment:
    def test_heights_echo_schedule(self):
        result = run_experiment(quick_config("reducing"))
        assert [r.support_height for r in result.history.records] == [
            schedule_height("reducing", i) for i in range(1, 7)
        ]

    def test_history_contiguous_and_traces_aligned(self):
        result = run_experiment(quick_config("minimum"))
        assert [r.iteration for r in result.history.records] == list(range(1, 7))
        assert len(result.traces) == 6
        for rec, trace in zip(result.history.records, result.traces):
            assert rec.fitness == pytest.approx(
                compute_fitness(trace, result.config.model)
            )

    def test_probe_reruns_best_of_first_fifty(self):
        result = run_experiment(quick_config("minimum"))
        probe = result.probe
        assert probe is not None
        assert probe.height == 0.325
        best = result.history.best_record(min(50, result.config.n_iter))
        assert probe.params == best.params
        assert probe.source_iteration == best.iteration
        assert 0.0 <= probe.fitness <= 1.0

    def test_no_probe_without_support(self):
        result = run_experiment(quick_config("none"))
        assert result.probe is None
        assert all(r.support_height is None for r in result.history.records)

    def test_deterministic_history_bytes(self, tmp_path):
        blobs = []
        for name in ("x.csv", "y.csv"):
            result = run_experiment(quick_config("reducing", seed=9))
            path = tmp_path / name
            export_history(result.history, path)
            blobs.append(path.read_bytes())
        assert blobs[0] == blobs[1]

    def test_final_phase_best(self):
        result = run_experiment(quick_config("minimum"))
        assert final_phase_best(result.history, last_n=3) == pytest.approx(
            float(np.max(result.history.fitness_values()[-3:]))
        )

    def test_best_trace_lookup(self):
        result = run_experiment(quick_config("minimum"))
        it, trace = result.best_trace()
        assert trace is result.traces[it - 1]


class TestExperimentConfigValidation:
    def test_n_iter_bounds(self):
        with pytest.raises(ValueError):
            quick_config("minimum", n_iter=0)
        with pytest.raises(ValueError):
            quick_config("minimum", n_iter=61)

    def test_n_iter_at_least_n_init(self):
        with pytest.raises(ValueError):
            ExperimentConfig(
                schedule=SupportSchedule("minimum"),
                n_iter=3,
                bo=BOConfig(n_init=5),
            )

    def test_unknown_condition(self):
        with pytest.raises(ValueError):
            SupportSchedule("slightly-less")
