"""Optimizer loop tests: design, acquisition, proposals, full loop."""

from __future__ import annotations

import numpy as np
import pytest

from trotbench import bo, gp
from trotbench.bo import (
    BOConfig,
    Bounds,
    ObjectiveError,
    ParamVector,
    candidate_set,
    initial_design,
    propose_next,
    random_search,
    run_bo_loop,
    ucb_score,
)
from trotbench.analysis import export_history
from trotbench.gp import Dataset, KernelParams


def _quad(p: ParamVector, _i: int) -> float:
    return -((p.x0 - 90.0) ** 2)


class TestParamVector:
    def test_bounds_enforced(self):
        ParamVector(60.0, -1.0, 1.0, 0.0, 0.5)
        with pytest.raises(ValueError):
            ParamVector(59.9, 0.0, 0.0, 0.0, 0.0)
        with pytest.raises(ValueError):
            ParamVector(90.0, 0.0, 1.0001, 0.0, 0.0)

    def test_array_round_trip(self):
        p = ParamVector(75.0, -0.25, 0.5, 0.1, -0.9)
        assert ParamVector.from_array(p.to_array()) == p


class TestBounds:
    def test_defaults_match_search_box(self):
        b = Bounds()
        assert b.lower.tolist() == [60.0, -1.0, -1.0, -1.0, -1.0]
        assert b.upper.tolist() == [120.0, 1.0, 1.0, 1.0, 1.0]

    def test_normalize_denormalize_inverse(self):
        b = Bounds()
        rng = np.random.default_rng(0)
        raw = b.denormalize(rng.uniform(size=5))
        assert np.allclose(b.denormalize(b.normalize(raw)), raw)

    def test_invalid_ordering_rejected(self):
        with pytest.raises(ValueError):
            Bounds(lower=np.ones(5), upper=np.zeros(5))


class TestInitialDesign:
    def test_points_inside_box(self):
        for p in initial_design(5, Bounds(), seed=0):
            assert Bounds().contains(p.to_array())

    def test_deterministic_for_seed(self):
        a = initial_design(7, Bounds(), seed=123)
        b = initial_design(7, Bounds(), seed=123)
        assert a == b
        assert a != initial_design(7, Bounds(), seed=124)

    def test_coverage_of_each_dimension(self):
        bounds = Bounds()
        pts = np.array([p.to_array() for p in initial_design(100, bounds, seed=5)])
        lo_frac = (pts.min(axis=0) - bounds.lower) / bounds.span
        hi_frac = (bounds.upper - pts.max(axis=0)) / bounds.span
        assert np.all(lo_frac < 0.10)
        assert np.all(hi_frac < 0.10)

    def test_n_at_least_one(self):
        with pytest.raises(ValueError):
            initial_design(0, Bounds(), seed=0)


class TestUcbScore:
    def test_zero_kappa_is_pure_mean(self):
        assert ucb_score(0.37, 9.0, 0.0) == 0.37

    def test_arithmetic(self):
        assert ucb_score(1.0, 4.0, 2.0) == pytest.approx(5.0)

    def test_strictly_increasing_in_kappa(self):
        scores = [ucb_score(0.2, 0.5, k) for k in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(b > a for a, b in zip(scores, scores[1:]))


class TestProposeNext:
    @staticmethod
    def _model(rng, n=8):
        data = Dataset.from_observations(rng.uniform(size=(n, 5)), rng.normal(size=n))
        return gp.fit(data, KernelParams())

    def test_zero_kappa_matches_brute_force_mean_argmax(self):
        rng = np.random.default_rng(21)
        model = self._model(rng)
        bounds = Bounds()
        cands = candidate_set(model, bounds, seed=42)
        mean, _ = gp.posterior_predict_batch(model, cands)
        expected = bounds.denormalize(cands[int(np.argmax(mean))])
        got = propose_next(model, bounds, kappa=0.0, seed=42)
        assert np.allclose(got.to_array(), expected)

    def test_huge_kappa_matches_brute_force_variance_argmax(self):
        rng = np.random.default_rng(22)
        model = self._model(rng)
        bounds = Bounds()
        cands = candidate_set(model, bounds, seed=7)
        mean, var = gp.posterior_predict_batch(model, cands)
        scores = mean + 1e6 * np.sqrt(var)
        expected = bounds.denormalize(cands[int(np.argmax(scores))])
        got = propose_next(model, bounds, kappa=1e6, seed=7)
        assert np.allclose(got.to_array(), expected)

    def test_empty_model_falls_back_to_point_in_bounds(self):
        model = gp.fit(Dataset.empty(), KernelParams())
        p = propose_next(model, Bounds(), kappa=2.0, seed=3)
        assert Bounds().contains(p.to_array())


class TestRunBoLoop:
    def test_first_records_come_from_initial_design(self):
        cfg = BOConfig(n_init=5)
        history = run_bo_loop(_quad, n_iter=5, config=cfg, seed=11)
        assert len(history) == 5
        design = initial_design(5, Bounds(), seed=11)
        assert [r.params for r in history.records] == design

    def test_iterations_contiguous_and_in_bounds(self):
        history = run_bo_loop(_quad, n_iter=12, seed=2)
        assert [r.iteration for r in history.records] == list(range(1, 13))
        for r in history.records:
            assert Bounds().contains(r.params.to_array())

    def test_best_so_far_non_decreasing(self):
        history = run_bo_loop(_quad, n_iter=15, seed=4)
        best = history.best_so_far()
        assert np.all(np.diff(best) >= 0.0)

    def test_deterministic_history_export(self, tmp_path):
        paths = []
        for name in ("a.csv", "b.csv"):
            history = run_bo_loop(_quad, n_iter=10, seed=9)
            path = tmp_path / name
            export_history(history, path)
            paths.append(path.read_bytes())
        assert paths[0] == paths[1]

    def test_quadratic_benchmark_convergence(self):
        # global optimum x0 = 90; verified-by-running expectation
        hits = 0
        for seed in range(10):
            history = run_bo_loop(_quad, n_iter=30, seed=seed)
            if abs(history.best_record().params.x0 - 90.0) <= 5.0:
                hits += 1
        assert hits >= 8

    def test_n_iter_below_n_init_rejected(self):
        with pytest.raises(ValueError):
            run_bo_loop(_quad, n_iter=3, config=BOConfig(n_init=5), seed=0)

    def test_objective_error_carries_iteration_and_partial_history(self):
        def exploding(p: ParamVector, i: int) -> float:
            if i == 4:
                raise RuntimeError("trial hardware on fire")
            return 0.0

        with pytest.raises(ObjectiveError) as excinfo:
            run_bo_loop(exploding, n_iter=10, seed=0)
        assert excinfo.value.iteration == 4
        assert len(excinfo.value.history) == 3

    def test_height_fn_recorded(self):
        history = run_bo_loop(_quad, n_iter=5, seed=0, height_fn=lambda i: 0.1 * i)
        assert [r.support_height for r in history.records] == [
            pytest.approx(0.1 * i) for i in range(1, 6)
        ]


class TestRandomSearch:
    def test_deterministic_and_in_bounds(self):
        a = random_search(_quad, n_iter=8, seed=5)
        b = random_search(_quad, n_iter=8, seed=5)
        assert [r.params for r in a.records] == [r.params for r in b.records]
        for r in a.records:
            assert Bounds().contains(r.params.to_array())


class TestHistoryInvariants:
    def test_append_requires_contiguous_iterations(self):
        history = bo.OptimizationHistory()
        p = ParamVector(90.0, 0.0, 0.0, 0.0, 0.0)
        history.append(bo.HistoryRecord(1, p, None, 0.5, 0.0))
        with pytest.raises(ValueError):
            history.append(bo.HistoryRecord(3, p, None, 0.5, 0.0))

    def test_best_record_prefix(self):
        history = run_bo_loop(_quad, n_iter=10, seed=1)
        best5 = history.best_record(through_iteration=5)
        assert best5.iteration <= 5
        fitness5 = history.fitness_values()[:5]
        assert best5.fitness == pytest.approx(np.max(fitness5))
