"""Tests for the synthetic settings and the benchmark drivers."""

import math

import numpy as np
import pytest

from disjunct_bvs.config import PriorConfig, PriorMode, SamplerSettings
from disjunct_bvs.exceptions import InvalidArgumentError
from disjunct_bvs.models import BayesFactorRecord, SelectionRecord
from disjunct_bvs.parallel import derive_seed, map_jobs
from disjunct_bvs.synthetic import (
    LOW_DIM_BETA,
    Regime,
    SyntheticSpec,
    aggregate_bayes_factors,
    aggregate_selection,
    ar1_design,
    bf_growth_experiment,
    f1_score,
    generate,
    perturbed_positions,
    selection_benchmark,
)


class TestSyntheticSpec:
    """Regimes and their constants."""

    def test_low_dimensional(self):
        spec = SyntheticSpec("low", n=100)
        assert (spec.regime, spec.d, spec.rho, spec.noise_sd) == (Regime.LOW, 8, 0.5, 3.0)

    def test_high_dimensional(self):
        spec = SyntheticSpec(Regime.HIGH, n=100)
        assert (spec.d, spec.rho) == (1000, 0.6)
        assert spec.noise_sd == pytest.approx(math.sqrt(3.0))

    @pytest.mark.parametrize("kwargs", [{"n": 0}, {"n": 10, "eta": -0.1}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            SyntheticSpec("low", **kwargs)

    def test_perturbed_positions(self):
        np.testing.assert_array_equal(
            perturbed_positions(SyntheticSpec("low", 10)), [2, 3, 5, 6, 7]
        )
        np.testing.assert_array_equal(perturbed_positions(SyntheticSpec("high", 10)), range(3, 13))


class TestGenerate:
    """Designs and coefficient vectors."""

    def test_ar1_covariance(self):
        X = ar1_design(200_000, 3, 0.5, np.random.default_rng(0))
        cov = np.cov(X, rowvar=False)
        np.testing.assert_allclose(np.diag(cov), 1.0, atol=0.02)
        assert cov[0, 1] == pytest.approx(0.5, abs=0.02)
        assert cov[0, 2] == pytest.approx(0.25, abs=0.02)

    def test_exact_sparse_truth(self):
        dataset = generate(SyntheticSpec("low", n=50, seed=1))
        np.testing.assert_array_equal(dataset.beta, LOW_DIM_BETA)
        assert dataset.true_support(0.5) == (0, 1, 4)
        assert dataset.data.X.shape == (50, 8)

    def test_quasi_sparse_truth_low(self):
        dataset = generate(SyntheticSpec("low", n=20, eta=0.5, seed=2))
        noise = dataset.beta[[2, 3, 5, 6, 7]]
        assert np.all(np.abs(noise) <= 0.5) and np.any(noise != 0.0)
        np.testing.assert_array_equal(dataset.beta[[0, 1, 4]], [3.0, 1.5, 2.0])
        assert dataset.true_support(0.5) == (0, 1, 4)

    def test_quasi_sparse_truth_high(self):
        dataset = generate(SyntheticSpec("high", n=20, eta=0.5, seed=3))
        np.testing.assert_array_equal(dataset.beta[:3], [3.0, 2.0, 1.0])
        assert np.all(np.abs(dataset.beta[3:13]) <= 0.5)
        assert not dataset.beta[13:].any()

    def test_explicit_coefficients(self):
        beta = np.linspace(-1.0, 1.0, 8)
        dataset = generate(SyntheticSpec("low", n=10), beta=beta)
        np.testing.assert_array_equal(dataset.beta, beta)
        with pytest.raises(InvalidArgumentError):
            generate(SyntheticSpec("low", n=10), beta=np.ones(3))

    def test_seeded(self):
        first = generate(SyntheticSpec("low", n=30, eta=0.2, seed=4))
        second = generate(SyntheticSpec("low", n=30, eta=0.2, seed=4))
        np.testing.assert_array_equal(first.data.X, second.data.X)
        np.testing.assert_array_equal(first.beta, second.beta)


class TestF1:
    """Selection accuracy."""

    def test_examples(self):
        assert f1_score({0, 1, 4}, {0, 1, 4}) == 1.0
        assert f1_score({0, 1}, {0, 1, 4}) == pytest.approx(0.8)
        assert f1_score({0, 1, 4, 6}, {0, 1, 4}) == pytest.approx(6.0 / 7.0)

    def test_no_true_positive(self):
        assert f1_score(set(), {0}) == 0.0
        assert f1_score({2}, {0}) == 0.0
        assert f1_score(set(), set()) == 0.0


def bf_record(log_bf, mode="disjunct", n=10):
    return BayesFactorRecord(
        regime="low",
        n=n,
        eta=0.0,
        mode=mode,
        repetition=0,
        seed=0,
        log_bf=log_bf,
        true_model=[0],
        alternative=[1],
    )


class TestAggregation:
    """Cells over repetitions."""

    def test_bayes_factor_cells(self):
        records = [bf_record(math.log(2.0)), bf_record(math.log(4.0)), bf_record(math.inf)]
        records.append(bf_record(-math.inf))
        (cell,) = aggregate_bayes_factors(records)
        assert cell.repetitions == 4
        assert cell.infinite_count == 1
        assert cell.mean_bf == pytest.approx(2.0)
        assert cell.std_bf == pytest.approx(float(np.std([2.0, 4.0, 0.0], ddof=1)))
        assert cell.median_log_bf == pytest.approx(0.5 * (math.log(2.0) + math.log(4.0)))

    def test_all_infinite(self):
        (cell,) = aggregate_bayes_factors([bf_record(math.inf), bf_record(math.inf)])
        assert cell.mean_bf is None and cell.std_bf is None
        assert cell.median_log_bf == math.inf

    def test_cells_per_mode_and_n(self):
        records = [bf_record(1.0, "disjunct"), bf_record(1.0, "full"), bf_record(1.0, n=20)]
        assert len(aggregate_bayes_factors(records)) == 3

    def test_selection_cells(self):
        records = [
            SelectionRecord(
                regime="low",
                n=10,
                eta=0.0,
                repetition=r,
                seed=r,
                delta=0.5,
                f1=f1,
                selected_count=c,
                indices=list(range(c)),
            )
            for r, (f1, c) in enumerate([(1.0, 3), (0.5, 1)])
        ]
        (cell,) = aggregate_selection(records)
        assert cell.mean_f1 == 0.75
        assert cell.std_f1 == pytest.approx(float(np.std([1.0, 0.5], ddof=1)))
        assert cell.mean_selected == 2.0

    def test_single_repetition_has_no_spread(self):
        record = SelectionRecord(
            regime="low",
            n=10,
            eta=0.0,
            repetition=0,
            seed=0,
            delta=0.0,
            f1=1.0,
            selected_count=3,
            indices=[0, 1, 4],
        )
        (cell,) = aggregate_selection([record])
        assert cell.std_f1 is None


class TestParallel:
    """Seed derivation and the job map."""

    def test_derived_seeds(self):
        seeds = [derive_seed(7, i) for i in range(5)]
        assert len(set(seeds)) == 5
        assert all(0 <= s < 2**64 for s in seeds)
        assert derive_seed(7, 3) == seeds[3]
        assert derive_seed(8, 3) != seeds[3]

    def test_order_and_worker_independence(self):
        assert map_jobs(abs, [-2, 1, -3, 4], jobs=1) == [2, 1, 3, 4]
        assert map_jobs(abs, [-2, 1, -3, 4], jobs=2) == [2, 1, 3, 4]


class TestExperiments:
    """Tiny benchmark runs."""

    settings = SamplerSettings(iterations=100, seed=12)

    def test_selection_benchmark(self):
        records, cells = selection_benchmark(
            "low",
            n_grid=[40],
            eta_grid=[0.0, 0.3],
            delta_grid=[0.5, 0.0],
            repetitions=2,
            prior=PriorConfig(),
            settings=self.settings,
            with_selection=True,
        )
        assert len(records) == 2 * 2 * 3
        assert len(cells) == 2 * 3
        chosen = [r for r in records if r.delta is None]
        assert len(chosen) == 4
        assert all(r.selected_by_threshold and r.chosen_delta in (0.5, 0.0) for r in chosen)
        assert all(0.0 <= r.f1 <= 1.0 for r in records)

    def test_selection_benchmark_deterministic(self):
        kwargs = dict(
            n_grid=[30],
            eta_grid=[0.0],
            delta_grid=[0.5],
            repetitions=2,
            prior=PriorConfig(),
            settings=self.settings,
        )
        first, _ = selection_benchmark("low", **kwargs)
        second, _ = selection_benchmark("low", jobs=2, **kwargs)
        assert first == second

    def test_bf_growth(self):
        records, cells = bf_growth_experiment(
            "low",
            n_grid=[30, 60],
            eta=0.0,
            repetitions=2,
            prior=PriorConfig.calibrated(0.5),
            settings=self.settings,
        )
        assert len(records) == 2 * 2 * 2
        assert {c.mode for c in cells} == {PriorMode.DISJUNCT.value, PriorMode.FULL.value}
        assert all(r.true_model == [0, 1, 4] for r in records)
        for first, second in zip(records[::2], records[1::2]):
            assert first.seed == second.seed
