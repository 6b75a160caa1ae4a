"""
Posterior summaries of a ``SampleStore``.

Covers inclusion probabilities, the ranked model list, the model-averaged
and model-conditional noise variances behind delta selection, and Bayes
factors estimated as posterior odds over prior odds.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from disjunct_bvs.config import PriorConfig, SamplerSettings
from disjunct_bvs.exceptions import InvalidArgumentError
from disjunct_bvs.gibbs import ModelKey, SampleStore, run_chain, run_conditional_chain
from disjunct_bvs.model import RegressionData, log_prior_of_size
from disjunct_bvs.parallel import derive_seed, map_jobs

logger = logging.getLogger(__name__)


def _require_draws(store: SampleStore, operation: str) -> None:
    if store.retained_count == 0:
        raise InvalidArgumentError(
            f"{operation} needs at least one retained draw", argument="store"
        )


def inclusion_probabilities(store: SampleStore) -> np.ndarray:
    """Share of retained draws in which each coordinate was in the slab."""
    _require_draws(store, "inclusion_probabilities")
    return store.z.mean(axis=0)


def posterior_mean_beta(store: SampleStore) -> np.ndarray:
    _require_draws(store, "posterior_mean_beta")
    return store.beta.mean(axis=0)


@dataclass(frozen=True)
class RankedModel:
    variables: ModelKey
    count: int
    frequency: float


def top_models(store: SampleStore, k: int = 10) -> List[RankedModel]:
    """
    The ``k`` most visited models, most frequent first.

    Ties go to the model visited first. Fewer than ``k`` entries come back
    when fewer distinct models were visited.
    """
    if k < 1:
        raise InvalidArgumentError("k must be >= 1", argument="k", value=k)
    total = store.retained_count
    ranked = sorted(
        store.model_counts.items(), key=lambda item: (-item[1], store.first_seen[item[0]])
    )
    return [RankedModel(key, count, count / total) for key, count in ranked[:k]]


def most_frequent_model(store: SampleStore) -> ModelKey:
    _require_draws(store, "most_frequent_model")
    return top_models(store, 1)[0].variables


def estimate_mse_bma(store: SampleStore) -> float:
    """
    Model-averaged noise variance: the mean of the retained ``sigma_r2`` draws.

    Raises:
        InvalidArgumentError: Empty store, or a store not sampled with delta=0.
    """
    _require_draws(store, "estimate_mse_bma")
    if store.delta != 0.0:
        raise InvalidArgumentError(
            "the model-averaged reference is defined on a delta=0 chain",
            argument="store.delta",
            value=store.delta,
        )
    return float(store.sigma_r2.mean())


def estimate_mse_for_delta(
    data: RegressionData,
    delta: float,
    cfg: PriorConfig,
    settings: SamplerSettings,
    store: Optional[SampleStore] = None,
) -> Tuple[ModelKey, float]:
    """
    Noise variance of the most probable model at ``delta``.

    Takes ``z*`` as the most frequent model of ``store`` (a chain at ``delta``
    is run when none is given), restricts the design to its columns and runs
    a chain with every remaining coordinate held in the slab. An empty ``z*``
    leaves the null model, where only the noise variance is sampled.

    Returns:
        ``(z*, mse_delta)``.
    """
    cfg_delta = cfg if cfg.delta == delta else cfg.with_delta(delta)
    if store is None:
        store = run_chain(data, cfg_delta, settings)
    z_star = most_frequent_model(store)

    restricted = data.restrict(z_star)
    conditional = run_conditional_chain(
        restricted,
        cfg_delta,
        settings.with_seed(derive_seed(settings.seed, 1)),
        np.ones(len(z_star), dtype=np.int8),
    )
    return z_star, float(conditional.sigma_r2.mean())


@dataclass(frozen=True)
class DeltaEvaluation:
    """One delta's most probable model and its expected increase in MSE."""

    delta: float
    model: ModelKey
    mse_delta: float
    expected_increase: float
    slice_acceptance_rate: float = 1.0

    @property
    def size(self) -> int:
        return len(self.model)


@dataclass(frozen=True)
class DeltaSelection:
    """Outcome of a delta sweep."""

    mse_bma: float
    evaluations: Tuple[DeltaEvaluation, ...]
    selected: DeltaEvaluation
    fallback: bool
    reference: SampleStore


def choose_delta(
    evaluations: Sequence[DeltaEvaluation], threshold: float = 0.05
) -> Tuple[DeltaEvaluation, bool]:
    """
    Sparsest model whose expected MSE increase is at most ``threshold``.

    Equal sizes go to the larger delta. When nothing passes, the smallest
    increase wins and the second element of the result is ``True``.
    """
    if not evaluations:
        raise InvalidArgumentError("no delta evaluations to choose from", argument="evaluations")
    passing = [e for e in evaluations if e.expected_increase <= threshold]
    if passing:
        return min(passing, key=lambda e: (e.size, -e.delta)), False
    fallback = min(evaluations, key=lambda e: (e.expected_increase, -e.delta))
    logger.warning(
        "No delta meets the %.3g threshold; falling back to delta=%g (increase %.4f)",
        threshold,
        fallback.delta,
        fallback.expected_increase,
    )
    return fallback, True


@dataclass(frozen=True)
class _DeltaJob:
    data: RegressionData
    cfg: PriorConfig
    settings: SamplerSettings
    delta: float


def _evaluate_delta(job: _DeltaJob) -> Tuple[SampleStore, ModelKey, Optional[float]]:
    cfg_delta = job.cfg.with_delta(job.delta)
    store = run_chain(job.data, cfg_delta, job.settings)
    if job.delta == 0.0:
        # The delta=0 chain is the model-averaged reference; its MSE is mse_bma.
        return store, most_frequent_model(store), None
    model, mse = estimate_mse_for_delta(job.data, job.delta, cfg_delta, job.settings, store=store)
    return store, model, mse


def select_delta(
    data: RegressionData,
    delta_grid: Iterable[float],
    cfg: PriorConfig,
    settings: SamplerSettings,
    threshold: float = 0.05,
    jobs: int = 1,
) -> DeltaSelection:
    """
    Run the delta sweep and pick the sparsest acceptable model.

    Every delta gets its own chain, seeded from ``settings.seed`` by its
    position. The delta=0 chain doubles as the model-averaged reference and
    is run even when 0 is not in the grid. Its own candidate is scored
    against itself, so ``mse_delta == mse_bma`` and its increase is exactly
    0: with 0 in the grid some delta always meets a non-negative threshold.
    """
    grid = [float(d) for d in delta_grid]
    if not grid:
        raise InvalidArgumentError("delta grid must not be empty", argument="delta_grid")
    if any(d < 0 for d in grid):
        raise InvalidArgumentError("deltas must be >= 0", argument="delta_grid", value=grid)
    deltas = grid if 0.0 in grid else grid + [0.0]

    job_list = [
        _DeltaJob(data, cfg, settings.with_seed(derive_seed(settings.seed, i)), delta)
        for i, delta in enumerate(deltas)
    ]
    results = map_jobs(_evaluate_delta, job_list, jobs=jobs)

    reference, _, _ = results[deltas.index(0.0)]
    mse_bma = estimate_mse_bma(reference)
    evaluations = []
    for delta, (store, model, mse) in zip(deltas, results):
        if delta not in grid:
            continue
        if mse is None:
            mse = mse_bma
        increase = mse / mse_bma - 1.0
        logger.info("delta=%g: model %s, expected MSE increase %.4f", delta, model, increase)
        evaluations.append(
            DeltaEvaluation(delta, model, mse, increase, store.slice_acceptance_rate)
        )

    selected, fallback = choose_delta(evaluations, threshold)
    return DeltaSelection(mse_bma, tuple(evaluations), selected, fallback, reference)


def estimate_log_bf(
    store: SampleStore,
    model: Iterable[int],
    alternative: Iterable[int],
    prior_correction: bool = True,
) -> float:
    """
    Log Bayes factor of ``model`` against ``alternative``.

    Posterior odds from visit counts, divided by the prior odds of the two
    indicator vectors unless ``prior_correction`` is off.

    Returns:
        The log Bayes factor; ``inf`` when ``alternative`` was never visited
        and ``-inf`` when ``model`` was never visited.

    Raises:
        InvalidArgumentError: Equal models, indices out of range, an empty
            store, or neither model visited.
    """
    first = _as_model(model, store.d)
    second = _as_model(alternative, store.d)
    if first == second:
        raise InvalidArgumentError(
            "a Bayes factor needs two different models", argument="alternative", value=second
        )
    _require_draws(store, "estimate_log_bf")

    count, alt_count = store.model_counts.get(first, 0), store.model_counts.get(second, 0)
    if count == 0 and alt_count == 0:
        raise InvalidArgumentError(
            "neither model was visited; the posterior odds are undefined",
            argument="model",
            value=(first, second),
        )
    if alt_count == 0:
        return math.inf
    if count == 0:
        return -math.inf

    log_bf = math.log(count) - math.log(alt_count)
    if prior_correction:
        log_bf -= log_prior_of_size(len(first), store.d) - log_prior_of_size(len(second), store.d)
    return log_bf


def _as_model(indices: Iterable[int], d: int) -> ModelKey:
    key = tuple(sorted({int(j) for j in indices}))
    if key and (key[0] < 0 or key[-1] >= d):
        raise InvalidArgumentError("model index out of range", argument="model", value=key)
    return key
