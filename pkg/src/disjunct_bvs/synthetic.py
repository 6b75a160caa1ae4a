"""
Synthetic regression settings and the experiments run on them.

Two regimes:

- ``LOW``: d=8, beta = (3, 1.5, 0, 0, 2, 0, 0, 0), noise sd 3, AR(1)
  covariates with rho = 0.5.
- ``HIGH``: d=1000, beta = (3, 2, 1, 0, ...), noise sd sqrt(3), AR(1)
  covariates with rho = 0.6.

``eta > 0`` makes the truth quasi-sparse: zero coefficients are replaced by
``Uniform(-eta, eta)`` draws (all of them in ``LOW``; the ten right after the
leading three in ``HIGH``).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from disjunct_bvs.config import PriorConfig, PriorMode, SamplerSettings
from disjunct_bvs.exceptions import InvalidArgumentError
from disjunct_bvs.gibbs import ModelKey, SampleStore, run_chain
from disjunct_bvs.model import RegressionData
from disjunct_bvs.models import (
    BayesFactorCell,
    BayesFactorRecord,
    SelectionCell,
    SelectionRecord,
)
from disjunct_bvs.parallel import derive_seed, map_jobs
from disjunct_bvs.posterior import estimate_log_bf, most_frequent_model, select_delta, top_models

logger = logging.getLogger(__name__)

LOW_DIM_BETA = (3.0, 1.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0)
HIGH_DIM_D = 1000
HIGH_DIM_LEADING = (3.0, 2.0, 1.0)
#: Share of zero coefficients the high-dimensional regime perturbs.
HIGH_DIM_NOISE_SHARE = 0.01


class Regime(str, Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class SyntheticSpec:
    """One synthetic dataset: regime, sample size, noise half-width and seed."""

    regime: Regime
    n: int
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "regime", Regime(self.regime))
        if self.n < 1:
            raise InvalidArgumentError("n must be >= 1", argument="n", value=self.n)
        if not (math.isfinite(self.eta) and self.eta >= 0.0):
            raise InvalidArgumentError("eta must be >= 0", argument="eta", value=self.eta)

    @property
    def d(self) -> int:
        return len(LOW_DIM_BETA) if self.regime == Regime.LOW else HIGH_DIM_D

    @property
    def rho(self) -> float:
        return 0.5 if self.regime == Regime.LOW else 0.6

    @property
    def noise_sd(self) -> float:
        return 3.0 if self.regime == Regime.LOW else math.sqrt(3.0)


@dataclass(frozen=True)
class SyntheticDataset:
    spec: SyntheticSpec
    data: RegressionData
    beta: np.ndarray = field(repr=False)

    def true_support(self, delta: float) -> ModelKey:
        """0-based indices with ``|beta_j| > delta``."""
        return tuple(int(j) for j in np.flatnonzero(np.abs(self.beta) > delta))


def perturbed_positions(spec: SyntheticSpec) -> np.ndarray:
    """Indices of the zero coefficients that receive ``Uniform(-eta, eta)`` noise."""
    if spec.regime == Regime.LOW:
        return np.flatnonzero(np.asarray(LOW_DIM_BETA) == 0.0)
    zeros = HIGH_DIM_D - len(HIGH_DIM_LEADING)
    count = math.ceil(HIGH_DIM_NOISE_SHARE * zeros)
    start = len(HIGH_DIM_LEADING)
    return np.arange(start, start + count)


def true_coefficients(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.regime == Regime.LOW:
        beta = np.array(LOW_DIM_BETA)
    else:
        beta = np.zeros(HIGH_DIM_D)
        beta[: len(HIGH_DIM_LEADING)] = HIGH_DIM_LEADING
    if spec.eta > 0.0:
        positions = perturbed_positions(spec)
        beta[positions] = rng.uniform(-spec.eta, spec.eta, size=positions.size)
    return beta


def ar1_design(n: int, d: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """
    Rows drawn from ``N(0, Sigma)`` with ``Sigma_ij = rho**|i - j|``.

    Uses the sequential form ``x_k = rho * x_{k-1} + sqrt(1 - rho**2) * e_k``.
    """
    noise = rng.standard_normal((n, d))
    X = np.empty((n, d))
    if d == 0:
        return X
    X[:, 0] = noise[:, 0]
    scale = math.sqrt(1.0 - rho * rho)
    for k in range(1, d):
        X[:, k] = rho * X[:, k - 1] + scale * noise[:, k]
    return X


def generate(spec: SyntheticSpec, beta: Optional[Sequence[float]] = None) -> SyntheticDataset:
    """
    Draw a dataset for ``spec``.

    Args:
        spec: Regime, size, noise half-width and seed.
        beta: Explicit coefficient vector; replaces the regime's truth and
            its ``eta`` perturbation.

    Returns:
        The dataset with its true coefficients.
    """
    rng = np.random.default_rng(spec.seed)
    if beta is None:
        coefficients = true_coefficients(spec, rng)
    else:
        coefficients = np.asarray(beta, dtype=float)
        if coefficients.shape != (spec.d,):
            raise InvalidArgumentError(
                f"beta must have length {spec.d}", argument="beta", value=coefficients.shape
            )
    X = ar1_design(spec.n, spec.d, spec.rho, rng)
    y = X @ coefficients + spec.noise_sd * rng.standard_normal(spec.n)
    return SyntheticDataset(spec, RegressionData.from_arrays(X, y), coefficients)


def f1_score(selected: Iterable[int], truth: Iterable[int]) -> float:
    """
    Harmonic mean of precision and recall of ``selected`` against ``truth``.

    0.0 whenever there is no true positive, both sets empty included.
    """
    chosen, relevant = set(selected), set(truth)
    hits = len(chosen & relevant)
    if hits == 0:
        return 0.0
    return 2.0 * hits / (len(chosen) + len(relevant))


def _spread(values: Sequence[float]) -> Optional[float]:
    return float(np.std(values, ddof=1)) if len(values) > 1 else None


# =============================================================================
# Bayes-factor growth
# =============================================================================


def alternative_model(store: SampleStore, truth: ModelKey) -> Optional[ModelKey]:
    """Most visited model other than ``truth``; None if the chain never left it."""
    for ranked in top_models(store, 2):
        if ranked.variables != truth:
            return ranked.variables
    return None


@dataclass(frozen=True)
class _BayesFactorJob:
    regime: Regime
    n: int
    eta: float
    repetition: int
    seed: int
    delta: float
    modes: Tuple[PriorMode, ...]
    prior: PriorConfig
    settings: SamplerSettings
    prior_correction: bool


def _bayes_factor_job(job: _BayesFactorJob) -> List[BayesFactorRecord]:
    dataset = generate(SyntheticSpec(job.regime, job.n, job.eta, job.seed))
    truth = dataset.true_support(job.delta)
    records = []
    for k, mode in enumerate(job.modes):
        cfg = job.prior.with_mode(mode)
        store = run_chain(dataset.data, cfg, job.settings.with_seed(derive_seed(job.seed, k)))
        alternative = alternative_model(store, truth)
        if alternative is None:
            log_bf = math.inf
        else:
            log_bf = estimate_log_bf(store, truth, alternative, job.prior_correction)
        records.append(
            BayesFactorRecord(
                regime=job.regime.value,
                n=job.n,
                eta=job.eta,
                mode=mode.value,
                repetition=job.repetition,
                seed=job.seed,
                log_bf=log_bf,
                true_model=list(truth),
                alternative=None if alternative is None else list(alternative),
            )
        )
    return records


def aggregate_bayes_factors(records: Sequence[BayesFactorRecord]) -> List[BayesFactorCell]:
    """
    One cell per (regime, n, eta, mode).

    ``+inf`` log Bayes factors are counted, not averaged; ``-inf`` is a finite
    Bayes factor of zero.
    """
    groups: Dict[Tuple[str, int, float, str], List[float]] = {}
    for r in records:
        groups.setdefault((r.regime, r.n, r.eta, r.mode), []).append(r.log_bf)

    cells = []
    for (regime, n, eta, mode), log_bfs in groups.items():
        finite = [lb for lb in log_bfs if lb != math.inf]
        with np.errstate(over="ignore"):
            bfs = np.exp(np.asarray(finite, dtype=float))
        # exp overflow leaves inf, whose spread is undefined; report it as inf.
        spread = _spread(list(bfs))
        if spread is not None and not np.all(np.isfinite(bfs)):
            spread = math.inf
        cells.append(
            BayesFactorCell(
                regime=regime,
                n=n,
                eta=eta,
                mode=mode,
                repetitions=len(log_bfs),
                infinite_count=len(log_bfs) - len(finite),
                mean_bf=float(bfs.mean()) if finite else None,
                std_bf=spread,
                median_log_bf=float(np.median(log_bfs)),
            )
        )
    return cells


def bf_growth_experiment(
    regime: Regime,
    n_grid: Sequence[int],
    eta: float,
    repetitions: int,
    prior: PriorConfig,
    settings: SamplerSettings,
    modes: Sequence[PriorMode] = (PriorMode.DISJUNCT, PriorMode.FULL),
    prior_correction: bool = True,
    jobs: int = 1,
) -> Tuple[List[BayesFactorRecord], List[BayesFactorCell]]:
    """
    Bayes factor of the true model against the runner-up, across ``n``.

    Both prior modes see the same dataset in each repetition. The evaluation
    delta is ``prior.delta``; the true model is ``{j : |beta_j| > delta}``.
    """
    regime = Regime(regime)
    job_list = []
    for n in n_grid:
        for rep in range(repetitions):
            seed = derive_seed(settings.seed, len(job_list))
            job_list.append(
                _BayesFactorJob(
                    regime=regime,
                    n=int(n),
                    eta=float(eta),
                    repetition=rep,
                    seed=seed,
                    delta=prior.delta,
                    modes=tuple(PriorMode(m) for m in modes),
                    prior=prior,
                    settings=settings,
                    prior_correction=prior_correction,
                )
            )
    logger.info("Bayes-factor experiment: %d datasets, modes %s", len(job_list), list(modes))
    records = [r for batch in map_jobs(_bayes_factor_job, job_list, jobs) for r in batch]
    return records, aggregate_bayes_factors(records)


# =============================================================================
# Selection benchmark
# =============================================================================


@dataclass(frozen=True)
class _SelectionJob:
    regime: Regime
    n: int
    eta: float
    repetition: int
    seed: int
    delta_grid: Tuple[float, ...]
    prior: PriorConfig
    settings: SamplerSettings
    eval_delta: float
    with_selection: bool
    threshold: float


def _selection_job(job: _SelectionJob) -> List[SelectionRecord]:
    dataset = generate(SyntheticSpec(job.regime, job.n, job.eta, job.seed))
    truth = dataset.true_support(job.eval_delta)

    def record(model: ModelKey, delta: Optional[float], chosen: Optional[float]) -> SelectionRecord:
        return SelectionRecord(
            regime=job.regime.value,
            n=job.n,
            eta=job.eta,
            repetition=job.repetition,
            seed=job.seed,
            delta=delta,
            selected_by_threshold=delta is None,
            chosen_delta=chosen,
            f1=f1_score(model, truth),
            selected_count=len(model),
            indices=list(model),
        )

    records = []
    for k, delta in enumerate(job.delta_grid):
        cfg = job.prior.with_delta(delta)
        store = run_chain(dataset.data, cfg, job.settings.with_seed(derive_seed(job.seed, k)))
        records.append(record(most_frequent_model(store), delta, None))

    if job.with_selection:
        selection = select_delta(
            dataset.data,
            job.delta_grid,
            job.prior,
            job.settings.with_seed(derive_seed(job.seed, len(job.delta_grid))),
            threshold=job.threshold,
        )
        records.append(record(selection.selected.model, None, selection.selected.delta))
    return records


def aggregate_selection(records: Sequence[SelectionRecord]) -> List[SelectionCell]:
    groups: Dict[Tuple[str, int, float, Optional[float]], List[SelectionRecord]] = {}
    for r in records:
        groups.setdefault((r.regime, r.n, r.eta, r.delta), []).append(r)

    cells = []
    for (regime, n, eta, delta), group in groups.items():
        f1 = [r.f1 for r in group]
        counts = [float(r.selected_count) for r in group]
        cells.append(
            SelectionCell(
                regime=regime,
                n=n,
                eta=eta,
                delta=delta,
                selected_by_threshold=delta is None,
                repetitions=len(group),
                mean_f1=float(np.mean(f1)),
                std_f1=_spread(f1),
                mean_selected=float(np.mean(counts)),
                std_selected=_spread(counts),
            )
        )
    return cells


def selection_benchmark(
    regime: Regime,
    n_grid: Sequence[int],
    eta_grid: Sequence[float],
    delta_grid: Sequence[float],
    repetitions: int,
    prior: PriorConfig,
    settings: SamplerSettings,
    eval_delta: float = 0.5,
    with_selection: bool = False,
    threshold: float = 0.05,
    jobs: int = 1,
) -> Tuple[List[SelectionRecord], List[SelectionCell]]:
    """
    F1 and selected-model size of the most frequent model per prior delta.

    Selections are scored against ``{j : |beta_j| > eval_delta}``. With
    ``with_selection`` each repetition also runs the delta sweep and adds a
    row (``delta=None``) for the model it picks.
    """
    regime = Regime(regime)
    job_list = []
    for n in n_grid:
        for eta in eta_grid:
            for rep in range(repetitions):
                seed = derive_seed(settings.seed, len(job_list))
                job_list.append(
                    _SelectionJob(
                        regime=regime,
                        n=int(n),
                        eta=float(eta),
                        repetition=rep,
                        seed=seed,
                        delta_grid=tuple(float(d) for d in delta_grid),
                        prior=prior,
                        settings=settings,
                        eval_delta=eval_delta,
                        with_selection=with_selection,
                        threshold=threshold,
                    )
                )
    logger.info("Selection benchmark: %d datasets x %d deltas", len(job_list), len(delta_grid))
    records = [r for batch in map_jobs(_selection_job, job_list, jobs) for r in batch]
    return records, aggregate_selection(records)
