"""
Systematic-scan Gibbs sampler over ``(z, beta, sigma_r2, sigma1_2)``.

One sweep updates, for ``j = 1..d``, the indicator ``z_j`` with ``beta_j``
integrated out and then ``beta_j`` given the new ``z_j``; then the noise
variance in closed form; then the slab variance with an exact slice sampler.

Every conditional works from the sufficient statistics in
``RegressionData``, so a sweep costs ``O(d**2)`` whatever ``n`` is.

Example:
    >>> from disjunct_bvs import PriorConfig, SamplerSettings, most_frequent_model, run_chain
    >>> store = run_chain(data, PriorConfig.calibrated(0.5), SamplerSettings(seed=1))
    >>> most_frequent_model(store)
    (0, 1, 4)
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize

from disjunct_bvs.config import PriorConfig, PriorMode, SamplerSettings
from disjunct_bvs.distributions import (
    RegionKind,
    ScaledInvChiSqParams,
    SupportRegion,
    log_trunc_norm_const,
    sample_scaled_inv_chisq,
    sample_scaled_inv_chisq_below,
    sample_trunc_norm,
)
from disjunct_bvs.exceptions import (
    ChainAbortedError,
    InvalidArgumentError,
    NumericalFailureError,
)
from disjunct_bvs.model import (
    ChainState,
    RegressionData,
    log_prior_of_size,
    residual_sum_squares,
)

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

ModelKey = Tuple[int, ...]


def model_key(z: np.ndarray) -> ModelKey:
    """0-based indices of the slab coordinates; the key of the model-frequency map."""
    return tuple(int(j) for j in np.flatnonzero(z))


# =============================================================================
# Coordinate updates: z_j and beta_j
# =============================================================================


def partial_residual_projection(j: int, beta: np.ndarray, data: RegressionData) -> float:
    """``x_j' (y - X_{-j} beta_{-j})`` from sufficient statistics."""
    return float(data.xty[j] - data.gram[j] @ beta + data.gram[j, j] * beta[j])


def coordinate_posterior(
    projection: float, gram_jj: float, sigma_r2: float, prior_var: float
) -> Tuple[float, float]:
    """
    Mean and variance of the untruncated normal conditional of ``beta_j``.

    ``var = (||x_j||^2 / sigma_r2 + 1 / prior_var)^-1``,
    ``mean = var * projection / sigma_r2``.
    """
    var = 1.0 / (gram_jj / sigma_r2 + 1.0 / prior_var)
    return var * projection / sigma_r2, var


def _candidate(cfg: PriorConfig, state: ChainState, slab: bool) -> Tuple[SupportRegion, float]:
    if slab:
        return cfg.slab_region(), state.sigma1_2
    spike = cfg.spike_region()
    return spike, (0.0 if spike.is_point_mass else cfg.spike_variance)


def conditional_z_weights(
    j: int, state: ChainState, data: RegressionData, cfg: PriorConfig
) -> Tuple[float, float]:
    """
    Unnormalized log-probabilities of ``z_j = 0`` and ``z_j = 1``.

    ``beta_j`` is integrated out over each candidate's region:

        log p(z) + mean * t / (2 * sigma_r2)
                 + log iota(region, mean, var) - log iota(region, 0, prior_var)

    The Dirac spike contributes ``log p(z)`` alone.

    Raises:
        NumericalFailureError: A weight came out non-finite.
    """
    projection = partial_residual_projection(j, state.beta, data)
    gram_jj = float(data.gram[j, j])
    size_rest = state.size - int(state.z[j])

    weights = []
    for candidate in (0, 1):
        region, prior_var = _candidate(cfg, state, slab=bool(candidate))
        log_weight = log_prior_of_size(size_rest + candidate, data.d)
        if not region.is_point_mass:
            mean, var = coordinate_posterior(projection, gram_jj, state.sigma_r2, prior_var)
            log_weight += (
                0.5 * mean * projection / state.sigma_r2
                + log_trunc_norm_const(region, mean, var)
                - log_trunc_norm_const(region, 0.0, prior_var)
            )
        if not math.isfinite(log_weight):
            raise NumericalFailureError(
                f"Non-finite inclusion weight for coordinate {j}",
                operation="conditional_z_weights",
                context={"coordinate": j, "candidate": candidate, "logWeight": log_weight},
            )
        weights.append(log_weight)
    return weights[0], weights[1]


def inclusion_probability(log_w0: float, log_w1: float) -> float:
    """``P(z_j = 1)`` from two unnormalized log weights."""
    if log_w1 == -math.inf and log_w0 == -math.inf:
        raise NumericalFailureError(
            "Both inclusion weights are zero", operation="inclusion_probability"
        )
    if log_w1 == -math.inf:
        return 0.0
    if log_w0 == -math.inf:
        return 1.0
    return math.exp(log_w1 - float(np.logaddexp(log_w0, log_w1)))


def bernoulli_from_log_weights(log_w0: float, log_w1: float, rng: np.random.Generator) -> int:
    return int(rng.random() < inclusion_probability(log_w0, log_w1))


def sample_z(
    j: int,
    state: ChainState,
    data: RegressionData,
    cfg: PriorConfig,
    rng: np.random.Generator,
) -> int:
    """
    Draw ``z_j`` and store it in ``state``.

    The state may violate its support until ``sample_beta`` runs for the
    same coordinate.
    """
    log_w0, log_w1 = conditional_z_weights(j, state, data, cfg)
    state.z[j] = bernoulli_from_log_weights(log_w0, log_w1, rng)
    return int(state.z[j])


def sample_beta(
    j: int,
    state: ChainState,
    data: RegressionData,
    cfg: PriorConfig,
    rng: np.random.Generator,
) -> float:
    """Draw ``beta_j`` from its truncated-normal conditional given ``z_j``."""
    region, prior_var = _candidate(cfg, state, slab=bool(state.z[j]))
    if region.is_point_mass:
        state.beta[j] = 0.0
        return 0.0
    projection = partial_residual_projection(j, state.beta, data)
    mean, var = coordinate_posterior(
        projection, float(data.gram[j, j]), state.sigma_r2, prior_var
    )
    state.beta[j] = sample_trunc_norm(region, mean, var, rng)
    return float(state.beta[j])


# =============================================================================
# Variance updates
# =============================================================================


def noise_variance_posterior(
    state: ChainState, data: RegressionData, cfg: PriorConfig
) -> ScaledInvChiSqParams:
    nu = cfg.nu_r + data.n
    rss = residual_sum_squares(state, data)
    return ScaledInvChiSqParams(nu, (rss + cfg.nu_r * cfg.eta_r2) / nu)


def sample_sigma_r(
    state: ChainState, data: RegressionData, cfg: PriorConfig, rng: np.random.Generator
) -> float:
    """Draw ``sigma_r2 ~ Inv-chi2(nu_r + n, (rss + nu_r * eta_r2) / (nu_r + n))``."""
    state.sigma_r2 = sample_scaled_inv_chisq(noise_variance_posterior(state, data, cfg), rng)
    return state.sigma_r2


def slab_variance_posterior(state: ChainState, cfg: PriorConfig) -> ScaledInvChiSqParams:
    """Conjugate part of the slab-variance conditional."""
    slab_beta = state.beta[state.z.astype(bool)]
    nu = cfg.nu1 + slab_beta.size
    return ScaledInvChiSqParams(nu, (cfg.nu1 * cfg.eta1_2 + float(slab_beta @ slab_beta)) / nu)


def slab_variance_log_h(sigma1_2: float, size: int, region: SupportRegion) -> float:
    """
    Log of the non-conjugate factor ``h = (2*pi*s2)^(s/2) / iota(region, s2)^s``.

    ``h >= 1`` and tends to 1 as the slab variance grows.
    """
    if size == 0 or region.kind == RegionKind.FULL:
        return 0.0
    return size * (
        0.5 * (_LOG_2PI + math.log(sigma1_2)) - log_trunc_norm_const(region, 0.0, sigma1_2)
    )


@dataclass(frozen=True)
class SliceDraw:
    """Result of one slab-variance update with its proposal bookkeeping."""

    value: float
    proposals: int
    transitions: int
    exact_draws: int = 0


#: Slice levels with ``log U`` at or below this admit every slab variance.
SLICE_FLAT_LOG_LEVEL = 1e-12

_MAX_LOG_VARIANCE = 700.0


def slice_upper_bound(log_u: float, size: int, region: SupportRegion, start: float) -> float:
    """
    Right end ``c`` of the slice ``{s2 : log h(s2) >= log_u}``.

    ``h`` decreases in ``s2``, so the slice is the interval ``(0, c]``.
    ``start`` must lie in the slice. Returns ``inf`` when the level is flat.

    Raises:
        NumericalFailureError: The boundary could not be bracketed.
    """
    if log_u <= SLICE_FLAT_LOG_LEVEL:
        return math.inf

    def excess(log_s2: float) -> float:
        return slab_variance_log_h(math.exp(log_s2), size, region) - log_u

    lo = math.log(start)
    if excess(lo) <= 0.0:
        return start
    step = 1.0
    hi = min(lo + step, _MAX_LOG_VARIANCE)
    while excess(hi) > 0.0:
        if hi >= _MAX_LOG_VARIANCE:
            raise NumericalFailureError(
                "Slice boundary could not be bracketed",
                operation="sample_sigma1_slice",
                context={"s": size, "logLevel": log_u, "start": start},
            )
        lo = hi
        step *= 2.0
        hi = min(lo + step, _MAX_LOG_VARIANCE)
    return math.exp(optimize.brentq(excess, lo, hi, xtol=1e-12))


def sample_sigma1_slice(
    state: ChainState,
    cfg: PriorConfig,
    settings: SamplerSettings,
    rng: np.random.Generator,
) -> SliceDraw:
    """
    Exact draw of the slab variance.

    The conditional is ``h(s2) * Inv-chi2(s2 | nu~, eta~2)``. Starting at the
    mode of the conjugate part, each transition draws ``U ~ U[0, h(current)]``
    and redraws from the conjugate part until ``h(candidate) > U``. After
    ``settings.slice_rejection_cap`` misses the slice is a thin left tail of
    the conjugate part; the transition then solves for the slice boundary
    ``c`` and draws from the conjugate part restricted to ``(0, c]``. With no
    slab coordinates, or an untruncated slab, ``h == 1`` and the draw is direct.

    Raises:
        NumericalFailureError: The slice boundary could not be bracketed.
    """
    params = slab_variance_posterior(state, cfg)
    size = state.size
    region = cfg.slab_region()

    if size == 0 or region.kind == RegionKind.FULL:
        value = sample_scaled_inv_chisq(params, rng)
        state.sigma1_2 = value
        return SliceDraw(value=value, proposals=1, transitions=1)

    current = params.mode
    log_h_current = slab_variance_log_h(current, size, region)
    proposals = exact_draws = 0
    for _ in range(settings.slice_burn_in):
        # 1 - U lies in (0, 1], so the log stays finite.
        log_u = log_h_current + math.log1p(-rng.random())
        for _ in range(settings.slice_rejection_cap):
            candidate = sample_scaled_inv_chisq(params, rng)
            proposals += 1
            log_h = slab_variance_log_h(candidate, size, region)
            if log_h > log_u:
                break
        else:
            upper = slice_upper_bound(log_u, size, region, current)
            candidate = sample_scaled_inv_chisq_below(params, upper, rng)
            log_h = slab_variance_log_h(candidate, size, region)
            proposals += 1
            exact_draws += 1
            logger.debug(
                "Slice transition fell back to the exact draw: s=%d level=%.4g bound=%.4g",
                size,
                log_u,
                upper,
            )
        current, log_h_current = candidate, log_h

    state.sigma1_2 = current
    return SliceDraw(
        value=current,
        proposals=proposals,
        transitions=settings.slice_burn_in,
        exact_draws=exact_draws,
    )


# =============================================================================
# Chains
# =============================================================================


def initial_state(
    data: RegressionData, cfg: PriorConfig, rng: np.random.Generator, z: Optional[np.ndarray] = None
) -> ChainState:
    """
    Support-valid starting state.

    All-null by default. Spike coordinates start at zero for the Dirac spike
    and at a spike-prior draw otherwise; slab coordinates at a slab-prior draw.
    """
    z = np.zeros(data.d, dtype=np.int8) if z is None else np.asarray(z, dtype=np.int8)
    beta = np.zeros(data.d)
    spike, slab = cfg.spike_region(), cfg.slab_region()
    for j in range(data.d):
        if z[j]:
            beta[j] = sample_trunc_norm(slab, 0.0, cfg.eta1_2, rng)
        elif not spike.is_point_mass:
            beta[j] = sample_trunc_norm(spike, 0.0, cfg.spike_variance, rng)
    return ChainState(beta=beta, z=z, sigma_r2=cfg.eta_r2, sigma1_2=cfg.eta1_2)


def gibbs_sweep(
    state: ChainState,
    data: RegressionData,
    cfg: PriorConfig,
    settings: SamplerSettings,
    rng: np.random.Generator,
    coordinates: Optional[Iterable[int]] = None,
    update_z: bool = True,
) -> SliceDraw:
    """
    One full sweep, in place.

    Args:
        coordinates: Scan order; ``0..d-1`` by default.
        update_z: ``False`` keeps the indicators fixed (conditional chains).
    """
    for j in range(data.d) if coordinates is None else coordinates:
        if update_z:
            sample_z(j, state, data, cfg, rng)
        sample_beta(j, state, data, cfg, rng)
    sample_sigma_r(state, data, cfg, rng)
    return sample_sigma1_slice(state, cfg, settings, rng)


@dataclass(eq=False)
class SampleStore:
    """
    Retained post-burn-in draws of one chain.

    Attributes:
        z, beta: ``(retained, d)`` arrays.
        sigma_r2, sigma1_2: ``(retained,)`` arrays.
        model_counts: Visits per model, keyed by ``model_key``.
        first_seen: Retained-draw index of each model's first visit.
        delta, mode, seed: Provenance of the chain.
        slice_proposals, slice_transitions, slice_exact_draws: Slice-sampler
            bookkeeping over all sweeps, burn-in included; exact draws count the
            transitions that exhausted the rejection cap.
    """

    z: np.ndarray
    beta: np.ndarray
    sigma_r2: np.ndarray
    sigma1_2: np.ndarray
    model_counts: Dict[ModelKey, int]
    first_seen: Dict[ModelKey, int]
    delta: float = 0.0
    mode: PriorMode = PriorMode.DISJUNCT
    seed: int = 0
    iterations: int = 0
    burn_in: int = 0
    thinning: int = 1
    slice_proposals: int = 0
    slice_transitions: int = 0
    slice_exact_draws: int = 0
    column_names: Tuple[str, ...] = field(default=())

    @classmethod
    def from_draws(
        cls,
        z: np.ndarray,
        beta: Optional[np.ndarray] = None,
        sigma_r2: Optional[np.ndarray] = None,
        sigma1_2: Optional[np.ndarray] = None,
        **metadata: object,
    ) -> "SampleStore":
        """Build a store from draw arrays, indexing the visited models."""
        z = np.asarray(z, dtype=np.int8)
        if z.ndim != 2:
            raise InvalidArgumentError("z draws must be a 2-d array", argument="z", value=z.shape)
        count = z.shape[0]
        beta = np.zeros(z.shape) if beta is None else np.asarray(beta, dtype=float)
        sigma_r2 = np.ones(count) if sigma_r2 is None else np.asarray(sigma_r2, dtype=float)
        sigma1_2 = np.ones(count) if sigma1_2 is None else np.asarray(sigma1_2, dtype=float)

        counts: Dict[ModelKey, int] = {}
        first_seen: Dict[ModelKey, int] = {}
        for i, row in enumerate(z):
            key = model_key(row)
            if key not in counts:
                counts[key] = 0
                first_seen[key] = i
            counts[key] += 1
        return cls(
            z=z,
            beta=beta,
            sigma_r2=sigma_r2,
            sigma1_2=sigma1_2,
            model_counts=counts,
            first_seen=first_seen,
            **metadata,  # type: ignore[arg-type]
        )

    @property
    def d(self) -> int:
        return int(self.z.shape[1])

    @property
    def retained_count(self) -> int:
        return int(self.z.shape[0])

    @property
    def slice_acceptance_rate(self) -> float:
        if self.slice_proposals == 0:
            return 1.0
        return self.slice_transitions / self.slice_proposals

    def model_frequency(self, model: Iterable[int]) -> float:
        """Share of retained draws that visited ``model`` (0-based indices)."""
        if self.retained_count == 0:
            return 0.0
        return self.model_counts.get(tuple(sorted(int(j) for j in model)), 0) / self.retained_count

    def same_draws(self, other: "SampleStore") -> bool:
        """True when both stores hold identical draws and model index."""
        return (
            np.array_equal(self.z, other.z)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.sigma_r2, other.sigma_r2)
            and np.array_equal(self.sigma1_2, other.sigma1_2)
            and self.model_counts == other.model_counts
            and self.first_seen == other.first_seen
        )


class _DrawRecorder:
    def __init__(self, capacity: int, d: int) -> None:
        self.z = np.zeros((capacity, d), dtype=np.int8)
        self.beta = np.zeros((capacity, d))
        self.sigma_r2 = np.zeros(capacity)
        self.sigma1_2 = np.zeros(capacity)
        self.count = 0

    def record(self, state: ChainState) -> None:
        i = self.count
        self.z[i] = state.z
        self.beta[i] = state.beta
        self.sigma_r2[i] = state.sigma_r2
        self.sigma1_2[i] = state.sigma1_2
        self.count += 1


def _run(
    data: RegressionData,
    cfg: PriorConfig,
    settings: SamplerSettings,
    fixed_z: Optional[np.ndarray],
) -> SampleStore:
    rng = np.random.default_rng(settings.seed)
    state = initial_state(data, cfg, rng, z=fixed_z)
    recorder = _DrawRecorder(settings.retained_count, data.d)
    burn_in, thinning = settings.burn_in, settings.thinning
    proposals = transitions = exact_draws = 0

    for t in range(settings.iterations):
        try:
            draw = gibbs_sweep(state, data, cfg, settings, rng, update_z=fixed_z is None)
        except ChainAbortedError:
            raise
        except NumericalFailureError as e:
            logger.error("Chain aborted at iteration %d: %s", t, e.message)
            raise ChainAbortedError(t, e) from e
        proposals += draw.proposals
        transitions += draw.transitions
        exact_draws += draw.exact_draws
        if t >= burn_in and (t - burn_in + 1) % thinning == 0:
            recorder.record(state)
        if (t + 1) % 1000 == 0:
            logger.debug(
                "iteration %d/%d, model size %d, sigma_r2=%.4g",
                t + 1,
                settings.iterations,
                state.size,
                state.sigma_r2,
            )

    return SampleStore.from_draws(
        recorder.z,
        recorder.beta,
        recorder.sigma_r2,
        recorder.sigma1_2,
        delta=cfg.delta,
        mode=cfg.mode,
        seed=settings.seed,
        iterations=settings.iterations,
        burn_in=burn_in,
        thinning=thinning,
        slice_proposals=proposals,
        slice_transitions=transitions,
        slice_exact_draws=exact_draws,
        column_names=data.column_names,
    )


def run_chain(data: RegressionData, cfg: PriorConfig, settings: SamplerSettings) -> SampleStore:
    """
    Run ``settings.iterations`` sweeps from the all-null state.

    Deterministic given ``settings.seed``.

    Raises:
        ChainAbortedError: A conditional sampler failed; carries the iteration.
    """
    logger.info(
        "Starting chain: n=%d d=%d delta=%g mode=%s iterations=%d seed=%d",
        data.n,
        data.d,
        cfg.delta,
        cfg.mode.value,
        settings.iterations,
        settings.seed,
    )
    store = _run(data, cfg, settings, fixed_z=None)
    logger.info(
        "Chain finished: %d draws, %d models visited, slice acceptance %.3f, %d exact slice draws",
        store.retained_count,
        len(store.model_counts),
        store.slice_acceptance_rate,
        store.slice_exact_draws,
    )
    return store


def run_conditional_chain(
    data: RegressionData,
    cfg: PriorConfig,
    settings: SamplerSettings,
    z: Sequence[int],
) -> SampleStore:
    """Chain with the indicators held at ``z``; only ``beta`` and the variances move."""
    fixed = np.asarray(z, dtype=np.int8)
    if fixed.shape != (data.d,):
        raise InvalidArgumentError("z must have length d", argument="z", value=fixed.shape)
    logger.debug("Conditional chain on model %s (delta=%g)", model_key(fixed), cfg.delta)
    return _run(data, cfg, settings, fixed_z=fixed)
