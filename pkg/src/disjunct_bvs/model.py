"""
The hierarchical regression model: data with sufficient statistics, the
indicator prior and the joint log-density.

The joint is what every conditional sampler in ``disjunct_bvs.gibbs`` is
checked against: the ratio of a conditional density at two points must equal
the ratio of joint densities at the two corresponding states.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import special

from disjunct_bvs.config import PriorConfig
from disjunct_bvs.distributions import log_trunc_norm_const, scaled_inv_chisq_logpdf
from disjunct_bvs.exceptions import DataValidationError, InvalidArgumentError

_LOG_2PI = math.log(2.0 * math.pi)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RegressionData:
    """
    Design matrix, response and their sufficient statistics.

    Build it with ``RegressionData.from_arrays``; the constructor checks that
    ``gram``, ``xty`` and ``yty`` agree with ``X`` and ``y``.
    """

    X: np.ndarray
    y: np.ndarray
    gram: np.ndarray
    xty: np.ndarray
    yty: float
    column_names: Tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        X, y = self.X, self.y
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataValidationError(
                f"X must be n x d and y length n; got X{X.shape}, y{y.shape}"
            )
        d = X.shape[1]
        if self.gram.shape != (d, d) or self.xty.shape != (d,):
            raise DataValidationError("Sufficient statistics do not match the design shape")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataValidationError("X and y must be finite")
        if not self.column_names:
            object.__setattr__(self, "column_names", tuple(f"x{j + 1}" for j in range(d)))
        elif len(self.column_names) != d:
            raise DataValidationError("column_names must have one entry per column")

        scale = max(1.0, float(np.max(np.abs(self.gram), initial=0.0)))
        if not np.allclose(self.gram, X.T @ X, rtol=1e-10, atol=1e-10 * scale):
            raise DataValidationError("gram is inconsistent with X")
        if not np.allclose(self.xty, X.T @ y, rtol=1e-10, atol=1e-10 * scale):
            raise DataValidationError("xty is inconsistent with X and y")
        if not math.isclose(self.yty, float(y @ y), rel_tol=1e-10, abs_tol=1e-10):
            raise DataValidationError("yty is inconsistent with y")
        if not np.array_equal(self.gram, self.gram.T):
            raise DataValidationError("gram must be symmetric")
        if d and float(np.linalg.eigvalsh(self.gram)[0]) < -1e-9 * scale:
            raise DataValidationError("gram must be positive semi-definite")

    @classmethod
    def from_arrays(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        column_names: Optional[Sequence[str]] = None,
    ) -> "RegressionData":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise DataValidationError(
                f"X must be n x d and y length n; got X{X.shape}, y{y.shape}"
            )
        gram = X.T @ X
        # Exact symmetry; the product is symmetric only up to rounding.
        gram = 0.5 * (gram + gram.T)
        return cls(
            X=_frozen(X),
            y=_frozen(y),
            gram=_frozen(gram),
            xty=_frozen(X.T @ y),
            yty=float(y @ y),
            column_names=tuple(column_names) if column_names is not None else (),
        )

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])

    def restrict(self, columns: Sequence[int]) -> "RegressionData":
        """Data restricted to the given covariate columns, in the given order."""
        idx = np.asarray(list(columns), dtype=int)
        return RegressionData.from_arrays(
            self.X[:, idx], self.y, [self.column_names[j] for j in idx]
        )


@dataclass
class ChainState:
    """One Gibbs state. Owned by a single chain and updated in place."""

    beta: np.ndarray
    z: np.ndarray
    sigma_r2: float
    sigma1_2: float

    def __post_init__(self) -> None:
        self.beta = np.array(self.beta, dtype=float)
        self.z = np.array(self.z, dtype=np.int8)
        if self.beta.shape != self.z.shape or self.beta.ndim != 1:
            raise InvalidArgumentError(
                "beta and z must be vectors of equal length",
                argument="state",
                value=(self.beta.shape, self.z.shape),
            )

    @property
    def d(self) -> int:
        return int(self.z.shape[0])

    @property
    def size(self) -> int:
        """Number of slab coordinates."""
        return int(self.z.sum())

    def selected(self) -> Tuple[int, ...]:
        return tuple(int(j) for j in np.flatnonzero(self.z))

    def copy(self) -> "ChainState":
        return ChainState(self.beta.copy(), self.z.copy(), self.sigma_r2, self.sigma1_2)


def log_prior_of_size(s: int, d: int) -> float:
    """Prior log-probability of one specific indicator vector with ``s`` ones."""
    if not 0 <= s <= d:
        raise InvalidArgumentError("model size must lie in [0, d]", argument="s", value=s)
    log_binom = special.gammaln(d + 1) - special.gammaln(s + 1) - special.gammaln(d - s + 1)
    return float(-math.log(d + 1) - log_binom)


def log_prior_indicator(z: Sequence[int], d: int) -> float:
    """
    Multiplicity-control prior of an indicator vector.

    ``-log(d + 1) - log C(d, s)``: a uniform prior on the model size with the
    mass of each size spread evenly over its ``C(d, s)`` vectors.
    """
    z = np.asarray(z)
    if z.shape != (d,):
        raise InvalidArgumentError("z must have length d", argument="z", value=z.shape)
    return log_prior_of_size(int(np.count_nonzero(z)), d)


def residual_sum_squares(state: ChainState, data: RegressionData) -> float:
    """``||y - X beta||**2`` from sufficient statistics, clipped at zero."""
    beta = state.beta
    if beta.shape != (data.d,):
        raise InvalidArgumentError(
            "beta does not match the design", argument="beta", value=beta.shape
        )
    rss = data.yty - 2.0 * float(beta @ data.xty) + float(beta @ data.gram @ beta)
    return max(rss, 0.0)


def log_joint_density(state: ChainState, data: RegressionData, cfg: PriorConfig) -> float:
    """
    Log of the joint density of ``(beta, sigma_r2, sigma1_2, y, z)`` given ``X``.

    Includes the ``-n/2 * log(2*pi)`` constant, so values (not only
    differences) compare across configurations with equal ``n``.

    Returns:
        The log density, or ``-inf`` when a coefficient lies outside the
        support its indicator assigns it.
    """
    if state.d != data.d:
        raise InvalidArgumentError(
            "state dimension does not match the data", argument="state", value=state.d
        )
    spike, slab = cfg.spike_region(), cfg.slab_region()
    in_slab = state.z.astype(bool)
    beta_slab = state.beta[in_slab]
    beta_spike = state.beta[~in_slab]
    if not (slab.contains_all(beta_slab) and spike.contains_all(beta_spike)):
        return -math.inf

    sigma_r2, sigma1_2 = state.sigma_r2, state.sigma1_2
    total = log_prior_indicator(state.z, data.d)
    total += -0.5 * data.n * (_LOG_2PI + math.log(sigma_r2))
    total -= residual_sum_squares(state, data) / (2.0 * sigma_r2)
    total += scaled_inv_chisq_logpdf(sigma_r2, cfg.noise_prior)
    total += scaled_inv_chisq_logpdf(sigma1_2, cfg.slab_prior)

    if beta_slab.size:
        total -= float(beta_slab @ beta_slab) / (2.0 * sigma1_2)
        total -= beta_slab.size * log_trunc_norm_const(slab, 0.0, sigma1_2)
    if beta_spike.size and not spike.is_point_mass:
        sigma0_2 = cfg.spike_variance
        total -= float(beta_spike @ beta_spike) / (2.0 * sigma0_2)
        total -= beta_spike.size * log_trunc_norm_const(spike, 0.0, sigma0_2)
    return total
