"""
Exact samplers and log-normalizers for the distributions the model needs.

Four families only:

- normal truncated to the spike region ``[-delta, delta]`` (``Inner``)
- normal truncated to the slab region ``]-inf, -delta] U [delta, inf[`` (``Outer``)
- the untruncated normal (``Full``) and the Dirac spike at zero (``PointMass``)
- the scaled inverse chi-square ``Inv-chi2(nu, eta2)``

Everything is evaluated in the log domain. With a calibrated spike variance the
standardized distance from the mean to a truncation boundary routinely reaches
tens of standard deviations, where ``Phi`` itself underflows.

Example:
    >>> import numpy as np
    >>> from disjunct_bvs.distributions import SupportRegion, sample_trunc_norm
    >>> rng = np.random.default_rng(7)
    >>> x = sample_trunc_norm(SupportRegion.outer(0.5), mean=0.0, var=1e-4, rng=rng)
    >>> abs(x) >= 0.5
    True
"""

import functools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Tuple

import numpy as np
from scipy import integrate, optimize, special

from disjunct_bvs.exceptions import (
    CalibrationInfeasibleError,
    InvalidArgumentError,
    NumericalFailureError,
)

logger = logging.getLogger(__name__)

#: Proposals a single truncated-normal draw may use before it is declared stuck.
MAX_PROPOSALS = 1_000_000

#: Gamma upper-tail mass below which truncated draws switch from inversion to rejection.
GAMMA_TAIL_SWITCH = 1e-12

#: Relative accuracy required from the slab marginal quadrature.
QUAD_RELATIVE_TOLERANCE = 1e-8

#: A tail piece smaller than this fraction of the running integral ends the bracket growth.
QUAD_TAIL_FRACTION = 1e-12

#: Relative residual accepted from the spike-variance root solve (log domain).
CALIBRATION_TOLERANCE = 1e-9

#: Scale-free bracket for the spike variance, as multiples of delta**2.
CALIBRATION_BRACKET = (1e-12, 1e12)

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_SQRT2 = math.sqrt(2.0)
_LOG2 = math.log(2.0)
_MAX_DOUBLINGS = 7


# =============================================================================
# Support regions
# =============================================================================


class RegionKind(str, Enum):
    """Shape of a coefficient's prior support."""

    INNER = "inner"
    OUTER = "outer"
    FULL = "full"
    POINT_MASS = "point_mass"


@dataclass(frozen=True)
class SupportRegion:
    """
    Support of a spike or slab prior.

    ``Inner(0)`` is stored as ``PointMass`` and ``Outer(0)`` as ``Full``, so the
    degenerate cases compare equal and take the same code paths.
    """

    kind: RegionKind
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.delta) or self.delta < 0.0:
            raise InvalidArgumentError(
                "delta must be finite and non-negative", argument="delta", value=self.delta
            )
        if self.kind == RegionKind.INNER and self.delta == 0.0:
            object.__setattr__(self, "kind", RegionKind.POINT_MASS)
        elif self.kind == RegionKind.OUTER and self.delta == 0.0:
            object.__setattr__(self, "kind", RegionKind.FULL)
        if self.kind in (RegionKind.FULL, RegionKind.POINT_MASS):
            object.__setattr__(self, "delta", 0.0)

    @classmethod
    def inner(cls, delta: float) -> "SupportRegion":
        """``[-delta, delta]``."""
        return cls(RegionKind.INNER, float(delta))

    @classmethod
    def outer(cls, delta: float) -> "SupportRegion":
        """``]-inf, -delta] U [delta, inf[``."""
        return cls(RegionKind.OUTER, float(delta))

    @classmethod
    def full(cls) -> "SupportRegion":
        return cls(RegionKind.FULL)

    @classmethod
    def point_mass(cls) -> "SupportRegion":
        return cls(RegionKind.POINT_MASS)

    @property
    def is_point_mass(self) -> bool:
        return self.kind == RegionKind.POINT_MASS

    def contains(self, x: float) -> bool:
        """True when ``x`` lies in the (closed) region."""
        if self.kind == RegionKind.INNER:
            return abs(x) <= self.delta
        if self.kind == RegionKind.OUTER:
            return abs(x) >= self.delta
        if self.kind == RegionKind.POINT_MASS:
            return x == 0.0
        return math.isfinite(x)

    def contains_all(self, values: np.ndarray) -> bool:
        """Vectorized ``contains``; True for an empty array."""
        values = np.asarray(values, dtype=float)
        if self.kind == RegionKind.INNER:
            return bool(np.all(np.abs(values) <= self.delta))
        if self.kind == RegionKind.OUTER:
            return bool(np.all(np.abs(values) >= self.delta))
        if self.kind == RegionKind.POINT_MASS:
            return bool(np.all(values == 0.0))
        return bool(np.all(np.isfinite(values)))

    def __str__(self) -> str:
        if self.kind in (RegionKind.INNER, RegionKind.OUTER):
            return f"{self.kind.value}({self.delta:g})"
        return self.kind.value


# =============================================================================
# Log-domain Gaussian helpers
# =============================================================================


def _log_ndtr(x: float) -> float:
    return float(special.log_ndtr(x))


def _log1mexp(x: float) -> float:
    """``log(1 - exp(x))`` for ``x <= 0``."""
    if x >= 0.0:
        return -math.inf
    if x > -_LOG2:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _log_upper_tail_difference(a: float, b: float, width: float) -> float:
    """
    ``log(Phi(-a) - Phi(-b))`` for ``0 <= a < b`` with ``width = b - a``.

    Both tails are written as ``erfcx(x) * exp(-x**2) / 2``. Their ratio then
    depends on ``width`` and ``a + b`` only, so a window far out in the tail
    loses no precision however narrow it is.
    """
    x, y = a / _SQRT2, b / _SQRT2
    log_upper = math.log(0.5 * float(special.erfcx(x))) - x * x
    log_ratio = -0.5 * width * (a + b) + math.log(
        float(special.erfcx(y)) / float(special.erfcx(x))
    )
    return log_upper + _log1mexp(log_ratio)


def _log_interval_mass(a: float, b: float, width: float) -> float:
    """``log(Phi(b) - Phi(a))`` for standardized bounds ``a < b`` with ``width = b - a``."""
    if a >= 0.0:
        return _log_upper_tail_difference(a, b, width)
    if b <= 0.0:
        return _log_upper_tail_difference(-b, -a, width)
    # Straddles the mean: both erf terms are non-negative, no cancellation.
    return math.log(0.5 * (math.erf(b / _SQRT2) + math.erf(-a / _SQRT2)))


def _log_tails_mass(a: float, b: float) -> float:
    """``log(Phi(a) + 1 - Phi(b))`` for standardized bounds ``a < b``."""
    return float(np.logaddexp(_log_ndtr(a), _log_ndtr(-b)))


def _check_moments(mean: float, var: float) -> None:
    if not (math.isfinite(mean) and math.isfinite(var)):
        raise InvalidArgumentError(
            "mean and variance must be finite", argument="mean/var", value=(mean, var)
        )
    if var <= 0.0:
        raise InvalidArgumentError("variance must be positive", argument="var", value=var)


def _reject_point_mass(region: SupportRegion, operation: str) -> None:
    if region.is_point_mass:
        raise InvalidArgumentError(
            f"{operation} is undefined for the Dirac spike; branch on the point mass",
            argument="region",
            value=str(region),
        )


def log_trunc_norm_const(region: SupportRegion, mean: float, var: float) -> float:
    """
    Log of ``integral over region of exp(-(x - mean)**2 / (2 * var)) dx``.

    Args:
        region: Any region except the point mass.
        mean: Mean of the untruncated normal.
        var: Variance of the untruncated normal, finite and positive.

    Returns:
        The log normalizer. For ``Full`` this is ``log(sqrt(2 * pi * var))``.

    Raises:
        InvalidArgumentError: Non-finite inputs, non-positive variance, or a
            point-mass region.
    """
    _check_moments(mean, var)
    _reject_point_mass(region, "log_trunc_norm_const")

    log_scale = _LOG_SQRT_2PI + 0.5 * math.log(var)
    if region.kind == RegionKind.FULL:
        return log_scale

    sd = math.sqrt(var)
    a = (-region.delta - mean) / sd
    b = (region.delta - mean) / sd
    if region.kind == RegionKind.INNER:
        return log_scale + _log_interval_mass(a, b, 2.0 * region.delta / sd)
    return log_scale + _log_tails_mass(a, b)


# =============================================================================
# Truncated normal sampling
# =============================================================================


def _stuck(context: Dict[str, Any]) -> NumericalFailureError:
    return NumericalFailureError(
        f"Truncated normal sampler exceeded {MAX_PROPOSALS} proposals",
        operation="sample_trunc_norm",
        context=context,
    )


def _standard_tail(c: float, rng: np.random.Generator, context: Dict[str, Any]) -> float:
    """Draw ``Z ~ N(0, 1)`` conditioned on ``Z >= c``."""
    if c <= 0.0:
        # At least half the proposals land in the tail.
        for _ in range(MAX_PROPOSALS):
            z = rng.standard_normal()
            if z >= c:
                return float(z)
        raise _stuck(context)

    # Translated exponential with the optimal rate; acceptance stays above
    # 0.76 however far out c is.
    rate = 0.5 * (c + math.sqrt(c * c + 4.0))
    for _ in range(MAX_PROPOSALS):
        z = c + rng.exponential(1.0 / rate)
        if rng.random() <= math.exp(-0.5 * (z - rate) ** 2):
            return float(z)
    raise _stuck(context)


def _standard_interval(
    a: float, b: float, rng: np.random.Generator, context: Dict[str, Any]
) -> float:
    """Draw ``Z ~ N(0, 1)`` conditioned on ``a <= Z <= b``."""
    if b <= 0.0:
        return -_standard_interval(-b, -a, rng, context)

    width = b - a
    if a < 0.0:
        if width < _SQRT_2PI:
            for _ in range(MAX_PROPOSALS):
                z = a + width * rng.random()
                if rng.random() <= math.exp(-0.5 * z * z):
                    return z
        else:
            for _ in range(MAX_PROPOSALS):
                z = rng.standard_normal()
                if a <= z <= b:
                    return float(z)
        raise _stuck(context)

    if width * max(a, 1.0) < 1.0:
        # Narrow window: uniform proposals under the density at a.
        for _ in range(MAX_PROPOSALS):
            z = a + width * rng.random()
            if rng.random() <= math.exp(0.5 * (a * a - z * z)):
                return z
        raise _stuck(context)

    rate = 0.5 * (a + math.sqrt(a * a + 4.0))
    for _ in range(MAX_PROPOSALS):
        z = a + rng.exponential(1.0 / rate)
        if z <= b and rng.random() <= math.exp(-0.5 * (z - rate) ** 2):
            return float(z)
    raise _stuck(context)


def sample_trunc_norm(
    region: SupportRegion, mean: float, var: float, rng: np.random.Generator
) -> float:
    """
    Exact draw from ``N(mean, var)`` truncated to ``region``.

    Outer regions first pick a tail with its exact log-domain probability and
    then sample that one-sided tail, so no inverse CDF is ever evaluated.

    Raises:
        InvalidArgumentError: Bad moments or a point-mass region.
        NumericalFailureError: A rejection loop exceeded ``MAX_PROPOSALS``.
    """
    _check_moments(mean, var)
    _reject_point_mass(region, "sample_trunc_norm")

    sd = math.sqrt(var)
    if region.kind == RegionKind.FULL:
        return float(mean + sd * rng.standard_normal())

    delta = region.delta
    context = {"region": str(region), "mean": mean, "var": var}
    a = (-delta - mean) / sd
    b = (delta - mean) / sd

    if region.kind == RegionKind.INNER:
        x = mean + sd * _standard_interval(a, b, rng, context)
        return min(max(x, -delta), delta)

    log_left = _log_ndtr(a)
    log_right = _log_ndtr(-b)
    p_right = math.exp(log_right - float(np.logaddexp(log_left, log_right)))
    if rng.random() < p_right:
        return max(mean + sd * _standard_tail(b, rng, context), delta)
    return min(mean - sd * _standard_tail(-a, rng, context), -delta)


# =============================================================================
# Scaled inverse chi-square
# =============================================================================


@dataclass(frozen=True)
class ScaledInvChiSqParams:
    """
    Parameters of ``Inv-chi2(nu, eta2)``.

    ``nu`` reads as the number of a-priori observations and ``eta2`` as their
    variance. Equivalent to ``InvGamma(nu / 2, nu * eta2 / 2)``.
    """

    nu: float
    eta2: float

    def __post_init__(self) -> None:
        for name in ("nu", "eta2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise InvalidArgumentError(
                    f"{name} must be finite and positive", argument=name, value=value
                )

    @property
    def mode(self) -> float:
        return self.nu * self.eta2 / (self.nu + 2.0)

    @property
    def mean(self) -> float:
        """Finite only for ``nu > 2``."""
        if self.nu <= 2.0:
            return math.inf
        return self.nu * self.eta2 / (self.nu - 2.0)


def sample_scaled_inv_chisq(params: ScaledInvChiSqParams, rng: np.random.Generator) -> float:
    """Draw ``nu * eta2 / X`` with ``X ~ chi2(nu)``."""
    return float(params.nu * params.eta2 / rng.chisquare(params.nu))


def _gamma_upper_tail(shape: float, g0: float, rng: np.random.Generator) -> float:
    """Draw ``G ~ Gamma(shape, 1)`` conditioned on ``G >= g0``, with ``g0`` far in the tail."""
    # Translated exponential whose rate matches the log-density slope at g0.
    rate = 1.0 - max(shape - 1.0, 0.0) / g0
    for _ in range(MAX_PROPOSALS):
        g = g0 + rng.exponential(1.0 / rate)
        log_accept = (shape - 1.0) * math.log(g / g0) - (1.0 - rate) * (g - g0)
        if math.log1p(-rng.random()) <= log_accept:
            return float(g)
    raise NumericalFailureError(
        f"Gamma tail sampler exceeded {MAX_PROPOSALS} proposals",
        operation="sample_scaled_inv_chisq_below",
        context={"shape": shape, "lowerBound": g0},
    )


def sample_scaled_inv_chisq_below(
    params: ScaledInvChiSqParams, upper: float, rng: np.random.Generator
) -> float:
    """
    Exact draw from ``Inv-chi2(nu, eta2)`` restricted to ``(0, upper]``.

    With ``G = nu * eta2 / (2 * sigma2) ~ Gamma(nu / 2)`` the restriction reads
    ``G >= g0``. The upper tail is inverted with ``gammainccinv`` while its mass
    exceeds ``GAMMA_TAIL_SWITCH``; beyond that the tail is sampled by rejection.
    An infinite ``upper`` is the unrestricted draw.

    Raises:
        InvalidArgumentError: ``upper`` is not positive.
    """
    if not upper > 0.0:
        raise InvalidArgumentError("upper must be positive", argument="upper", value=upper)
    if math.isinf(upper):
        return sample_scaled_inv_chisq(params, rng)

    shape = 0.5 * params.nu
    scale = 0.5 * params.nu * params.eta2
    g0 = scale / upper
    tail = float(special.gammaincc(shape, g0))
    if tail > GAMMA_TAIL_SWITCH:
        # 1 - U lies in (0, 1], so the requested tail mass stays positive.
        g = float(special.gammainccinv(shape, tail * (1.0 - rng.random())))
    else:
        g = _gamma_upper_tail(shape, g0, rng)
    return scale / max(g, g0)


def scaled_inv_chisq_logpdf(sigma2: float, params: ScaledInvChiSqParams) -> float:
    """
    Log density of ``Inv-chi2(nu, eta2)`` at ``sigma2``.

    Raises:
        InvalidArgumentError: If ``sigma2`` is not a positive finite number.
    """
    if not (math.isfinite(sigma2) and sigma2 > 0.0):
        raise InvalidArgumentError(
            "sigma2 must be finite and positive", argument="sigma2", value=sigma2
        )
    half = 0.5 * params.nu
    return (
        half * math.log(params.eta2)
        + half * math.log(half)
        - float(special.gammaln(half))
        - (half + 1.0) * math.log(sigma2)
        - params.nu * params.eta2 / (2.0 * sigma2)
    )


# =============================================================================
# Slab marginal and spike calibration
# =============================================================================


def _integrate_log_scale(
    integrand: Callable[[float], float], center: float, half_width: float = 4.0
) -> Tuple[float, float]:
    """
    Integrate over ``u = log(sigma2)`` on a doubly-expanding bracket.

    Returns ``(value, error_estimate)``.
    """
    lo, hi = center - half_width, center + half_width
    total, error = integrate.quad(
        integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200, points=[center]
    )
    width = half_width
    for _ in range(_MAX_DOUBLINGS):
        floor = 1e-13 * abs(total)
        left, left_err = integrate.quad(
            integrand, lo - width, lo, epsabs=floor, epsrel=1e-10, limit=200
        )
        right, right_err = integrate.quad(
            integrand, hi, hi + width, epsabs=floor, epsrel=1e-10, limit=200
        )
        total += left + right
        error += left_err + right_err
        lo -= width
        hi += width
        width *= 2.0
        if left + right <= QUAD_TAIL_FRACTION * total:
            return total, error
    raise NumericalFailureError(
        "Quadrature bracket kept growing without the tails vanishing",
        operation="slab_marginal_density",
        context={"integral": total, "errorEstimate": error, "bracket": [lo, hi]},
    )


def slab_marginal_density(beta: float, nu1: float, eta1_2: float, delta: float) -> float:
    """
    Slab prior density of a coefficient with the slab variance integrated out.

    ``p(beta | slab) = integral N_outer(beta | 0, s2) * Inv-chi2(s2 | nu1, eta1_2) ds2``

    With ``delta = 0`` this is a Cauchy density with scale ``sqrt(eta1_2)``
    when ``nu1 = 1``.

    Raises:
        InvalidArgumentError: ``|beta| < delta`` or invalid hyperparameters.
        NumericalFailureError: The quadrature error estimate exceeds
            ``QUAD_RELATIVE_TOLERANCE`` of the value.
    """
    params = ScaledInvChiSqParams(nu1, eta1_2)
    if not (math.isfinite(delta) and delta >= 0.0):
        raise InvalidArgumentError("delta must be non-negative", argument="delta", value=delta)
    if not math.isfinite(beta) or abs(beta) < delta:
        raise InvalidArgumentError(
            "beta must lie in the slab region |beta| >= delta", argument="beta", value=beta
        )

    region = SupportRegion.outer(delta)
    half_beta_sq = 0.5 * beta * beta

    def integrand(u: float) -> float:
        var = math.exp(u)
        log_value = (
            -half_beta_sq / var
            - log_trunc_norm_const(region, 0.0, var)
            + scaled_inv_chisq_logpdf(var, params)
            + u
        )
        return math.exp(log_value)

    value, error = _integrate_log_scale(integrand, center=math.log(params.mode))
    if not (value > 0.0 and math.isfinite(value)) or error > QUAD_RELATIVE_TOLERANCE * value:
        raise NumericalFailureError(
            "Slab marginal quadrature did not reach the required accuracy",
            operation="slab_marginal_density",
            context={"integral": value, "errorEstimate": error},
        )
    return value


def spike_boundary_log_density(delta: float, sigma0_2: float) -> float:
    """Log density of ``N_[-delta, delta](0, sigma0_2)`` at its boundary ``delta``."""
    return -0.5 * delta * delta / sigma0_2 - log_trunc_norm_const(
        SupportRegion.inner(delta), 0.0, sigma0_2
    )


def spike_boundary_density(delta: float, sigma0_2: float) -> float:
    return math.exp(spike_boundary_log_density(delta, sigma0_2))


@functools.lru_cache(maxsize=256)
def calibrate_sigma0(delta: float, nu1: float, eta1_2: float) -> float:
    """
    Spike variance that makes spike and slab densities equal at ``delta``.

    The spike boundary density rises monotonically from 0 to ``1/(2*delta)``
    as the variance grows, so the root on the bracket is unique.

    Args:
        delta: Practical-relevance threshold, strictly positive.
        nu1: Slab hyper-prior degrees of freedom.
        eta1_2: Slab hyper-prior scale.

    Returns:
        The calibrated spike variance ``sigma0_2``.

    Raises:
        InvalidArgumentError: ``delta <= 0``; the Dirac spike has no variance.
        CalibrationInfeasibleError: The slab density at ``delta`` reaches the
            spike supremum ``1/(2*delta)``.
        NumericalFailureError: The root solve missed ``CALIBRATION_TOLERANCE``.
    """
    if not (math.isfinite(delta) and delta > 0.0):
        raise InvalidArgumentError(
            "calibration needs delta > 0; delta = 0 uses the Dirac spike",
            argument="delta",
            value=delta,
        )

    slab = slab_marginal_density(delta, nu1, eta1_2, delta)
    if slab >= 1.0 / (2.0 * delta):
        raise CalibrationInfeasibleError(delta, slab)
    target = math.log(slab)

    def residual(log_var: float) -> float:
        return spike_boundary_log_density(delta, math.exp(log_var)) - target

    lo = math.log(CALIBRATION_BRACKET[0] * delta * delta)
    hi = math.log(CALIBRATION_BRACKET[1] * delta * delta)
    if residual(hi) <= 0.0:
        raise CalibrationInfeasibleError(delta, slab)
    if residual(lo) >= 0.0:
        raise NumericalFailureError(
            "Spike density at the lower bracket already exceeds the slab density",
            operation="calibrate_sigma0",
            context={"delta": delta, "slabDensity": slab},
        )

    root = optimize.brentq(
        residual, lo, hi, xtol=1e-13, rtol=4.0 * np.finfo(float).eps, maxiter=500
    )
    achieved = abs(residual(root))
    if achieved > CALIBRATION_TOLERANCE:
        raise NumericalFailureError(
            "Spike variance root solve missed its tolerance",
            operation="calibrate_sigma0",
            context={"delta": delta, "residual": achieved},
        )

    sigma0_2 = math.exp(root)
    logger.debug("Calibrated sigma0^2=%.6g for delta=%g (slab density %.6g)", sigma0_2, delta, slab)
    return sigma0_2
