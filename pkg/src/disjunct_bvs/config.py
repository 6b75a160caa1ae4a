"""
Configuration classes for disjunct-bvs.

Three layers:

- ``PriorConfig``: hyperparameters of the hierarchical model, including the
  calibrated spike variance.
- ``SamplerSettings``: chain length, burn-in, thinning, slice-sampler limits
  and the 64-bit seed.
- ``RunConfig``: everything a CLI invocation needs. It is written next to
  every report so a run can be repeated from its output alone.

Precedence for ``RunConfig`` values is: explicit flag, config file,
``DBVS_*`` environment variable, built-in default.
"""

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from disjunct_bvs.distributions import ScaledInvChiSqParams, SupportRegion, calibrate_sigma0
from disjunct_bvs.exceptions import ConfigurationError

#: Delta grid used by delta selection and the benchmarks.
DEFAULT_DELTA_GRID = (0.8, 0.5, 0.05, 0.01, 0.001, 0.0)

_UINT64_MAX = 2**64 - 1


class PriorMode(str, Enum):
    """Whether spike and slab live on disjunct regions or both on the real line."""

    DISJUNCT = "disjunct"
    FULL = "full"


@dataclass(frozen=True)
class PriorConfig:
    """
    Hyperparameters of the spike-and-slab regression model.

    Attributes:
        delta: Practical-relevance threshold. ``0`` selects the Dirac spike.
        nu_r: Degrees of freedom of the response-noise prior.
        eta_r2: Scale of the response-noise prior.
        nu1: Degrees of freedom of the slab-variance prior.
        eta1_2: Scale of the slab-variance prior.
        sigma0_2: Spike variance; required when ``delta > 0``, ignored otherwise.
        mode: ``DISJUNCT`` truncates spike and slab to ``[-delta, delta]`` and
            its complement; ``FULL`` keeps both untruncated with the same
            variances.
    """

    delta: float = 0.0
    nu_r: float = 1.0
    eta_r2: float = 1.0
    nu1: float = 1.0
    eta1_2: float = 100.0
    sigma0_2: Optional[float] = None
    mode: PriorMode = PriorMode.DISJUNCT

    def __post_init__(self) -> None:
        if not (math.isfinite(self.delta) and self.delta >= 0.0):
            raise ConfigurationError("delta must be finite and >= 0", config_key="delta")
        for key in ("nu_r", "eta_r2", "nu1", "eta1_2"):
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0.0):
                raise ConfigurationError(f"{key} must be finite and > 0", config_key=key)
        object.__setattr__(self, "mode", PriorMode(self.mode))

        if self.delta == 0.0:
            object.__setattr__(self, "sigma0_2", None)
        elif self.sigma0_2 is None:
            raise ConfigurationError(
                "sigma0_2 is required for delta > 0; use PriorConfig.calibrated()",
                config_key="sigma0_2",
            )
        elif not (math.isfinite(self.sigma0_2) and self.sigma0_2 > 0.0):
            raise ConfigurationError("sigma0_2 must be finite and > 0", config_key="sigma0_2")

    @classmethod
    def calibrated(
        cls,
        delta: float,
        *,
        nu_r: float = 1.0,
        eta_r2: float = 1.0,
        nu1: float = 1.0,
        eta1_2: float = 100.0,
        mode: Union[PriorMode, str] = PriorMode.DISJUNCT,
    ) -> "PriorConfig":
        """
        Build a config whose spike variance matches the slab density at ``delta``.

        Full-support mode reuses the disjunct calibration.

        Raises:
            CalibrationInfeasibleError: No spike variance satisfies the constraint.
        """
        sigma0_2 = calibrate_sigma0(delta, nu1, eta1_2) if delta > 0.0 else None
        return cls(
            delta=delta,
            nu_r=nu_r,
            eta_r2=eta_r2,
            nu1=nu1,
            eta1_2=eta1_2,
            sigma0_2=sigma0_2,
            mode=PriorMode(mode),
        )

    def with_delta(self, delta: float) -> "PriorConfig":
        """Same hyperparameters, recalibrated for another delta."""
        return PriorConfig.calibrated(
            delta,
            nu_r=self.nu_r,
            eta_r2=self.eta_r2,
            nu1=self.nu1,
            eta1_2=self.eta1_2,
            mode=self.mode,
        )

    def with_mode(self, mode: Union[PriorMode, str]) -> "PriorConfig":
        return replace(self, mode=PriorMode(mode))

    @property
    def is_dirac(self) -> bool:
        return self.delta == 0.0

    @property
    def spike_variance(self) -> float:
        if self.sigma0_2 is None:
            raise ConfigurationError("delta=0 has no spike variance", config_key="sigma0_2")
        return self.sigma0_2

    @property
    def noise_prior(self) -> ScaledInvChiSqParams:
        return ScaledInvChiSqParams(self.nu_r, self.eta_r2)

    @property
    def slab_prior(self) -> ScaledInvChiSqParams:
        return ScaledInvChiSqParams(self.nu1, self.eta1_2)

    def spike_region(self) -> SupportRegion:
        if self.is_dirac:
            return SupportRegion.point_mass()
        if self.mode == PriorMode.FULL:
            return SupportRegion.full()
        return SupportRegion.inner(self.delta)

    def slab_region(self) -> SupportRegion:
        if self.mode == PriorMode.FULL:
            return SupportRegion.full()
        return SupportRegion.outer(self.delta)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "delta": self.delta,
            "nu_r": self.nu_r,
            "eta_r2": self.eta_r2,
            "nu1": self.nu1,
            "eta1_2": self.eta1_2,
            "mode": self.mode.value,
        }
        if self.sigma0_2 is not None:
            data["sigma0_2"] = self.sigma0_2
        return data


@dataclass(frozen=True)
class SamplerSettings:
    """
    Gibbs chain settings.

    Attributes:
        iterations: Total sweeps ``M``, burn-in included.
        burn_in_fraction: Share of sweeps discarded, ``0 <= f < 1``.
        seed: Unsigned 64-bit master seed of the chain's random stream.
        slice_burn_in: Slice transitions per slab-variance update.
        slice_rejection_cap: Conjugate proposals a slice transition tries before it
            switches to an exact draw from the slice.
        thinning: Keep every ``thinning``-th post-burn-in sweep.
    """

    iterations: int = 10_000
    burn_in_fraction: float = 0.10
    seed: int = 0
    slice_burn_in: int = 10
    slice_rejection_cap: int = 10_000
    thinning: int = 1

    def __post_init__(self) -> None:
        if self.iterations < 10:
            raise ConfigurationError("iterations must be >= 10", config_key="iterations")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ConfigurationError(
                "burn_in_fraction must satisfy 0 <= f < 1", config_key="burn_in_fraction"
            )
        if not 0 <= self.seed <= _UINT64_MAX:
            raise ConfigurationError("seed must be an unsigned 64-bit integer", config_key="seed")
        if self.slice_burn_in < 1:
            raise ConfigurationError("slice_burn_in must be >= 1", config_key="slice_burn_in")
        if self.slice_rejection_cap < 1:
            raise ConfigurationError(
                "slice_rejection_cap must be >= 1", config_key="slice_rejection_cap"
            )
        if self.thinning < 1:
            raise ConfigurationError("thinning must be >= 1", config_key="thinning")

    @property
    def burn_in(self) -> int:
        return int(math.floor(self.burn_in_fraction * self.iterations))

    @property
    def retained_count(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning

    def with_seed(self, seed: int) -> "SamplerSettings":
        return replace(self, seed=int(seed))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunConfig:
    """
    Parameters of one CLI invocation.

    ``to_dict()`` and ``from_dict()`` round-trip exactly; the dict form is what
    reports embed under ``run_config``.
    """

    command: str = "fit"

    # Data
    input: Optional[str] = None
    response: Optional[str] = None
    output: Optional[str] = None
    normalize: bool = True
    response_variance: float = 30.0
    log_response: bool = False
    interactions: bool = False

    # Prior
    delta: float = 0.5
    delta_grid: List[float] = field(default_factory=lambda: list(DEFAULT_DELTA_GRID))
    mode: str = PriorMode.DISJUNCT.value
    nu_r: float = 1.0
    eta_r2: float = 1.0
    nu1: float = 1.0
    eta1_2: float = 100.0

    # Sampler
    iterations: int = 10_000
    burn_in: float = 0.10
    thinning: int = 1
    seed: int = 0
    jobs: int = 1

    # Analysis
    threshold: float = 0.05
    top_k: int = 10
    prior_correction: bool = True

    # Benchmarks
    regime: str = "low"
    n_grid: List[int] = field(default_factory=lambda: [100, 1000])
    eta_grid: List[float] = field(default_factory=lambda: [0.0])
    repetitions: int = 10
    with_selection: bool = False
    eval_delta: float = 0.5

    def __post_init__(self) -> None:
        """Validate configuration after initialization."""
        if self.mode not in {m.value for m in PriorMode}:
            raise ConfigurationError(
                f"Unknown mode: {self.mode}. Expected: disjunct or full", config_key="mode"
            )
        if self.regime not in ("low", "high"):
            raise ConfigurationError(
                f"Unknown regime: {self.regime}. Expected: low or high", config_key="regime"
            )
        if not self.delta_grid:
            raise ConfigurationError("delta_grid must not be empty", config_key="delta_grid")
        if any(d < 0 for d in self.delta_grid) or self.delta < 0:
            raise ConfigurationError("deltas must be >= 0", config_key="delta")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1", config_key="jobs")
        if self.top_k < 1:
            raise ConfigurationError("top_k must be >= 1", config_key="top_k")
        if self.repetitions < 1:
            raise ConfigurationError("repetitions must be >= 1", config_key="repetitions")
        if self.threshold < 0:
            raise ConfigurationError("threshold must be >= 0", config_key="threshold")
        if not self.response_variance > 0:
            raise ConfigurationError(
                "response_variance must be > 0", config_key="response_variance"
            )
        # Surface sampler-setting errors at load time.
        self.sampler_settings()

    def prior_config(self, delta: Optional[float] = None) -> PriorConfig:
        """Calibrated prior for ``delta`` (defaults to ``self.delta``)."""
        return PriorConfig.calibrated(
            self.delta if delta is None else delta,
            nu_r=self.nu_r,
            eta_r2=self.eta_r2,
            nu1=self.nu1,
            eta1_2=self.eta1_2,
            mode=self.mode,
        )

    def sampler_settings(self, seed: Optional[int] = None) -> SamplerSettings:
        return SamplerSettings(
            iterations=self.iterations,
            burn_in_fraction=self.burn_in,
            seed=self.seed if seed is None else seed,
            thinning=self.thinning,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Convert configuration to dictionary."""
        data = asdict(self)
        data["delta_grid"] = [float(d) for d in self.delta_grid]
        data["eta_grid"] = [float(e) for e in self.eta_grid]
        data["n_grid"] = [int(n) for n in self.n_grid]
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigurationError(
                f"Unknown configuration keys: {', '.join(unknown)}", config_key=unknown[0]
            )
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "RunConfig":
        """Load a JSON config file."""
        return cls.from_dict(load_config_file(path))

    @staticmethod
    def env_overrides() -> Dict[str, Any]:
        """
        Values taken from the environment.

        Environment variables:
            DBVS_ITERATIONS: Total sweeps per chain
            DBVS_BURN_IN: Burn-in fraction
            DBVS_SEED: Master seed
            DBVS_JOBS: Worker processes
            DBVS_MODE: Prior mode (disjunct or full)
        """
        parsers = {
            "DBVS_ITERATIONS": ("iterations", int),
            "DBVS_BURN_IN": ("burn_in", float),
            "DBVS_SEED": ("seed", int),
            "DBVS_JOBS": ("jobs", int),
            "DBVS_MODE": ("mode", str),
        }
        values: Dict[str, Any] = {}
        for env_key, (key, parse) in parsers.items():
            raw = os.environ.get(env_key)
            if raw is None or raw == "":
                continue
            try:
                values[key] = parse(raw)
            except ValueError as e:
                raise ConfigurationError(f"{env_key}={raw!r} is invalid", config_key=key) from e
        return values

    @classmethod
    def from_env(cls) -> "RunConfig":
        """Create configuration from ``DBVS_*`` environment variables."""
        return cls.from_dict(cls.env_overrides())


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"Config file {path} must contain a JSON object")
    return data
