"""
Pydantic models for the machine-readable reports.

Every report carries ``schema_version`` and no wall-clock data, so two runs
with the same seed and configuration serialize to byte-identical JSON via
``to_json()``.

Infinite values (a Bayes factor whose alternative was never visited) are
written as the strings ``"inf"`` and ``"-inf"`` and read back as floats.
"""

import json
import math
from typing import Annotated, Any, Dict, List, Optional

from pydantic import (
    BaseModel,
    BeforeValidator,
    Field,
    PlainSerializer,
    ValidationInfo,
    field_validator,
)

SCHEMA_VERSION = 1


def _parse_extended(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("inf", "+inf", "-inf"):
        return float(value)
    return value


def _dump_extended(value: float) -> Any:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


#: Float that survives JSON with infinities written as strings.
ExtendedFloat = Annotated[
    float,
    BeforeValidator(_parse_extended),
    PlainSerializer(_dump_extended, when_used="json"),
]


class _Report(BaseModel):
    """Base for top-level reports."""

    schema_version: int = Field(default=SCHEMA_VERSION, description="Report schema version")

    @field_validator("schema_version")
    @classmethod
    def validate_schema_version(cls, v: int) -> int:
        if v != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema_version: {v}. Expected: {SCHEMA_VERSION}")
        return v

    def to_json(self) -> str:
        """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


# =============================================================================
# Posterior summaries
# =============================================================================


class ModelFrequency(BaseModel):
    """One visited model and how often the chain was in it."""

    indices: List[int] = Field(..., description="0-based covariate indices in the slab")
    variables: List[str] = Field(..., description="Covariate names, same order as indices")
    frequency: float = Field(..., ge=0.0, le=1.0, description="Share of retained draws")
    count: int = Field(..., ge=0, description="Retained draws in this model")


class DeltaRecord(BaseModel):
    """Evaluation of one delta in the delta-selection sweep."""

    delta: float = Field(..., ge=0.0)
    indices: List[int] = Field(..., description="Most frequent model at this delta (0-based)")
    variables: List[str]
    size: int = Field(..., ge=0, description="Number of covariates in the model")
    mse_delta: float = Field(..., description="Mean noise variance given the selected model")
    expected_increase: float = Field(..., description="mse_delta / mse_bma - 1")
    slice_acceptance_rate: float = Field(..., ge=0.0, le=1.0)

    @field_validator("size")
    @classmethod
    def validate_size(cls, v: int, info: ValidationInfo) -> int:
        indices = info.data.get("indices")
        if indices is not None and v != len(indices):
            raise ValueError(f"size {v} does not match {len(indices)} indices")
        return v


class PosteriorReport(_Report):
    """
    Output of ``fit`` and ``select-delta``.

    For ``delta > 0`` the inclusion probabilities are the posterior
    probabilities that a coefficient exceeds ``delta`` in magnitude.
    """

    command: str
    version: str = Field(..., description="disjunct-bvs version that produced the report")
    run_config: Dict[str, Any]
    prior: Dict[str, Any] = Field(..., description="Hyperparameters; sigma0_2 absent for delta=0")
    n: int = Field(..., ge=0)
    d: int = Field(..., ge=0)
    column_names: List[str]
    normalization: Optional[Dict[str, Any]] = None

    retained_draws: int = Field(..., ge=0)
    inclusion_probabilities: List[float]
    posterior_mean_beta: List[float]
    top_models: List[ModelFrequency]
    slice_acceptance_rate: float = Field(..., ge=0.0, le=1.0)

    mse_bma: Optional[float] = None
    delta_records: List[DeltaRecord] = Field(default_factory=list)
    selected_delta: Optional[float] = None
    selected_model: Optional[List[int]] = None
    selection_fallback: bool = Field(
        default=False, description="True when no delta met the threshold"
    )

    @field_validator("inclusion_probabilities")
    @classmethod
    def validate_probabilities(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= p <= 1.0 for p in v):
            raise ValueError("inclusion probabilities must lie in [0, 1]")
        return v

    @field_validator("top_models")
    @classmethod
    def validate_ranking(cls, v: List[ModelFrequency]) -> List[ModelFrequency]:
        freqs = [m.frequency for m in v]
        if any(a < b for a, b in zip(freqs, freqs[1:])):
            raise ValueError("top_models must be ordered by non-increasing frequency")
        if sum(freqs) > 1.0 + 1e-9:
            raise ValueError("top_models frequencies sum above 1")
        return v


# =============================================================================
# Benchmarks
# =============================================================================


class SelectionRecord(BaseModel):
    """One repetition of the selection benchmark at one prior delta."""

    regime: str
    n: int
    eta: float
    repetition: int
    seed: int
    delta: Optional[float] = Field(..., description="Prior delta; None for the selected row")
    selected_by_threshold: bool = False
    chosen_delta: Optional[float] = None
    f1: float = Field(..., ge=0.0, le=1.0)
    selected_count: int = Field(..., ge=0)
    indices: List[int]


class SelectionCell(BaseModel):
    """Aggregate over repetitions of one (regime, n, eta, delta) cell."""

    regime: str
    n: int
    eta: float
    delta: Optional[float]
    selected_by_threshold: bool = False
    repetitions: int
    mean_f1: float
    std_f1: Optional[float] = None
    mean_selected: float
    std_selected: Optional[float] = None


class SelectionReport(_Report):
    command: str = "synth"
    version: str
    run_config: Dict[str, Any]
    eval_delta: float
    cells: List[SelectionCell]
    records: List[SelectionRecord]


class BayesFactorRecord(BaseModel):
    """Bayes factor of the true model against the runner-up in one repetition."""

    regime: str
    n: int
    eta: float
    mode: str
    repetition: int
    seed: int
    log_bf: ExtendedFloat
    true_model: List[int]
    alternative: Optional[List[int]] = Field(
        None, description="Runner-up model; None when the chain never left the true model"
    )


class BayesFactorCell(BaseModel):
    """
    Aggregate of one (regime, n, eta, mode) cell.

    Infinite Bayes factors are counted in ``infinite_count`` and left out of
    the mean and standard deviation.
    """

    regime: str
    n: int
    eta: float
    mode: str
    repetitions: int
    infinite_count: int
    mean_bf: Optional[ExtendedFloat] = None
    std_bf: Optional[ExtendedFloat] = None
    median_log_bf: ExtendedFloat


class BayesFactorReport(_Report):
    command: str = "bf"
    version: str
    run_config: Dict[str, Any]
    delta: float
    cells: List[BayesFactorCell]
    records: List[BayesFactorRecord]
