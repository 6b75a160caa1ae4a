"""
CSV ingestion and preprocessing for real data.

Input is UTF-8 CSV with a header row, comma delimiter and '.' decimals. One
column is the response (the last one unless named); every other column is a
covariate. Row numbers in errors count the header as row 1.

Normalization uses the population (1/n) variance: covariates to mean 0 and
variance 1, the response to mean 0 and variance ``response_variance``
(30 by default).
"""

import itertools
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from disjunct_bvs.exceptions import DataParseError, DataValidationError
from disjunct_bvs.model import RegressionData

logger = logging.getLogger(__name__)

DEFAULT_RESPONSE_VARIANCE = 30.0

_LINE_RE = re.compile(r"line (\d+)")


@dataclass(frozen=True)
class LoadedTable:
    X: np.ndarray
    y: np.ndarray
    covariates: Tuple[str, ...]
    response: str


@dataclass(frozen=True)
class NormalizationInfo:
    """What ``normalize`` did, written into reports."""

    covariate_means: Tuple[float, ...]
    covariate_scales: Tuple[float, ...]
    response_mean: float
    response_scale: float
    response_variance: float
    convention: str = "population"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "convention": self.convention,
            "covariate_means": list(self.covariate_means),
            "covariate_scales": list(self.covariate_scales),
            "response_mean": self.response_mean,
            "response_scale": self.response_scale,
            "response_variance": self.response_variance,
        }


def _read_frame(path: Union[str, Path]) -> pd.DataFrame:
    try:
        return pd.read_csv(path, sep=",", decimal=".", encoding="utf-8", dtype=str)
    except FileNotFoundError as e:
        raise DataParseError(f"Input file not found: {path}") from e
    except pd.errors.EmptyDataError as e:
        raise DataParseError(f"Input file is empty: {path}") from e
    except pd.errors.ParserError as e:
        match = _LINE_RE.search(str(e))
        row = int(match.group(1)) if match else None
        raise DataParseError(f"Malformed CSV: {e}", row=row) from e
    except UnicodeDecodeError as e:
        raise DataParseError(f"Input is not UTF-8: {e}") from e
    except OSError as e:
        raise DataParseError(f"Cannot read {path}: {e}") from e


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column]
    values = pd.to_numeric(raw.str.strip(), errors="coerce")
    # "inf" and "nan" parse as floats but are not usable observations.
    bad = ~np.isfinite(values.to_numpy(dtype=float))
    if bad.any():
        position = int(np.flatnonzero(bad)[0])
        cell = raw.iloc[position]
        empty = pd.isna(cell) or str(cell).strip() == ""
        what = "Empty cell" if empty else f"Non-numeric or non-finite cell {cell!r}"
        raise DataParseError(
            f"{what} in column {column!r} at row {position + 2}",
            row=position + 2,
            column=column,
        )
    return values.to_numpy(dtype=float)


def load_csv(
    path: Union[str, Path],
    response: Optional[str] = None,
    log_response: bool = False,
) -> LoadedTable:
    """
    Read a numeric CSV into covariates and response.

    Args:
        path: CSV file.
        response: Response column name; the last column when omitted.
        log_response: Replace the response by its natural log.

    Raises:
        DataParseError: Unreadable file, ragged rows, non-numeric or non-finite cells.
        DataValidationError: Unknown response column, no covariates, or a
            non-positive response under ``log_response``.
    """
    frame = _read_frame(path)
    columns = [str(c) for c in frame.columns]
    if len(columns) < 2:
        raise DataValidationError("Need a response column and at least one covariate")
    if response is None:
        response = columns[-1]
    elif response not in columns:
        raise DataValidationError(f"Response column {response!r} not found", column=response)

    covariates = [c for c in columns if c != response]
    y = _numeric_column(frame, response)
    X = (
        np.column_stack([_numeric_column(frame, c) for c in covariates])
        if len(frame)
        else np.zeros((0, len(covariates)))
    )

    if log_response:
        if np.any(y <= 0.0):
            raise DataValidationError(
                "log-transforming the response needs strictly positive values", column=response
            )
        y = np.log(y)

    logger.info(
        "Loaded %s: %d rows, %d covariates, response %r", path, len(y), len(covariates), response
    )
    return LoadedTable(X=X, y=y, covariates=tuple(covariates), response=response)


def expand_interactions(
    X: np.ndarray, names: Sequence[str]
) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    Append every square and pairwise product of the columns.

    ``a.b`` names the product of columns ``a`` and ``b``, in column order.
    """
    pairs = list(itertools.combinations_with_replacement(range(X.shape[1]), 2))
    products = [X[:, i] * X[:, j] for i, j in pairs]
    expanded = np.column_stack([X, *products]) if products else X
    return expanded, tuple(names) + tuple(f"{names[i]}.{names[j]}" for i, j in pairs)


def normalize(
    X: np.ndarray,
    y: np.ndarray,
    names: Sequence[str],
    response_variance: float = DEFAULT_RESPONSE_VARIANCE,
) -> Tuple[np.ndarray, np.ndarray, NormalizationInfo]:
    """
    Standardize covariates and rescale the response.

    Raises:
        DataValidationError: A constant covariate or response, or fewer
            than two rows.
    """
    if X.shape[0] < 2:
        raise DataValidationError("Normalization needs at least two rows")
    means = X.mean(axis=0)
    scales = X.std(axis=0)
    for j, scale in enumerate(scales):
        if not scale > 1e-12 * max(1.0, abs(float(means[j]))):
            raise DataValidationError(
                f"Covariate {names[j]!r} is constant and cannot be standardized",
                column=names[j],
            )
    y_mean, y_scale = float(y.mean()), float(y.std())
    if not y_scale > 1e-12 * max(1.0, abs(y_mean)):
        raise DataValidationError("Response is constant and cannot be standardized")

    X_norm = (X - means) / scales
    y_norm = (y - y_mean) / y_scale * np.sqrt(response_variance)
    info = NormalizationInfo(
        covariate_means=tuple(float(m) for m in means),
        covariate_scales=tuple(float(s) for s in scales),
        response_mean=y_mean,
        response_scale=y_scale,
        response_variance=float(response_variance),
    )
    return X_norm, y_norm, info


def prepare_regression_data(
    path: Union[str, Path],
    response: Optional[str] = None,
    log_response: bool = False,
    interactions: bool = False,
    normalize_data: bool = True,
    response_variance: float = DEFAULT_RESPONSE_VARIANCE,
) -> Tuple[RegressionData, Optional[NormalizationInfo]]:
    """Load, expand, normalize and wrap a CSV as ``RegressionData``."""
    table = load_csv(path, response=response, log_response=log_response)
    X, names = table.X, table.covariates
    if interactions:
        X, names = expand_interactions(X, names)
    info = None
    y = table.y
    if normalize_data:
        X, y, info = normalize(X, y, names, response_variance)
    return RegressionData.from_arrays(X, y, list(names)), info


def write_records_csv(rows: List[Dict[str, Any]], path: Union[str, Path]) -> None:
    """Long-format CSV, one row per record, columns in first-record order."""
    pd.DataFrame(rows).to_csv(path, index=False, lineterminator="\n")
