"""Tests for CSV ingestion, interactions and normalization."""

import math

import numpy as np
import pandas as pd
import pytest

from disjunct_bvs.dataset import (
    expand_interactions,
    load_csv,
    normalize,
    prepare_regression_data,
    write_records_csv,
)
from disjunct_bvs.exceptions import DataParseError, DataValidationError


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def table_path(tmp_path):
    rows = ["a,b,c,y"]
    rng = np.random.default_rng(0)
    for _ in range(30):
        a, b, c = rng.normal(size=3)
        rows.append(f"{a:.6f},{5 + 2 * b:.6f},{c:.6f},{math.exp(1 + a):.6f}")
    return write(tmp_path, "\n".join(rows) + "\n")


class TestLoadCsv:
    """Parsing and error reporting."""

    def test_last_column_is_the_response(self, table_path):
        table = load_csv(table_path)
        assert table.response == "y"
        assert table.covariates == ("a", "b", "c")
        assert table.X.shape == (30, 3)

    def test_named_response(self, table_path):
        table = load_csv(table_path, response="b")
        assert table.covariates == ("a", "c", "y")

    def test_log_response(self, table_path):
        raw = load_csv(table_path)
        logged = load_csv(table_path, log_response=True)
        np.testing.assert_allclose(logged.y, np.log(raw.y))

    def test_log_needs_positive_response(self, tmp_path):
        path = write(tmp_path, "x,y\n1,2\n2,0\n")
        with pytest.raises(DataValidationError) as exc:
            load_csv(path, log_response=True)
        assert exc.value.details["column"] == "y"

    def test_non_numeric_cell(self, tmp_path):
        path = write(tmp_path, "x1,x2,y\n1,2,3\n4,five,6\n")
        with pytest.raises(DataParseError) as exc:
            load_csv(path)
        assert (exc.value.row, exc.value.column) == (3, "x2")
        assert exc.value.exit_code == 2

    def test_empty_cell(self, tmp_path):
        path = write(tmp_path, "x1,x2,y\n1,2,3\n4,5,6\n7,,9\n")
        with pytest.raises(DataParseError) as exc:
            load_csv(path)
        assert (exc.value.row, exc.value.column) == (4, "x2")
        assert "Empty cell" in exc.value.message

    @pytest.mark.parametrize("cell", ["inf", "-inf", "nan", "Infinity"])
    def test_non_finite_cell(self, tmp_path, cell):
        path = write(tmp_path, f"x1,x2,y\n1,2,3\n4,5,6\n7,8,9\n{cell},1,2\n")
        with pytest.raises(DataParseError) as exc:
            load_csv(path)
        assert (exc.value.row, exc.value.column) == (5, "x1")

    def test_non_finite_response(self, tmp_path):
        path = write(tmp_path, "x1,y\n1,2\n2,inf\n")
        with pytest.raises(DataParseError) as exc:
            load_csv(path)
        assert (exc.value.row, exc.value.column) == (3, "y")

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path, "x1,x2,y\n1,2,3\n4,5,6,7\n")
        with pytest.raises(DataParseError) as exc:
            load_csv(path)
        assert exc.value.row == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataParseError):
            load_csv(tmp_path / "absent.csv")

    def test_empty_file(self, tmp_path):
        with pytest.raises(DataParseError):
            load_csv(write(tmp_path, ""))

    def test_unknown_response(self, table_path):
        with pytest.raises(DataValidationError):
            load_csv(table_path, response="z")

    def test_single_column(self, tmp_path):
        with pytest.raises(DataValidationError):
            load_csv(write(tmp_path, "y\n1\n2\n"))


class TestInteractions:
    """Squares and pairwise products."""

    def test_names_and_values(self):
        X = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        expanded, names = expand_interactions(X, ["a", "b", "c"])
        assert names == ("a", "b", "c", "a.a", "a.b", "a.c", "b.b", "b.c", "c.c")
        assert expanded.shape == (2, 9)
        np.testing.assert_array_equal(expanded[:, 4], [2.0, 20.0])
        np.testing.assert_array_equal(expanded[:, 8], [9.0, 36.0])

    def test_count(self):
        expanded, names = expand_interactions(np.ones((3, 8)), [f"v{j}" for j in range(8)])
        assert expanded.shape[1] == len(names) == 8 + 8 * 9 // 2


class TestNormalize:
    """Population-variance standardization."""

    def test_moments(self):
        rng = np.random.default_rng(1)
        X = rng.normal(3.0, 2.0, size=(50, 4))
        y = rng.normal(-1.0, 5.0, size=50)
        X_norm, y_norm, info = normalize(X, y, ["a", "b", "c", "d"], response_variance=30.0)
        np.testing.assert_allclose(X_norm.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(X_norm.var(axis=0), 1.0, atol=1e-10)
        assert y_norm.mean() == pytest.approx(0.0, abs=1e-10)
        assert y_norm.var() == pytest.approx(30.0, abs=1e-10)
        np.testing.assert_allclose(info.covariate_means, X.mean(axis=0))
        np.testing.assert_allclose(info.covariate_scales, X.std(axis=0))
        assert info.to_dict()["convention"] == "population"

    def test_constant_covariate(self):
        X = np.column_stack([np.arange(5.0), np.full(5, 2.0)])
        with pytest.raises(DataValidationError) as exc:
            normalize(X, np.arange(5.0), ["a", "flat"])
        assert exc.value.details["column"] == "flat"

    def test_constant_response(self):
        with pytest.raises(DataValidationError):
            normalize(np.arange(6.0).reshape(3, 2), np.ones(3), ["a", "b"])

    def test_too_few_rows(self):
        with pytest.raises(DataValidationError):
            normalize(np.ones((1, 2)), np.ones(1), ["a", "b"])


class TestPrepare:
    """End-to-end preparation."""

    def test_defaults(self, table_path):
        data, info = prepare_regression_data(table_path)
        assert data.column_names == ("a", "b", "c")
        assert info is not None
        assert float(data.y.var()) == pytest.approx(30.0)

    def test_interactions_then_normalization(self, table_path):
        data, info = prepare_regression_data(table_path, interactions=True, response_variance=1.0)
        assert data.d == 9
        assert "a.b" in data.column_names
        np.testing.assert_allclose(data.X.var(axis=0), 1.0, atol=1e-10)
        assert len(info.covariate_means) == 9

    def test_raw(self, table_path):
        data, info = prepare_regression_data(table_path, normalize_data=False)
        assert info is None
        np.testing.assert_allclose(data.y, load_csv(table_path).y)


class TestWriteRecords:
    def test_long_format(self, tmp_path):
        path = tmp_path / "out.csv"
        write_records_csv([{"n": 10, "f1": 0.5}, {"n": 20, "f1": 1.0}], path)
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["n", "f1"]
        assert frame["n"].tolist() == [10, 20]
