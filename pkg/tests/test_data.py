"""Response encodings and dataset construction."""

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from locscale.data import (
    DataError,
    Dataset,
    dataset_from_frame,
    encode_response,
    make_dataset,
    read_csv,
)


class TestEncodeResponse:
    def test_exact(self):
        d = encode_response("exact", 3.2)
        assert d.is_exact and d.value == 3.2

    def test_right_censor_open_above(self):
        d = encode_response("right", 5.0)
        assert d.lower == 5.0 and d.upper == np.inf

    def test_left_censor_open_below(self):
        d = encode_response("left", 5.0)
        assert d.lower == -np.inf and d.upper == 5.0

    def test_ordinal_maps_to_unit_intervals(self):
        levels = ("low", "mid", "high")
        d = encode_response("ordinal", "mid", levels=levels)
        assert (d.lower, d.upper) == (1.0, 2.0)
        first = encode_response("ordinal", "low", levels=levels)
        assert first.lower == 0.0 and first.upper == 1.0

    def test_count_covers_unit_cell(self):
        d = encode_response("count", 4)
        assert (d.lower, d.upper) == (3.0, 4.0)
        zero = encode_response("count", 0)
        assert zero.upper == 0.0

    def test_interval_pair(self):
        d = encode_response("interval", (1.0, 2.5))
        assert (d.lower, d.upper) == (1.0, 2.5)

    def test_bad_values_rejected(self):
        with pytest.raises(DataError):
            encode_response("exact", np.nan)
        with pytest.raises(DataError):
            encode_response("interval", (2.0, 2.0))
        with pytest.raises(DataError):
            encode_response("ordinal", "huge", levels=("a", "b"))
        with pytest.raises(DataError):
            encode_response("count", -1)

    def test_midpoint(self):
        assert encode_response("interval", (1.0, 3.0)).midpoint() == 2.0
        assert encode_response("right", 4.0).midpoint() == 4.0


class TestMakeDataset:
    def test_shapes_and_names(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(size=(10, 2))
        ds = make_dataset(rng.uniform(size=10), x)
        assert ds.n == 10
        assert ds.colnames == ("x1", "x2")
        assert_allclose(ds.column("x2"), x[:, 1])

    def test_weights_validated(self):
        with pytest.raises(DataError):
            make_dataset([1.0, 2.0], np.ones((2, 1)), weights=[1.0, -1.0])

    def test_colnames_must_match(self):
        with pytest.raises(DataError):
            Dataset(
                responses=(encode_response("exact", 1.0),),
                x=np.ones((1, 2)),
                colnames=("only",),
            )

    def test_stratum_relabeled_consecutively(self):
        ds = make_dataset([1.0, 2.0, 3.0], np.ones((3, 1)), stratum=["b", "a", "b"])
        assert ds.n_strata == 2
        assert ds.stratum_labels == ("a", "b")
        assert list(ds.stratum) == [1, 0, 1]

    def test_nonfinite_covariates_rejected(self):
        with pytest.raises(DataError):
            make_dataset([1.0], np.array([[np.inf]]))

    def test_missing_column_lookup(self):
        ds = make_dataset([1.0], np.ones((1, 1)))
        with pytest.raises(DataError):
            ds.column("z9")


class TestDatasetFromFrame:
    def frame(self):
        return pd.DataFrame(
            {
                "y": [1.2, 3.4, 2.2, 5.1, 0.7, 2.9],
                "age": [30.0, 40.0, 52.0, 44.0, 61.0, 38.0],
                "sex": ["f", "m", "m", "f", "m", "f"],
                "w": [1.0, 2.0, 1.0, 1.0, 3.0, 1.0],
                "site": ["a", "a", "b", "b", "a", "b"],
            }
        )

    def test_categorical_becomes_contrast(self):
        ds = dataset_from_frame(self.frame(), response="y", covariates=["age", "sex"])
        assert "age" in ds.colnames
        assert any(c.startswith("sex") for c in ds.colnames)
        assert "sex" in ds.factors
        sex_cols = ds.factors["sex"].columns
        assert len(sex_cols) == 1  # two levels, baseline dropped

    def test_weights_and_stratum_columns(self):
        ds = dataset_from_frame(
            self.frame(), response="y", covariates=["age"], weights="w", stratum="site"
        )
        assert_allclose(ds.weights, [1.0, 2.0, 1.0, 1.0, 3.0, 1.0])
        assert ds.n_strata == 2

    def test_interval_response_pair(self):
        frame = pd.DataFrame(
            {"lo": [1.0, 2.0, None], "hi": [2.0, None, 4.0], "x": [0.1, 0.2, 0.3]}
        )
        ds = dataset_from_frame(
            frame, response=("lo", "hi"), response_kind="interval", covariates=["x"]
        )
        assert ds.responses[0].lower == 1.0
        assert ds.responses[1].upper == np.inf
        assert ds.responses[2].lower == -np.inf

    def test_ordinal_levels_from_frame(self):
        frame = pd.DataFrame({"g": ["lo", "hi", "mid", "lo"], "x": [1.0, 2.0, 3.0, 4.0]})
        ds = dataset_from_frame(
            frame,
            response="g",
            response_kind="ordinal",
            levels=("lo", "mid", "hi"),
            covariates=["x"],
        )
        uppers = [d.upper for d in ds.responses]
        assert uppers == [1.0, 3.0, 2.0, 1.0]

    def test_extra_columns_appended(self):
        extra = {"age2": self.frame()["age"].to_numpy() ** 2}
        ds = dataset_from_frame(
            self.frame(), response="y", covariates=["age"], extra_columns=extra
        )
        assert ds.colnames[-1] == "age2"

    def test_subset_keeps_factor_codes(self):
        ds = dataset_from_frame(self.frame(), response="y", covariates=["age", "sex"])
        sub = ds.subset([0, 2, 4])
        assert sub.n == 3
        assert list(sub.factors["sex"].codes) == list(ds.factors["sex"].codes[[0, 2, 4]])

    def test_tree_variables_collapse_factors(self):
        ds = dataset_from_frame(self.frame(), response="y", covariates=["age", "sex"])
        vars_ = ds.tree_variables()
        assert "age" in vars_ and "sex" in vars_
        assert not any(v.startswith("sex=") for v in vars_)


class TestReadCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "d.csv"
        pd.DataFrame({"y": [1.0, 2.0, 3.0], "x": [0.1, 0.4, 0.9]}).to_csv(
            path, index=False
        )
        ds = read_csv(path, response="y", covariates=["x"])
        assert ds.n == 3
        assert ds.colnames == ("x",)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            read_csv(tmp_path / "absent.csv", response="y")
