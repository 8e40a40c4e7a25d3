"""Loading, label mapping, and the preprocessing pipeline."""

import numpy as np
import pandas as pd
import pytest

from qadvantage.data import (
    DataMatrix,
    LabelSchema,
    RawTable,
    Scaler,
    SplitSpec,
    class_counts,
    load_dataset,
    preprocess,
)
from qadvantage.errors import DataError


def make_table(n_normal=40, n_attack=10, d=4, seed=0, extra=None):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n_normal + n_attack, d))
    frame = pd.DataFrame({f"f{j}": X[:, j] for j in range(d)})
    if extra:
        for name, col in extra.items():
            frame[name] = col
    labels = np.concatenate([np.zeros(n_normal, dtype=int), np.ones(n_attack, dtype=int)])
    return RawTable(features=frame, labels=labels, dataset_name="t")


class TestLoadDataset:
    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "toy.csv"
        pd.DataFrame(
            {"a": [1.0, 2.0, 3.0], "b": [0.5, 0.25, 0.125], "label": ["n", "x", "n"]}
        ).to_csv(path, index=False)
        schema = LabelSchema(label_column="label", attack_labels={"x"}, normal_labels={"n"})
        table = load_dataset(path, schema)
        assert table.feature_names == ("a", "b")
        assert table.labels.tolist() == [0, 1, 0]
        assert table.dataset_name == "toy"

    def test_unknown_label_rejected_when_both_sets_given(self, tmp_path):
        path = tmp_path / "bad.csv"
        pd.DataFrame({"a": [1, 2], "label": ["n", "weird"]}).to_csv(path, index=False)
        schema = LabelSchema(label_column="label", attack_labels={"x"}, normal_labels={"n"})
        with pytest.raises(DataError, match="unknown label"):
            load_dataset(path, schema)

    def test_attack_only_schema_maps_complement_to_normal(self, tmp_path):
        path = tmp_path / "c.csv"
        pd.DataFrame({"a": [1, 2, 3], "label": ["dos", "benign", "probe"]}).to_csv(
            path, index=False
        )
        table = load_dataset(path, LabelSchema(label_column="label", attack_labels={"dos", "probe"}))
        assert table.labels.tolist() == [1, 0, 1]

    def test_normal_only_schema_maps_complement_to_attack(self, tmp_path):
        path = tmp_path / "c.csv"
        pd.DataFrame({"a": [1, 2], "label": ["ok", "smurf"]}).to_csv(path, index=False)
        table = load_dataset(path, LabelSchema(label_column="label", normal_labels={"ok"}))
        assert table.labels.tolist() == [0, 1]

    def test_non_numeric_columns_dropped_or_rejected(self, tmp_path):
        path = tmp_path / "mixed.csv"
        pd.DataFrame(
            {"a": [1, 2], "proto": ["tcp", "udp"], "label": ["n", "x"]}
        ).to_csv(path, index=False)
        schema = LabelSchema(label_column="label", attack_labels={"x"})
        assert load_dataset(path, schema).feature_names == ("a",)
        strict = LabelSchema(label_column="label", attack_labels={"x"}, drop_non_numeric=False)
        with pytest.raises(DataError, match="non-numeric"):
            load_dataset(path, strict)

    def test_rows_with_missing_values_dropped(self, tmp_path):
        path = tmp_path / "gaps.csv"
        pd.DataFrame(
            {"a": [1.0, None, 3.0], "b": [1, 2, 3], "label": ["n", "n", "x"]}
        ).to_csv(path, index=False)
        table = load_dataset(path, LabelSchema(label_column="label", attack_labels={"x"}))
        assert len(table.features) == 2
        assert table.labels.tolist() == [0, 1]

    def test_missing_file_and_missing_label_column(self, tmp_path):
        schema = LabelSchema(label_column="label", attack_labels={"x"})
        with pytest.raises(DataError, match="not found"):
            load_dataset(tmp_path / "nope.csv", schema)
        path = tmp_path / "nolabel.csv"
        pd.DataFrame({"a": [1, 2]}).to_csv(path, index=False)
        with pytest.raises(DataError, match="label column"):
            load_dataset(path, schema)

    def test_schema_requires_some_label_set(self):
        with pytest.raises(DataError):
            LabelSchema(label_column="label")


class TestSplitSpecValidation:
    def test_bad_values_rejected(self):
        with pytest.raises(DataError):
            SplitSpec(train_normals=0)
        with pytest.raises(DataError):
            SplitSpec(train_normals=10, val_normals=-1)
        with pytest.raises(DataError):
            SplitSpec(train_normals=10, sampling="stratified")
        with pytest.raises(DataError):
            SplitSpec(train_normals=10, trim_fraction=0.5)
        with pytest.raises(DataError):
            SplitSpec(train_normals=10, quantile_bins=1)


class TestPreprocess:
    def test_systematic_stride_selection(self):
        # pool 40, train 10 -> stride 4 -> pool rows 0,4,8,...,36
        table = make_table(n_normal=40, n_attack=4)
        spec = SplitSpec(train_normals=10, test_normals=5, test_attacks=2, trim_fraction=0.0)
        res = preprocess(table, spec)
        assert res.manifest["train_indices"] == list(range(0, 40, 4))

    def test_train_standardized_population_convention(self):
        table = make_table(n_normal=60, d=3, seed=1)
        res = preprocess(table, SplitSpec(train_normals=30, trim_fraction=0.0))
        X = res.train.values
        assert np.allclose(X.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(X.std(axis=0), 1.0, atol=1e-12)  # ddof=0

    def test_val_test_use_train_scaler_and_pool_order(self):
        table = make_table(n_normal=40, n_attack=10, seed=2)
        spec = SplitSpec(
            train_normals=10, val_normals=5, val_attacks=3,
            test_normals=5, test_attacks=3, trim_fraction=0.0,
        )
        res = preprocess(table, spec)
        train_rows = set(res.manifest["train_indices"])
        rest = [i for i in range(40) if i not in train_rows]
        raw = table.features.to_numpy(dtype=float)
        expect_val_n = res.scaler.transform(raw[rest[:5]])
        assert np.allclose(res.validation.values[:5], expect_val_n)
        # attacks follow the normals inside each split, in row order
        expect_val_a = res.scaler.transform(raw[40:43])
        assert np.allclose(res.validation.values[5:], expect_val_a)
        assert class_counts(res.validation) == (5, 3)
        assert class_counts(res.test) == (5, 3)

    def test_constant_feature_removed_and_flagged(self):
        table = make_table(extra={"const": np.full(50, 7.0)})
        res = preprocess(table, SplitSpec(train_normals=20, trim_fraction=0.0))
        assert "const" not in res.train.feature_names
        assert res.manifest["features_removed_constant"] == ["const"]

    def test_trimming_removes_extreme_rows_from_train_pool_only(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(100, 2))
        X[0] = [50.0, 0.0]  # far outside any percentile band
        frame = pd.DataFrame({"f0": X[:, 0], "f1": X[:, 1]})
        table = RawTable(features=frame, labels=np.zeros(100, dtype=int), dataset_name="t")
        spec = SplitSpec(train_normals=50, val_normals=10, trim_fraction=0.02)
        res = preprocess(table, spec)
        assert 0 not in res.manifest["train_indices"]
        assert res.manifest["trimmed_pool_size"] < 100

    def test_trim_zero_keeps_everything(self):
        table = make_table(n_normal=30)
        res = preprocess(table, SplitSpec(train_normals=30, trim_fraction=0.0))
        assert res.manifest["trimmed_pool_size"] == 30

    def test_quantile_transform_flattens_skew(self):
        rng = np.random.default_rng(4)
        X = rng.exponential(size=(400, 2))  # heavily right-skewed
        frame = pd.DataFrame({"f0": X[:, 0], "f1": X[:, 1]})
        table = RawTable(features=frame, labels=np.zeros(400, dtype=int), dataset_name="t")
        res = preprocess(
            table, SplitSpec(train_normals=300, trim_fraction=0.0, quantile_bins=101)
        )
        Z = res.train.values

        def skew(v):
            return float(np.mean(v**3))  # already mean 0, std 1

        raw_skew = (X[:300] - X[:300].mean(0)) / X[:300].std(0)
        assert abs(skew(raw_skew[:, 0])) > 1.0
        assert abs(skew(Z[:, 0])) < 0.2
        assert abs(skew(Z[:, 1])) < 0.2

    def test_random_sampling_seeded_and_sorted(self):
        table = make_table(n_normal=50, seed=5)
        spec = SplitSpec(train_normals=20, sampling="random", trim_fraction=0.0, seed=9)
        a = preprocess(table, spec).manifest["train_indices"]
        b = preprocess(table, spec).manifest["train_indices"]
        assert a == b == sorted(set(a))
        c = preprocess(table, SplitSpec(
            train_normals=20, sampling="random", trim_fraction=0.0, seed=10
        )).manifest["train_indices"]
        assert a != c

    def test_manifest_reproduces_split(self):
        table = make_table(n_normal=60, n_attack=10, seed=6)
        spec = SplitSpec(train_normals=25, test_normals=10, test_attacks=5)
        r1 = preprocess(table, spec)
        r2 = preprocess(table, spec)
        assert r1.manifest == r2.manifest
        assert np.array_equal(r1.train.values, r2.train.values)
        assert r1.manifest["counts"]["train_normals"] == 25
        assert np.allclose(r1.manifest["scaler_mean"], r1.scaler.mean)

    def test_errors_on_insufficient_rows(self):
        table = make_table(n_normal=10, n_attack=2)
        with pytest.raises(DataError, match="normal rows available"):
            preprocess(table, SplitSpec(train_normals=11))
        with pytest.raises(DataError, match="validation/test"):
            preprocess(table, SplitSpec(train_normals=8, val_normals=5, trim_fraction=0.0))
        with pytest.raises(DataError, match="attack rows"):
            preprocess(table, SplitSpec(train_normals=5, val_attacks=3, trim_fraction=0.0))

    def test_all_constant_rejected(self):
        frame = pd.DataFrame({"a": np.ones(20), "b": np.full(20, 3.0)})
        table = RawTable(features=frame, labels=np.zeros(20, dtype=int), dataset_name="t")
        with pytest.raises(DataError, match="constant"):
            preprocess(table, SplitSpec(train_normals=10))


class TestSmallTypes:
    def test_raw_table_validations(self):
        with pytest.raises(DataError):
            RawTable(features=pd.DataFrame({"a": [1.0]}), labels=np.array([0, 1]), dataset_name="t")
        with pytest.raises(DataError):
            RawTable(features=pd.DataFrame(), labels=np.array([]), dataset_name="t")

    def test_scaler_transform(self):
        scaler = Scaler(mean=np.array([1.0, 2.0]), std=np.array([2.0, 4.0]))
        out = scaler.transform(np.array([[3.0, 10.0]]))
        assert np.allclose(out, [[1.0, 2.0]])

    def test_data_matrix_array_protocol(self):
        m = DataMatrix(
            values=np.eye(2), feature_names=("a", "b"), dataset_name="t", role="train"
        )
        assert np.array_equal(np.asarray(m), np.eye(2))
        assert m.shape == (2, 2)

    def test_class_counts_requires_labels(self):
        m = DataMatrix(
            values=np.eye(2), feature_names=("a", "b"), dataset_name="t", role="train"
        )
        with pytest.raises(DataError):
            class_counts(m)
