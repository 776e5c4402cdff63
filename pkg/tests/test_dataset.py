"""Ground-set loading, validation, normalization and subsampling."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from treemax.dataset import (
    Dataset,
    DatasetError,
    load_dense,
    normalize,
    save_dense,
    subsample,
    synth_gaussian_mixture,
)


class TestDatasetConstruction:
    def test_basic_shape_and_ids(self):
        ds = Dataset([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        assert ds.n == 3
        assert ds.d == 2
        assert len(ds) == 3
        assert_array_equal(ds.ids, [0, 1, 2])

    def test_vectors_are_float64_and_read_only(self):
        ds = Dataset(np.array([[1, 2], [3, 4]], dtype=np.int32))
        assert ds.vectors.dtype == np.float64
        with pytest.raises(ValueError):
            ds.vectors[0, 0] = 9.0

    def test_input_array_not_aliased(self):
        src = np.array([[1.0, 2.0]])
        ds = Dataset(src)
        src[0, 0] = 99.0
        assert ds.vectors[0, 0] == 1.0

    def test_rejects_1d(self):
        with pytest.raises(DatasetError):
            Dataset([1.0, 2.0, 3.0])

    def test_rejects_empty(self):
        with pytest.raises(DatasetError):
            Dataset(np.empty((0, 3)))

    def test_rejects_nonfinite_and_names_row(self):
        with pytest.raises(DatasetError, match="row 1"):
            Dataset([[0.0, 0.0], [np.nan, 1.0]])
        with pytest.raises(DatasetError, match="row 0"):
            Dataset([[np.inf, 0.0]])

    def test_source_ids_shape_checked(self):
        with pytest.raises(DatasetError):
            Dataset([[1.0], [2.0]], source_ids=np.array([5]))


class TestLoadSave:
    def test_csv_round_trip(self, tmp_path):
        ds = Dataset([[1.5, -2.25], [0.125, 3.0]])
        path = tmp_path / "data.csv"
        save_dense(ds, path, format="csv")
        back = load_dense(path, format="csv")
        assert_array_equal(back.vectors, ds.vectors)

    def test_whitespace_round_trip(self, tmp_path):
        ds = Dataset(np.random.default_rng(0).standard_normal((7, 3)))
        path = tmp_path / "data.txt"
        save_dense(ds, path, format="whitespace")
        back = load_dense(path, format="whitespace")
        assert_array_equal(back.vectors, ds.vectors)

    def test_skip_header(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,b\n1,2\n3,4\n")
        ds = load_dense(path, skip_header=True)
        assert_array_equal(ds.vectors, [[1.0, 2.0], [3.0, 4.0]])

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "b.csv"
        path.write_text("1,2\n\n3,4\n   \n")
        assert load_dense(path).n == 2

    def test_non_numeric_cell_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,oops\n")
        with pytest.raises(DatasetError, match=r"'oops' in row 2"):
            load_dense(path)

    def test_ragged_row_reports_line(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(DatasetError, match="row 2"):
            load_dense(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("\n\n")
        with pytest.raises(DatasetError, match="no rows"):
            load_dense(path)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(DatasetError, match="cannot read"):
            load_dense(tmp_path / "nope.csv")

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dense(tmp_path / "x", format="tsv")

    # Precision matters: round-tripped vectors must reproduce objective
    # values exactly, so the writer uses %.17g.
    @given(
        values=st.lists(
            st.tuples(st.floats(-1e6, 1e6, allow_nan=False), st.floats(-1e6, 1e6, allow_nan=False)),
            min_size=1,
            max_size=6,
        )
    )
    @settings(max_examples=50, deadline=None)
    def test_round_trip_is_exact_for_any_floats(self, tmp_path_factory, values):
        path = tmp_path_factory.mktemp("rt") / "v.csv"
        ds = Dataset(np.array(values, dtype=np.float64))
        save_dense(ds, path)
        assert_array_equal(load_dense(path).vectors, ds.vectors)


class TestNormalize:
    def test_rows_become_zero_mean_unit_norm(self):
        rng = np.random.default_rng(3)
        ds = normalize(Dataset(rng.standard_normal((20, 6)) * 5 + 2))
        assert_allclose(ds.vectors.mean(axis=1), 0.0, atol=1e-12)
        assert_allclose(np.linalg.norm(ds.vectors, axis=1), 1.0, atol=1e-12)

    def test_constant_row_becomes_zero(self):
        ds = normalize(Dataset([[4.0, 4.0, 4.0], [1.0, 2.0, 3.0]]))
        assert_array_equal(ds.vectors[0], 0.0)

    def test_idempotent(self):
        rng = np.random.default_rng(4)
        once = normalize(Dataset(rng.standard_normal((10, 4))))
        twice = normalize(once)
        assert_allclose(twice.vectors, once.vectors, atol=1e-12)

    def test_feature_mode_centers_columns(self):
        rng = np.random.default_rng(5)
        ds = normalize(Dataset(rng.standard_normal((30, 3)) + 10), mode="feature")
        # Columns are centered before rows are rescaled, so column means
        # are only ~0 up to the per-row scale factors; check the scale.
        assert_allclose(np.linalg.norm(ds.vectors, axis=1), 1.0, atol=1e-12)

    def test_unknown_mode(self):
        with pytest.raises(DatasetError):
            normalize(Dataset([[1.0, 2.0]]), mode="both")


class TestSynthAndSubsample:
    def test_synth_deterministic_per_seed(self):
        a = synth_gaussian_mixture(50, 4, 3, 0.1, seed=7)
        b = synth_gaussian_mixture(50, 4, 3, 0.1, seed=7)
        c = synth_gaussian_mixture(50, 4, 3, 0.1, seed=8)
        assert_array_equal(a.vectors, b.vectors)
        assert not np.array_equal(a.vectors, c.vectors)

    def test_synth_shape(self):
        ds = synth_gaussian_mixture(17, 5, 2, 0.05, seed=0)
        assert (ds.n, ds.d) == (17, 5)

    def test_subsample_deterministic_and_sorted(self):
        ds = synth_gaussian_mixture(40, 2, 2, 0.1, seed=1)
        s1 = subsample(ds, 10, seed=5)
        s2 = subsample(ds, 10, seed=5)
        assert_array_equal(s1.source_ids, s2.source_ids)
        assert s1.n == 10
        assert np.all(np.diff(s1.source_ids) > 0)

    def test_subsample_vectors_match_source_rows(self):
        ds = synth_gaussian_mixture(25, 3, 2, 0.2, seed=2)
        sub = subsample(ds, 8, seed=9)
        assert_array_equal(sub.vectors, ds.vectors[sub.source_ids])

    def test_subsample_chains_source_ids_to_origin(self):
        ds = synth_gaussian_mixture(30, 2, 2, 0.1, seed=3)
        first = subsample(ds, 15, seed=1)
        second = subsample(first, 5, seed=2)
        assert_array_equal(second.vectors, ds.vectors[second.source_ids])

    def test_subsample_bounds(self):
        ds = synth_gaussian_mixture(5, 2, 1, 0.1, seed=0)
        with pytest.raises(DatasetError):
            subsample(ds, 6, seed=0)
        with pytest.raises(DatasetError):
            subsample(ds, 0, seed=0)

    @given(st.integers(1, 30), st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_subsample_ids_always_distinct(self, m, seed):
        ds = synth_gaussian_mixture(30, 2, 2, 0.1, seed=0)
        sub = subsample(ds, m, seed=seed)
        assert len(np.unique(sub.source_ids)) == m
