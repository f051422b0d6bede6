"""Feature fusion and train-only standardization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from actifuse.features import FeatureMatrix
from actifuse.fusion import (AlignmentError, Standardizer, fit_standardizer,
                             fuse, standardize)


def matrix(rows, cols, seed=0, prefix="f"):
    rng = np.random.default_rng(seed)
    return FeatureMatrix(rng.normal(0, 3, (rows, cols)),
                         tuple(f"{prefix}{i}" for i in range(cols)))


class TestFuse:
    def test_column_concatenation_audio_first(self):
        a, k = matrix(10, 31, prefix="a"), matrix(10, 64, prefix="k")
        fused = fuse(a, k)
        assert fused.values.shape == (10, 95)
        assert fused.names[:31] == a.names and fused.names[31:] == k.names
        assert np.array_equal(fused.values[:, :31], a.values)
        assert np.array_equal(fused.values[:, 31:], k.values)

    def test_empty_matrix_is_identity(self):
        a = matrix(10, 5)
        empty = FeatureMatrix(np.zeros((10, 0)), ())
        assert np.array_equal(fuse(a, empty).values, a.values)
        assert fuse(empty, a).names == a.names

    def test_row_mismatch_names_both_counts(self):
        with pytest.raises(AlignmentError, match="10.*9"):
            fuse(matrix(10, 3, prefix="a"), matrix(9, 3, prefix="k"))

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            fuse(matrix(4, 3), matrix(4, 3))


class TestStandardizer:
    def test_single_row_gives_zero_stds(self):
        fm = matrix(5, 4)
        s = fit_standardizer(fm, [2])
        assert np.all(s.stds == 0.0)
        assert s.fitted_on == 1

    def test_two_point_example(self):
        fm = FeatureMatrix(np.array([[0.0], [2.0]]), ("x",))
        s = fit_standardizer(fm, [0, 1])
        assert s.means[0] == 1.0 and s.stds[0] == 1.0

    def test_matches_two_pass_oracle(self):
        fm = matrix(50, 8, seed=3)
        rows = np.arange(0, 50, 3)
        s = fit_standardizer(fm, rows)
        for c in range(8):
            mean, std = oracles.two_pass_stats(fm.values[rows, c])
            assert s.means[c] == pytest.approx(mean, rel=1e-12)
            assert s.stds[c] == pytest.approx(std, rel=1e-12)

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            fit_standardizer(matrix(5, 2), [])

    def test_fit_ignores_non_training_rows(self):
        fm = matrix(30, 6, seed=4)
        rows = np.arange(10)
        s1 = fit_standardizer(fm, rows)
        mutated = fm.values.copy()
        mutated[15:] += 100.0
        s2 = fit_standardizer(FeatureMatrix(mutated, fm.names), rows)
        assert np.array_equal(s1.means, s2.means)
        assert np.array_equal(s1.stds, s2.stds)

    def test_serialization_roundtrip(self, tmp_path):
        s = fit_standardizer(matrix(10, 3), np.arange(10))
        path = tmp_path / "std.json"
        s.save(path)
        back = Standardizer.load(path)
        assert back.names == s.names
        assert np.array_equal(back.means, s.means)
        assert np.array_equal(back.stds, s.stds)


class TestStandardize:
    def test_training_rows_become_zero_mean_unit_std(self):
        fm = matrix(40, 5, seed=5)
        rows = np.arange(0, 40, 2)
        z = standardize(fm, fit_standardizer(fm, rows))
        sub = z.values[rows]
        assert np.abs(sub.mean(axis=0)).max() <= 1e-9
        assert np.abs(sub.std(axis=0) - 1.0).max() <= 1e-9

    def test_constant_column_silenced(self):
        values = np.column_stack([np.full(6, 3.3), np.arange(6.0)])
        fm = FeatureMatrix(values, ("const", "ramp"))
        z = standardize(fm, fit_standardizer(fm, np.arange(6)))
        assert np.all(z.values[:, 0] == 0.0)
        assert np.any(z.values[:, 1] != 0.0)

    def test_one_std_above_mean_maps_to_one(self):
        fm = matrix(25, 3, seed=6)
        s = fit_standardizer(fm, np.arange(25))
        probe = FeatureMatrix((s.means + s.stds)[None, :], fm.names)
        assert np.allclose(standardize(probe, s).values, 1.0, atol=1e-12)

    def test_column_mismatch_rejected(self):
        s = fit_standardizer(matrix(5, 3), np.arange(5))
        with pytest.raises(ValueError, match="columns"):
            standardize(matrix(5, 4), s)

    @given(st.floats(min_value=0.01, max_value=1e4),
           st.floats(min_value=-1e4, max_value=1e4))
    @settings(max_examples=40, deadline=None, derandomize=True)
    def test_affine_invariance_per_column(self, a, b):
        """standardize(a*x + b) under a refitted standardizer equals
        standardize(x) under the original, for a > 0."""
        fm = matrix(30, 4, seed=8)
        rows = np.arange(0, 30, 3)
        z = standardize(fm, fit_standardizer(fm, rows))
        shifted = FeatureMatrix(a * fm.values + b, fm.names)
        z2 = standardize(shifted, fit_standardizer(shifted, rows))
        assert np.allclose(z2.values, z.values, rtol=1e-9, atol=1e-9)
