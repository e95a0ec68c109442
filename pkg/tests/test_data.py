import math

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from cycinv import data
from cycinv.serialize import FormatError


class TestRenderShape:
    def test_centered_square_interior_and_corner(self):
        img = data.render_shape(0, 0.5, 0.5, 0.25, 0.0, 1.0, 32)
        assert img[16, 16] == 1.0
        assert img[0, 0] == 0.0

    def test_brightness_scales_peak(self):
        for cls in range(4):
            img = data.render_shape(cls, 0.5, 0.5, 0.3, 0.0, 0.5, 32)
            assert img.max() <= 0.5

    def test_square_area_matches_geometry(self):
        # axis-aligned square of half-width 0.25 covers (2*0.25)^2 of the frame
        img = data.render_shape(0, 0.5, 0.5, 0.25, 0.0, 1.0, 32)
        frac = float((img > 0.5).mean())
        assert frac == pytest.approx(0.25, abs=0.03)

    def test_out_of_range_factors_rejected(self):
        with pytest.raises(ValueError):
            data.render_shape(0, 0.1, 0.5, 0.25, 0.0, 1.0, 32)
        with pytest.raises(ValueError):
            data.render_shape(0, 0.5, 0.5, 0.5, 0.0, 1.0, 32)
        with pytest.raises(ValueError):
            data.render_shape(0, 0.5, 0.5, 0.25, 7.0, 1.0, 32)
        with pytest.raises(ValueError):
            data.render_shape(9, 0.5, 0.5, 0.25, 0.0, 1.0, 32)

    def test_one_pixel_translation_shifts_one_column(self):
        base = data.render_shape(1, 0.5, 0.5, 0.2, 0.0, 1.0, 32)
        moved = data.render_shape(1, 0.5 + 1.0 / 32, 0.5, 0.2, 0.0, 1.0, 32)
        assert_array_equal(moved[:, 1:], base[:, :-1])

    def test_rotation_changes_square_not_circle(self):
        sq0 = data.render_shape(0, 0.5, 0.5, 0.25, 0.0, 1.0, 32)
        sq45 = data.render_shape(0, 0.5, 0.5, 0.25, math.pi / 4, 1.0, 32)
        assert np.abs(sq0 - sq45).sum() > 0
        c0 = data.render_shape(1, 0.5, 0.5, 0.25, 0.0, 1.0, 32)
        c1 = data.render_shape(1, 0.5, 0.5, 0.25, 1.0, 1.0, 32)
        assert_array_equal(c0, c1)

    def test_render_is_pure(self):
        a = data.render_shape(2, 0.4, 0.6, 0.3, 1.0, 0.8, 16)
        b = data.render_shape(2, 0.4, 0.6, 0.3, 1.0, 0.8, 16)
        assert_array_equal(a, b)


class TestGenerateDataset:
    def test_balanced_classes(self):
        ds = data.generate_dataset(8, 4, 8, seed=1)
        assert [int((ds.labels == c).sum()) for c in range(4)] == [2, 2, 2, 2]

    def test_indivisible_n_rejected(self):
        with pytest.raises(ValueError):
            data.generate_dataset(401, 4, 8, seed=1)

    def test_same_seed_identical_bytes(self, tmp_path):
        p1, p2 = tmp_path / "a.cycd", tmp_path / "b.cycd"
        data.save_dataset(p1, data.generate_dataset(16, 4, 8, seed=5))
        data.save_dataset(p2, data.generate_dataset(16, 4, 8, seed=5))
        assert p1.read_bytes() == p2.read_bytes()

    def test_parallel_generation_does_not_change_bytes(self, tmp_path):
        p1, p2 = tmp_path / "s.cycd", tmp_path / "t.cycd"
        data.save_dataset(p1, data.generate_dataset(24, 4, 8, seed=9, threads=1))
        data.save_dataset(p2, data.generate_dataset(24, 4, 8, seed=9, threads=3))
        assert p1.read_bytes() == p2.read_bytes()

    def test_factor_means(self):
        ds = data.generate_dataset(10_000, 4, 4, seed=11)
        assert float(ds.factor("cx").mean()) == pytest.approx(0.5, abs=0.005)
        assert float(ds.factor("brightness").mean()) == pytest.approx(0.75, abs=0.005)

    def test_every_image_has_bright_interior(self):
        ds = data.generate_dataset(200, 4, 32, seed=2)
        brightness = ds.factor("brightness")
        peak = ds.images.reshape(len(ds), -1).max(axis=1)
        assert np.all(peak > 0.25 * brightness)

    def test_pixels_bounded_by_brightness(self):
        ds = data.generate_dataset(64, 4, 16, seed=3)
        peak = ds.images.reshape(len(ds), -1).max(axis=1)
        assert np.all(peak <= ds.factor("brightness") + 1e-7)


class TestDatasetFile:
    def test_round_trip_matches_memory(self, tmp_path):
        ds = data.generate_dataset(12, 4, 8, seed=7)
        p = tmp_path / "ds.cycd"
        data.save_dataset(p, ds)
        back = data.load_dataset(p)
        assert (back.side, back.n_s, back.seed) == (8, 4, 7)
        assert_array_equal(back.labels, ds.labels)
        assert_array_equal(back.factors, ds.factors)
        assert_array_equal(back.images, ds.images)

    def test_save_load_save_byte_identical(self, tmp_path):
        ds = data.generate_dataset(12, 3, 8, seed=8)
        p1, p2 = tmp_path / "a.cycd", tmp_path / "b.cycd"
        data.save_dataset(p1, ds)
        data.save_dataset(p2, data.load_dataset(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.cycd"
        p.write_bytes(b"WHAT" + bytes(24))
        with pytest.raises(FormatError):
            data.load_dataset(p)

    def test_truncation(self, tmp_path):
        ds = data.generate_dataset(8, 4, 8, seed=1)
        p = tmp_path / "x.cycd"
        data.save_dataset(p, ds)
        p.write_bytes(p.read_bytes()[:-10])
        with pytest.raises(FormatError):
            data.load_dataset(p)


class TestSplit:
    def test_stratified_counts(self):
        ds = data.generate_dataset(400, 4, 4, seed=4)
        train, test = data.split(ds, 0.85, seed=0)
        assert len(train) == 340 and len(test) == 60
        for c in range(4):
            assert int((train.labels == c).sum()) == 85
            assert int((test.labels == c).sum()) == 15

    def test_fraction_bounds(self):
        ds = data.generate_dataset(8, 4, 4, seed=4)
        with pytest.raises(ValueError):
            data.split(ds, 1.0, seed=0)
        with pytest.raises(ValueError):
            data.split(ds, 0.0, seed=0)

    def test_split_is_deterministic_and_disjoint(self):
        ds = data.generate_dataset(40, 4, 4, seed=6)
        t1, e1 = data.split(ds, 0.8, seed=3)
        t2, e2 = data.split(ds, 0.8, seed=3)
        assert_array_equal(t1.images, t2.images)
        assert_array_equal(e1.images, e2.images)
        joint = np.concatenate([t1.factors, e1.factors])
        assert joint.shape[0] == len(ds)
        # different seeds give a different partition
        t3, _ = data.split(ds, 0.8, seed=4)
        assert not np.array_equal(t1.factors, t3.factors)
