import logging

import numpy as np
import pytest
from PIL import Image

from qbpm.data import (
    AffineParams,
    AugmentRanges,
    Dataset,
    MinMaxImageScaler,
    apply_affine,
    augment,
    augment_minority,
    load_dataset,
    load_image_dir,
    min_max_normalize,
    one_hot,
    split,
    stratified_train_counts,
    write_raw,
)
from qbpm.exceptions import DataError, UsageError


def write_png(path, rgb):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path)


@pytest.fixture
def image_tree(tmp_path):
    rng = np.random.default_rng(0)
    for name, n in (("beta", 3), ("alpha", 2)):
        d = tmp_path / name
        d.mkdir()
        for i in range(n):
            write_png(d / f"{i}.png", rng.integers(0, 256, (12, 8, 3)))
    return tmp_path


class TestScaling:
    def test_min_max(self):
        np.testing.assert_allclose(min_max_normalize([2.0, 4.0, 6.0]), [0, 0.5, 1])

    def test_constant_image(self):
        np.testing.assert_array_equal(min_max_normalize(np.full((2, 2), 7.0)), np.zeros((2, 2)))

    def test_scaler_is_per_row(self):
        X = np.array([[0.0, 10.0, 5.0], [1.0, 1.0, 1.0], [-2.0, 2.0, 0.0]])
        out = MinMaxImageScaler().fit_transform(X)
        np.testing.assert_allclose(out, [[0, 1, 0.5], [0, 0, 0], [0, 1, 0.5]])


class TestLoading:
    def test_image_dir(self, image_tree):
        manifest, ds = load_image_dir(image_tree, (5, 4))
        assert ds.class_names == ["alpha", "beta"]
        assert ds.counts() == [2, 3]
        assert ds.X.shape == (5, 60)
        assert ds.image_shape == (5, 4, 3)
        assert manifest.image_dims == (5, 4)
        assert np.all((ds.X >= 0) & (ds.X <= 1))
        np.testing.assert_allclose(ds.X.min(axis=1), 0)
        np.testing.assert_allclose(ds.X.max(axis=1), 1)

    def test_resize_matches_pil_bilinear(self, image_tree):
        _, ds = load_image_dir(image_tree, (5, 4))
        with Image.open(image_tree / "alpha" / "0.png") as im:
            ref = np.asarray(im.convert("RGB").resize((4, 5), Image.BILINEAR), dtype=float)
        np.testing.assert_allclose(ds.X[0], min_max_normalize(ref).ravel())

    def test_corrupt_file_skipped(self, image_tree, caplog):
        (image_tree / "alpha" / "bad.png").write_bytes(b"not an image")
        with caplog.at_level(logging.WARNING):
            manifest, ds = load_image_dir(image_tree, (5, 4))
        assert manifest.skipped == 1
        assert ds.counts() == [2, 3]
        assert "bad.png" in caplog.text

    def test_empty_class(self, image_tree):
        (image_tree / "gamma").mkdir()
        with pytest.raises(DataError):
            load_image_dir(image_tree, (5, 4))

    def test_raw_round_trip(self, tmp_path):
        X = np.array([[0.0, 2.0, 4.0], [1.0, 3.0, 1.0], [5.0, 5.0, 0.0]])
        write_raw(tmp_path, X, [0, 1, 1], ["a", "b"])
        manifest, ds = load_dataset(tmp_path)
        assert ds.class_names == ["a", "b"]
        assert manifest.counts == [1, 2]
        np.testing.assert_allclose(ds.X[0], [0, 0.5, 1])

    def test_raw_bad_size(self, tmp_path):
        write_raw(tmp_path, np.ones(7), [0, 1])
        with pytest.raises(DataError):
            load_dataset(tmp_path)

    def test_missing_root(self, tmp_path):
        with pytest.raises(DataError):
            load_dataset(tmp_path / "nope")


class TestDataset:
    def test_one_hot(self):
        np.testing.assert_array_equal(one_hot([2, 0], 3), [[0, 0, 1], [1, 0, 0]])
        with pytest.raises(UsageError):
            one_hot([3], 3)

    def test_samples(self):
        ds = Dataset(np.eye(3), [0, 1, 1], ["a", "b"])
        s = list(ds.samples())
        assert s[2].label == 1
        np.testing.assert_array_equal(s[2].one_hot, [0, 1])

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((3, 4)), [0, 1], ["a", "b"])
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 4)), [0, 1], ["a", "b"], (3, 3, 1))


class TestSplit:
    @pytest.mark.parametrize("count,train", [(13725, 9196), (5002, 3351), (488, 327), (2, 1), (3, 2)])
    def test_counts(self, count, train):
        assert stratified_train_counts([count], 0.67) == [train]

    def test_degenerate(self):
        with pytest.raises(DataError):
            stratified_train_counts([1, 10], 0.67)
        with pytest.raises(UsageError):
            stratified_train_counts([10], 1.0)

    def test_split_is_partition_and_seeded(self):
        y = np.repeat([0, 1, 2], [30, 12, 7])
        ds = Dataset(np.arange(y.size, dtype=float)[:, None], y, ["a", "b", "c"])
        tr, va = split(ds, 0.67, np.random.default_rng(1))
        assert tr.counts() == stratified_train_counts(ds.counts(), 0.67)
        assert sorted(np.concatenate([tr.X[:, 0], va.X[:, 0]])) == list(range(y.size))
        tr2, _ = split(ds, 0.67, np.random.default_rng(1))
        np.testing.assert_array_equal(tr.X, tr2.X)


class TestAugment:
    def test_identity(self):
        img = np.random.default_rng(0).random((6, 5, 3))
        np.testing.assert_array_equal(apply_affine(img, AffineParams()), img)

    def test_flip_is_exact(self):
        img = np.random.default_rng(0).random((6, 5, 3))
        np.testing.assert_array_equal(apply_affine(img, AffineParams(flip=True)), img[:, ::-1])

    def test_integer_shift(self):
        img = np.zeros((7, 7))
        img[3, 3] = 1.0
        out = apply_affine(img, AffineParams(tx=-2.0))
        assert out[3, 5] == pytest.approx(1.0)

    def test_quarter_turn(self):
        img = np.arange(9.0).reshape(3, 3) / 8
        out = apply_affine(img, AffineParams(rotation=90.0))
        np.testing.assert_allclose(out, np.rot90(img, -1), atol=1e-12)

    def test_shape_and_range(self):
        rng = np.random.default_rng(1)
        img = rng.random((10, 12, 3))
        for _ in range(10):
            out = augment(img, rng)
            assert out.shape == img.shape
            assert out.min() >= 0 and out.max() <= 1

    def test_no_flip_when_disabled(self):
        rng = np.random.default_rng(0)
        ranges = AugmentRanges(rotation=0, width_shift=0, height_shift=0, shear=0, zoom=0, horizontal_flip=False)
        img = rng.random((4, 4))
        np.testing.assert_array_equal(augment(img, rng, ranges), img)

    def test_minority_growth(self):
        rng = np.random.default_rng(2)
        ds = Dataset(rng.random((5, 4 * 4 * 3)), [0, 0, 0, 1, 1], ["a", "b"], (4, 4, 3))
        grown = augment_minority(ds, 1, 6, rng)
        assert grown.counts() == [3, 6]
        np.testing.assert_array_equal(grown.X[:5], ds.X)
        with pytest.raises(UsageError):
            augment_minority(ds, 1, 1, rng)
        flat = Dataset(ds.X, ds.y, ds.class_names)
        with pytest.raises(UsageError):
            augment_minority(flat, 1, 6, rng)
