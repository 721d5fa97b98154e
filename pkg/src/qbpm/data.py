"""Dataset ingestion, per-image min-max scaling, class-based augmentation and splitting.

Two on-disk layouts are accepted by :func:`load_dataset`:

* ``<root>/<class_name>/*.{png,jpg,jpeg}``, classes indexed alphabetically;
* ``<root>/features.f32`` (little-endian float32, row-major, one sample per
  row) plus ``<root>/labels.txt`` (one integer per line) and optionally
  ``<root>/classes.txt`` (one class name per line).
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import DataError, UsageError

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
RAW_FEATURES = "features.f32"
RAW_LABELS = "labels.txt"
RAW_CLASSES = "classes.txt"


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise UsageError(f"labels must lie in [0, {n_classes})")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass
class Sample:
    features: np.ndarray
    label: int
    one_hot: np.ndarray


@dataclass
class Dataset:
    """Flattened features ``X`` (rows in [0, 1]) with integer labels ``y``."""

    X: np.ndarray
    y: np.ndarray
    class_names: list
    image_shape: tuple = None  # (H, W, C) when rows are flattened images

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise DataError(f"features {self.X.shape} and labels {self.y.shape} disagree")
        if self.image_shape is not None:
            self.image_shape = tuple(int(d) for d in self.image_shape)
            if int(np.prod(self.image_shape)) != self.X.shape[1]:
                raise DataError(f"image shape {self.image_shape} does not match {self.X.shape[1]} features")

    def __len__(self):
        return self.y.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def counts(self) -> list:
        return np.bincount(self.y, minlength=self.n_classes).tolist()

    def one_hot(self) -> np.ndarray:
        return one_hot(self.y, self.n_classes)

    def samples(self):
        oh = self.one_hot()
        for i in range(len(self)):
            yield Sample(self.X[i], int(self.y[i]), oh[i])

    def subset(self, index) -> "Dataset":
        index = np.asarray(index, dtype=int)
        return Dataset(self.X[index], self.y[index], list(self.class_names), self.image_shape)


@dataclass
class DatasetManifest:
    class_names: list
    counts: list
    image_dims: tuple = None
    n_features: int = 0
    skipped: int = 0
    split_seed: int = None
    train_fraction: float = None
    split_counts: dict = field(default_factory=dict)
    source: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["image_dims"] = list(self.image_dims) if self.image_dims else None
        return d

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def min_max_normalize(image) -> np.ndarray:
    """Scale one image to [0, 1]; a constant image maps to zeros."""
    v = np.asarray(image, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


class MinMaxImageScaler(TransformerMixin, BaseEstimator):
    """Per-sample min-max scaling of each row. Stateless; ``fit`` only records width."""

    def fit(self, X, y=None):
        X = np.asarray(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        lo = X.min(axis=1, keepdims=True)
        span = X.max(axis=1, keepdims=True) - lo
        out = np.zeros_like(X)
        ok = span[:, 0] > 0
        out[ok] = (X[ok] - lo[ok]) / span[ok]
        return out


def _read_image(path: Path, target_dims) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        im = im.convert("RGB").resize((target_dims[1], target_dims[0]), Image.BILINEAR)
        return np.asarray(im, dtype=np.float64)


def load_image_dir(root, target_dims=(100, 100)):
    root = Path(root)
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise DataError(f"no class directories under {root}")
    rows, labels, skipped = [], [], 0
    for label, d in enumerate(class_dirs):
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise DataError(f"class directory {d} has no images")
        loaded = 0
        for f in files:
            try:
                img = _read_image(f, target_dims)
            except Exception as exc:  # unreadable or corrupt file
                logger.warning("skipping %s: %s", f, exc)
                skipped += 1
                continue
            rows.append(min_max_normalize(img).ravel())
            labels.append(label)
            loaded += 1
        if loaded == 0:
            raise DataError(f"no readable images in {d}")
    shape = (int(target_dims[0]), int(target_dims[1]), 3)
    ds = Dataset(np.stack(rows), np.asarray(labels), [d.name for d in class_dirs], shape)
    manifest = DatasetManifest(ds.class_names, ds.counts(), shape[:2], ds.X.shape[1], skipped, source=str(root))
    return manifest, ds


def load_raw(root):
    root = Path(root)
    labels = np.asarray([int(line) for line in (root / RAW_LABELS).read_text().split()], dtype=int)
    if labels.size == 0:
        raise DataError(f"{root / RAW_LABELS} is empty")
    flat = np.fromfile(root / RAW_FEATURES, dtype="<f4").astype(np.float64)
    if flat.size % labels.size:
        raise DataError(f"{flat.size} floats do not divide into {labels.size} rows")
    X = flat.reshape(labels.size, -1)
    if (root / RAW_CLASSES).exists():
        names = [s for s in (root / RAW_CLASSES).read_text().splitlines() if s.strip()]
    else:
        names = [str(i) for i in range(labels.max() + 1)]
    if labels.min() < 0 or labels.max() >= len(names):
        raise DataError("label outside the class list")
    if np.any(np.bincount(labels, minlength=len(names)) == 0):
        raise DataError("a class has no samples")
    X = MinMaxImageScaler().fit_transform(X)
    ds = Dataset(X, labels, names)
    return DatasetManifest(names, ds.counts(), None, X.shape[1], 0, source=str(root)), ds


def write_raw(root, X, y, class_names=None) -> None:
    """Write a dataset in the raw layout read by :func:`load_raw`."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    np.asarray(X, dtype="<f4").tofile(root / RAW_FEATURES)
    (root / RAW_LABELS).write_text("\n".join(str(int(v)) for v in y) + "\n")
    if class_names is not None:
        (root / RAW_CLASSES).write_text("\n".join(class_names) + "\n")


def load_dataset(root_path, target_dims=(100, 100)):
    """Return ``(manifest, dataset)`` from either supported layout."""
    root = Path(root_path)
    if not root.is_dir():
        raise DataError(f"{root} is not a directory")
    if (root / RAW_FEATURES).exists():
        return load_raw(root)
    return load_image_dir(root, target_dims)


# -- augmentation -----------------------------------------------------------

@dataclass(frozen=True)
class AugmentRanges:
    rotation: float = 20.0  # degrees
    width_shift: float = 0.2  # fraction of width
    height_shift: float = 0.2
    shear: float = 0.2  # radians
    zoom: float = 0.2  # zoom factor in [1 - zoom, 1 + zoom]
    horizontal_flip: bool = True


@dataclass(frozen=True)
class AffineParams:
    rotation: float = 0.0  # degrees
    tx: float = 0.0  # pixels along columns
    ty: float = 0.0  # pixels along rows
    shear: float = 0.0
    zx: float = 1.0
    zy: float = 1.0
    flip: bool = False


def random_affine(rng, shape, ranges: AugmentRanges = AugmentRanges()) -> AffineParams:
    h, w = shape[:2]
    return AffineParams(
        rotation=rng.uniform(-ranges.rotation, ranges.rotation),
        tx=rng.uniform(-ranges.width_shift, ranges.width_shift) * w,
        ty=rng.uniform(-ranges.height_shift, ranges.height_shift) * h,
        shear=rng.uniform(-ranges.shear, ranges.shear),
        zx=rng.uniform(1 - ranges.zoom, 1 + ranges.zoom),
        zy=rng.uniform(1 - ranges.zoom, 1 + ranges.zoom),
        flip=bool(ranges.horizontal_flip and rng.random() < 0.5),
    )


def apply_affine(image, params: AffineParams) -> np.ndarray:
    """Warp an ``(H, W[, C])`` image; samples outside the frame take the nearest edge pixel."""
    img = np.asarray(image, dtype=np.float64)
    is_identity = (params.rotation, params.tx, params.ty, params.shear, params.zx, params.zy) == (0, 0, 0, 0, 1, 1)
    out = img.copy()
    if not is_identity:
        a = np.deg2rad(params.rotation)
        rot = np.array([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
        shear = np.array([[1.0, -np.sin(params.shear)], [0.0, np.cos(params.shear)]])
        zoom = np.diag([params.zy, params.zx])
        m = rot @ shear @ zoom  # output (row, col) -> input (row, col)
        center = (np.array(img.shape[:2], dtype=float) - 1) / 2
        offset = center - m @ center + np.array([params.ty, params.tx])
        planes = img[..., None] if img.ndim == 2 else img
        warped = [
            ndimage.affine_transform(planes[..., c], m, offset=offset, order=1, mode="nearest")
            for c in range(planes.shape[-1])
        ]
        out = np.stack(warped, axis=-1).reshape(img.shape)
    if params.flip:
        out = out[:, ::-1].copy()
    return np.clip(out, 0.0, 1.0)


def augment(image, rng, ranges: AugmentRanges = AugmentRanges()) -> np.ndarray:
    """One random rotation/shift/shear/zoom/flip of ``image``; shape is kept."""
    img = np.asarray(image, dtype=np.float64)
    return apply_affine(img, random_affine(rng, img.shape, ranges))


def augment_minority(dataset: Dataset, class_id: int, target_count: int, rng,
                     ranges: AugmentRanges = AugmentRanges()) -> Dataset:
    """Grow ``class_id`` to ``target_count`` with augmented copies of its members."""
    if dataset.image_shape is None:
        raise UsageError("augmentation needs image-shaped samples")
    members = np.flatnonzero(dataset.y == class_id)
    if members.size == 0:
        raise UsageError(f"class {class_id} has no samples")
    if target_count < members.size:
        raise UsageError(f"target {target_count} below current count {members.size}")
    extra = target_count - members.size
    if extra == 0:
        return dataset.subset(np.arange(len(dataset)))
    picks = rng.choice(members, size=extra, replace=True)
    new_rows = [
        augment(dataset.X[i].reshape(dataset.image_shape), rng, ranges).ravel() for i in picks
    ]
    X = np.vstack([dataset.X, np.asarray(new_rows)])
    y = np.concatenate([dataset.y, np.full(extra, class_id)])
    return Dataset(X, y, list(dataset.class_names), dataset.image_shape)


# -- splitting --------------------------------------------------------------

def stratified_train_counts(counts, train_fraction: float) -> list:
    """Per-class training sizes: ``round(fraction * count)``, at least one per side."""
    if not 0 < train_fraction < 1:
        raise UsageError(f"train fraction must lie in (0, 1), got {train_fraction}")
    out = []
    for c in counts:
        if c < 2:
            raise DataError(f"cannot stratify a class with {c} sample(s)")
        out.append(int(min(c - 1, max(1, np.floor(train_fraction * c + 0.5)))))
    return out


def split(dataset: Dataset, train_fraction: float, rng):
    """Seeded stratified split into ``(train, validation)``."""
    counts = dataset.counts()
    n_train = stratified_train_counts(counts, train_fraction)
    train_idx, val_idx = [], []
    for c, k in enumerate(n_train):
        members = np.flatnonzero(dataset.y == c)
        perm = rng.permutation(members)
        train_idx.append(perm[:k])
        val_idx.append(perm[k:])
    train_idx = np.sort(np.concatenate(train_idx))
    val_idx = np.sort(np.concatenate(val_idx))
    return dataset.subset(train_idx), dataset.subset(val_idx)
