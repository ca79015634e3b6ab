"""Dataset loading, synthetic data, and augmentation.

Supports the big-endian IDX tensor format (magic 0x00000803 for 3-D uint8
image files), the CIFAR-10 binary batch format (3073-byte records: one
label byte plus 3x32x32 pixels), seeded synthetic sets for tests and desk
runs, and the weak/strong augmentation pipeline (mirroring, additive color
jitter, scale jitter with cropping).

Pixel data is scaled to [0, 1] at load time; per-channel standardization
uses statistics of the training split for both splits and is applied by
the training pipeline, not here.
"""

import gzip
import os
import struct
from dataclasses import dataclass

import numpy as np

IDX_DTYPES = {
    0x08: np.dtype(np.uint8),
    0x09: np.dtype(np.int8),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
IDX_CODES = {
    np.dtype(np.uint8): 0x08,
    np.dtype(np.int8): 0x09,
    np.dtype(np.int16): 0x0B,
    np.dtype(np.int32): 0x0C,
    np.dtype(np.float32): 0x0D,
    np.dtype(np.float64): 0x0E,
}


@dataclass
class Dataset:
    """Inputs plus integer labels for one split.

    images is (n, channels, height, width) for image data or (n, features)
    for flat data; labels is (n,) int64.
    """

    images: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.images.shape[0]} inputs but {self.labels.shape[0]} labels")


def _open_maybe_gz(path):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path):
    """Parse one IDX file into a numpy array (native byte order)."""
    with _open_maybe_gz(path) as f:
        header = f.read(4)
        if len(header) < 4:
            raise ValueError(f"{path}: truncated IDX header at byte 0")
        zeros, type_code, ndim = struct.unpack(">HBB", header)
        if zeros != 0:
            raise ValueError(
                f"{path}: bad IDX magic at byte 0 (expected 0x0000, got {zeros:#06x})")
        if type_code not in IDX_DTYPES:
            raise ValueError(
                f"{path}: unknown IDX type code {type_code:#04x} at byte 2")
        shape = []
        for i in range(ndim):
            raw = f.read(4)
            if len(raw) < 4:
                raise ValueError(f"{path}: truncated dimension {i} at byte {4 + 4 * i}")
            shape.append(struct.unpack(">I", raw)[0])
        dtype = IDX_DTYPES[type_code]
        count = int(np.prod(shape)) if shape else 1
        payload = f.read(count * dtype.itemsize)
        if len(payload) < count * dtype.itemsize:
            raise ValueError(
                f"{path}: payload has {len(payload)} bytes, "
                f"expected {count * dtype.itemsize} at byte {4 + 4 * ndim}")
        arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
        # present as native-endian to callers
        return arr.astype(arr.dtype.newbyteorder("="), copy=False)


def write_idx(path, array):
    """Write a numpy array as an IDX file (inverse of read_idx)."""
    array = np.asarray(array)
    key = np.dtype(array.dtype.base.newbyteorder("="))
    if key not in IDX_CODES:
        raise ValueError(f"dtype {array.dtype} has no IDX type code")
    code = IDX_CODES[key]
    with open(path, "wb") as f:
        f.write(struct.pack(">HBB", 0, code, array.ndim))
        for dim in array.shape:
            f.write(struct.pack(">I", dim))
        f.write(np.ascontiguousarray(array, dtype=IDX_DTYPES[code]).tobytes())


_IDX_NAMES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find_idx_file(root, base):
    for name in (base, base.replace("-idx", ".idx"), base + ".gz",
                 base.replace("-idx", ".idx") + ".gz"):
        candidate = os.path.join(root, name)
        if os.path.exists(candidate):
            return candidate
    raise FileNotFoundError(f"no IDX file {base}[.gz] under {root}")


def load_idx(root, split="train", limit=None):
    """Load an IDX image/label pair from a directory using standard names."""
    if split not in _IDX_NAMES:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    img_name, lab_name = _IDX_NAMES[split]
    images = read_idx(_find_idx_file(root, img_name))
    labels = read_idx(_find_idx_file(root, lab_name))
    if images.ndim != 3:
        raise ValueError(f"expected 3-D image tensor, got shape {images.shape}")
    if labels.ndim != 1 or labels.shape[0] != images.shape[0]:
        raise ValueError(
            f"label count {labels.shape} does not match {images.shape[0]} images")
    if limit is not None:
        images = images[:limit]
        labels = labels[:limit]
    x = (images.astype(np.float64) / 255.0)[:, None, :, :]
    return Dataset(x, labels.astype(np.int64), split)


_CIFAR_RECORD = 3073  # 1 label byte + 3*32*32 pixels


def load_cifar_binary(root, split="train", limit=None):
    """Load CIFAR-10 binary batches (data_batch_*.bin / test_batch.bin)."""
    if split == "train":
        names = [f"data_batch_{i}.bin" for i in range(1, 6)]
    elif split == "test":
        names = ["test_batch.bin"]
    else:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    chunks = []
    for name in names:
        path = os.path.join(root, name)
        if not os.path.exists(path):
            raise FileNotFoundError(f"missing CIFAR-10 batch file {path}")
        raw = np.fromfile(path, dtype=np.uint8)
        if raw.size == 0 or raw.size % _CIFAR_RECORD != 0:
            raise ValueError(
                f"{path}: size {raw.size} is not a multiple of {_CIFAR_RECORD}")
        chunks.append(raw.reshape(-1, _CIFAR_RECORD))
    records = np.concatenate(chunks, axis=0)
    if limit is not None:
        records = records[:limit]
    labels = records[:, 0].astype(np.int64)
    images = records[:, 1:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return Dataset(images, labels, split)


def make_synthetic(classes, dims, n, seed, separation=3.0, split="train"):
    """Gaussian blob classification set with controllable separation.

    Class means are isotropic Gaussian with scale separation/sqrt(dims), so
    the expected distance between two class means is roughly separation
    noise units; per-sample noise is unit Gaussian. Train and test splits
    share class means but draw disjoint sample noise.
    """
    if classes < 2:
        raise ValueError(f"need at least 2 classes, got {classes}")
    mean_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    means = mean_rng.normal(0.0, separation / np.sqrt(dims), size=(classes, dims))
    split_id = {"train": 1, "test": 2}.get(split)
    if split_id is None:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(split_id,)))
    labels = np.arange(n) % classes
    images = means[labels] + rng.normal(0.0, 1.0, size=(n, dims))
    return Dataset(images, labels.astype(np.int64), split)


def make_synthetic_images(n, seed, split="train", classes=10, side=28,
                          noise=0.15, shift=2, overlap=0.75, amp=0.9):
    """Seeded synthetic image classification set in MNIST-like geometry.

    Each class is a template of smooth Gaussian bumps, partially blended
    with a template pool shared by all classes (overlap controls the blend,
    raising confusability). Samples scale the template by a random
    amplitude, translate it by up to +-shift pixels, and add pixel noise,
    then quantize to 256 gray levels. Train and test draw disjoint samples
    from identical templates.
    """
    tmpl_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(10,)))
    yy, xx = np.mgrid[0:side, 0:side]

    def bumps(rng, count):
        img = np.zeros((side, side))
        for _ in range(count):
            cy, cx = rng.uniform(side * 0.2, side * 0.8, 2)
            sig = rng.uniform(side * 0.08, side * 0.16)
            a = rng.uniform(0.6, 1.0)
            img += a * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sig * sig))
        return img / img.max()

    shared = bumps(tmpl_rng, 4)
    templates = np.stack([
        (1.0 - overlap) * bumps(tmpl_rng, 3) + overlap * shared
        for _ in range(classes)
    ])
    templates /= templates.max(axis=(1, 2), keepdims=True)

    split_id = {"train": 11, "test": 12}.get(split)
    if split_id is None:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(split_id,)))
    labels = (np.arange(n) % classes).astype(np.int64)
    images = np.empty((n, 1, side, side))
    for i in range(n):
        img = amp * rng.uniform(0.75, 1.25) * templates[labels[i]]
        if shift > 0:
            dy, dx = rng.integers(-shift, shift + 1, 2)
            img = np.roll(np.roll(img, dy, axis=0), dx, axis=1)
        img = img + rng.normal(0.0, noise, (side, side))
        images[i, 0] = img
    np.clip(images, 0.0, 1.0, out=images)
    images = np.round(images * 255.0) / 255.0  # 8-bit gray levels
    return Dataset(images, labels, split)


def save_idx_dataset(dataset, root):
    """Write a (n, 1, h, w) image dataset as a standard IDX file pair."""
    os.makedirs(root, exist_ok=True)
    if dataset.images.ndim != 4 or dataset.images.shape[1] != 1:
        raise ValueError("IDX export expects single-channel (n, 1, h, w) images")
    img_name, lab_name = _IDX_NAMES[dataset.split]
    pixels = np.round(dataset.images[:, 0] * 255.0).astype(np.uint8)
    write_idx(os.path.join(root, img_name), pixels)
    write_idx(os.path.join(root, lab_name), dataset.labels.astype(np.uint8))


def channel_stats(images):
    """Per-channel mean and std of a training split. Constant channels get
    unit std so standardization stays finite."""
    if images.ndim == 2:
        axes, n_ch = (0,), images.shape[1]
    elif images.ndim == 4:
        axes, n_ch = (0, 2, 3), images.shape[1]
    else:
        raise ValueError(f"expected 2-D or 4-D images, got shape {images.shape}")
    mean = images.mean(axis=axes)
    std = images.std(axis=axes)
    std = np.where(std < 1e-8, 1.0, std)
    return mean.reshape(-1), std.reshape(-1)


def apply_stats(images, stats):
    """Standardize images with (mean, std) from channel_stats."""
    mean, std = stats
    if images.ndim == 2:
        return (images - mean) / std
    return (images - mean.reshape(1, -1, 1, 1)) / std.reshape(1, -1, 1, 1)


@dataclass(frozen=True)
class AugmentConfig:
    """Input augmentation switches.

    mirror flips horizontally with probability 1/2; color_jitter adds one
    uniform offset per channel per sample (0.1 is the conventional
    amplitude); scale_jitter >= 1 upsamples by a random factor and crops
    back to nominal size (randomly placed when random_crop is set, centered
    otherwise). shuffle_per_epoch controls whether the training order is
    reshuffled every epoch or frozen after the first shuffle. Everything
    defaults to off so augmentation is strictly opt-in.
    """

    mirror: bool = False
    color_jitter: float = 0.0
    scale_jitter: float = 1.0
    random_crop: bool = False
    shuffle_per_epoch: bool = True

    def __post_init__(self):
        if self.color_jitter < 0:
            raise ValueError("color_jitter must be >= 0")
        if self.scale_jitter < 1.0:
            raise ValueError(f"scale_jitter must be >= 1, got {self.scale_jitter}")


def _resize_nearest(img, new_h, new_w):
    h, w = img.shape[-2:]
    iy = np.minimum((np.arange(new_h) * h / new_h).astype(np.int64), h - 1)
    ix = np.minimum((np.arange(new_w) * w / new_w).astype(np.int64), w - 1)
    return img[..., iy[:, None], ix]


def augment(images, cfg, rng):
    """Apply the configured augmentations to one (n, c, h, w) batch.

    Draw order per batch: mirror coin flips, then jitter offsets, then
    scale factors, then crop corners. Disabled steps consume no randomness;
    with everything disabled the input is returned untouched. Output shape
    always equals input shape, values stay in [0, 1].
    """
    active = cfg.mirror or cfg.color_jitter > 0 or cfg.scale_jitter > 1
    if not active:
        return images
    if images.ndim != 4:
        raise ValueError(f"augmentation expects (n, c, h, w) images, got {images.shape}")
    n, c, h, w = images.shape
    out = images.copy()
    if cfg.mirror:
        flips = rng.random(n) < 0.5
        out[flips] = out[flips, :, :, ::-1]
    if cfg.color_jitter > 0:
        offsets = rng.uniform(-cfg.color_jitter, cfg.color_jitter, (n, c))
        out += offsets[:, :, None, None]
        np.clip(out, 0.0, 1.0, out=out)
    if cfg.scale_jitter > 1:
        factors = rng.uniform(1.0, cfg.scale_jitter, n)
        for i in range(n):
            new_h = max(int(round(h * factors[i])), h)
            new_w = max(int(round(w * factors[i])), w)
            big = _resize_nearest(out[i], new_h, new_w)
            if cfg.random_crop:
                oy = int(rng.integers(0, new_h - h + 1))
                ox = int(rng.integers(0, new_w - w + 1))
            else:
                oy = (new_h - h) // 2
                ox = (new_w - w) // 2
            out[i] = big[:, oy:oy + h, ox:ox + w]
    return out
