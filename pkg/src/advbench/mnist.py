"""MNIST IDX parsing, normalisation and the 50,000/10,000 train/holdout split.

IDX layout (big-endian): a 4-byte magic (0x00000803 for images, 0x00000801
for labels), one 4-byte count per dimension, then unsigned bytes. Pixels are
scaled to [0, 1] by dividing by 255.
"""

import gzip
import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, LabelError, LengthError, RangeError, SizeError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
TRAIN_SIZE = 50_000
FULL_TRAIN_SIZE = 60_000

DATA_DIR_ENV = "ADVBENCH_DATA_DIR"

FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (n, 1, 28, 28) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 in [0, 9]
    name: str = ""

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise SizeError(
                f"{self.name}: {len(self.images)} images but {len(self.labels)} labels"
            )
        if len(self.labels):
            if not (self.images.min() >= 0 and self.images.max() <= 1):  # also catches NaN
                raise RangeError(f"{self.name}: pixel values outside [0, 1]")
            if self.labels.min() < 0 or self.labels.max() > 9:
                raise LabelError(f"{self.name}: labels outside [0, 9]")

    def __len__(self):
        return len(self.labels)

    def head(self, n, name=None):
        return Dataset(self.images[:n], self.labels[:n], name or self.name)

    def subset(self, idx, name=None):
        return Dataset(self.images[idx], self.labels[idx], name or self.name)


def _header(data, magic, ndim, what):
    need = 4 + 4 * ndim
    if len(data) < need:
        raise LengthError(f"{what}: {len(data)} bytes is too short for an IDX header")
    got = struct.unpack(">I", data[:4])[0]
    if got != magic:
        raise FormatError(f"{what}: magic 0x{got:08x}, expected 0x{magic:08x}")
    dims = struct.unpack(f">{ndim}I", data[4:need])
    size = int(np.prod(dims))
    if len(data) - need < size:
        raise LengthError(f"{what}: payload has {len(data) - need} bytes, header promises {size}")
    return dims, np.frombuffer(data, dtype=np.uint8, count=size, offset=need)


def parse_idx_images(data):
    """IDX image bytes -> (n, rows, cols) float64 array in [0, 1]."""
    dims, raw = _header(bytes(data), IMAGES_MAGIC, 3, "image file")
    return raw.reshape(dims).astype(np.float64) / 255.0


def parse_idx_labels(data):
    dims, raw = _header(bytes(data), LABELS_MAGIC, 1, "label file")
    if raw.size and raw.max() > 9:
        raise LabelError(f"label file contains label {int(raw.max())} > 9")
    return raw.astype(np.int64)


def images_to_idx(images):
    """Inverse of :func:`parse_idx_images` (accepts (n, rows, cols) or (n, 1, rows, cols))."""
    images = np.asarray(images)
    if images.ndim == 4:
        images = images[:, 0]
    n, rows, cols = images.shape
    raw = np.rint(images * 255.0).astype(np.uint8)
    return struct.pack(">4I", IMAGES_MAGIC, n, rows, cols) + raw.tobytes()


def labels_to_idx(labels):
    labels = np.asarray(labels)
    return struct.pack(">2I", LABELS_MAGIC, len(labels)) + labels.astype(np.uint8).tobytes()


def read_bytes(path):
    """Read a file, transparently gunzipping it when it starts with the gzip magic."""
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def find_file(data_dir, stem):
    for name in (stem, stem + ".gz"):
        path = Path(data_dir) / name
        if path.exists():
            return path
    raise FileNotFoundError(f"neither {stem} nor {stem}.gz found in {data_dir}")


def default_data_dir():
    return os.environ.get(DATA_DIR_ENV, "data/mnist")


def load_split(data_dir, split):
    """Load ``"train"`` (the 60,000-image file) or ``"test"`` as a Dataset."""
    img_stem, lbl_stem = FILES[split]
    images = parse_idx_images(read_bytes(find_file(data_dir, img_stem)))
    labels = parse_idx_labels(read_bytes(find_file(data_dir, lbl_stem)))
    return Dataset(images[:, None], labels, split)


def file_checksums(data_dir):
    out = {}
    for stems in FILES.values():
        for stem in stems:
            path = find_file(data_dir, stem)
            out[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def train_test_split(full_train, allow_any_size=False, n_train=TRAIN_SIZE):
    """First ``n_train`` samples (file order) -> train, the rest -> holdout."""
    n = len(full_train)
    if n != FULL_TRAIN_SIZE and not allow_any_size:
        raise SizeError(f"expected {FULL_TRAIN_SIZE} training samples, got {n}")
    if allow_any_size and n != FULL_TRAIN_SIZE:
        # keep the 5:1 proportion on non-standard inputs
        n_train = min(n_train, n - max(1, n // 6))
    train = Dataset(full_train.images[:n_train], full_train.labels[:n_train], "train")
    holdout = Dataset(full_train.images[n_train:], full_train.labels[n_train:], "holdout")
    return train, holdout
