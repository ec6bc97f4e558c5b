import gzip
import struct
from pathlib import Path

import numpy as np
import pytest
from conftest import make_idx_dir

from advbench import mnist
from advbench.errors import FormatError, LabelError, LengthError, RangeError, SizeError

REAL_DATA = Path(mnist.default_data_dir())
needs_real = pytest.mark.skipif(not (REAL_DATA / "t10k-labels-idx1-ubyte").exists()
                                and not (REAL_DATA / "t10k-labels-idx1-ubyte.gz").exists(),
                                reason="MNIST files not available")


def test_parse_small_image():
    data = struct.pack(">4I", 2051, 1, 2, 2) + bytes([0, 255, 0, 255])
    assert mnist.parse_idx_images(data).tolist() == [[[0.0, 1.0], [0.0, 1.0]]]


def test_label_magic_in_image_parser():
    with pytest.raises(FormatError, match="magic"):
        mnist.parse_idx_images(struct.pack(">4I", 2049, 1, 2, 2) + bytes(4))


def test_truncated_payload():
    with pytest.raises(LengthError):
        mnist.parse_idx_images(struct.pack(">4I", 2051, 2, 2, 2) + bytes(7))
    with pytest.raises(LengthError):
        mnist.parse_idx_labels(b"\x00\x00")


def test_parse_labels():
    assert mnist.parse_idx_labels(struct.pack(">2I", 2049, 3) + bytes([5, 0, 4])).tolist() == [5, 0, 4]
    assert mnist.parse_idx_labels(struct.pack(">2I", 2049, 0)).shape == (0,)
    with pytest.raises(LabelError):
        mnist.parse_idx_labels(struct.pack(">2I", 2049, 1) + bytes([12]))


def test_round_trip_is_byte_identical():
    rng = np.random.default_rng(0)
    raw = struct.pack(">4I", 2051, 5, 28, 28) + rng.integers(0, 256, 5 * 784, dtype=np.uint8).tobytes()
    assert mnist.images_to_idx(mnist.parse_idx_images(raw)) == raw
    lab = struct.pack(">2I", 2049, 4) + bytes([9, 0, 3, 3])
    assert mnist.labels_to_idx(mnist.parse_idx_labels(lab)) == lab


def test_normalisation_is_a_bijection_on_bytes():
    values = np.arange(256, dtype=np.uint8)
    data = struct.pack(">4I", 2051, 1, 16, 16) + values.tobytes()
    pixels = mnist.parse_idx_images(data).reshape(-1)
    assert np.array_equal(np.rint(pixels * 255).astype(np.uint8), values)


def test_load_split_and_gzip(tmp_path):
    plain = mnist.load_split(make_idx_dir(tmp_path / "a"), "train")
    zipped = mnist.load_split(make_idx_dir(tmp_path / "b", gz=True), "train")
    assert plain.images.shape == (120, 1, 28, 28)
    assert np.array_equal(plain.images, zipped.images)
    assert np.array_equal(plain.labels, zipped.labels)
    assert mnist.read_bytes(tmp_path / "b" / "t10k-labels-idx1-ubyte.gz")[:4] == b"\x00\x00\x08\x01"


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        mnist.load_split(tmp_path, "test")


def full_sized(n):
    return mnist.Dataset(np.zeros((n, 1, 1, 1)), np.arange(n) % 10, "full")


def test_split_60000():
    full = full_sized(60_000)
    train, holdout = mnist.train_test_split(full)
    assert (len(train), len(holdout)) == (50_000, 10_000)
    assert train.labels[0] == full.labels[0] and holdout.labels[0] == full.labels[50_000]


def test_split_size_check():
    with pytest.raises(SizeError):
        mnist.train_test_split(full_sized(59_999))
    train, holdout = mnist.train_test_split(full_sized(120), allow_any_size=True)
    assert len(train) + len(holdout) == 120 and len(holdout) == 20


def test_dataset_invariants():
    with pytest.raises(SizeError):
        mnist.Dataset(np.zeros((2, 1, 2, 2)), np.zeros(3, dtype=int))
    with pytest.raises(RangeError):
        mnist.Dataset(np.full((1, 1, 2, 2), 1.5), np.zeros(1, dtype=int))
    with pytest.raises(LabelError):
        mnist.Dataset(np.zeros((1, 1, 2, 2)), np.array([10]))


def test_checksums_cover_all_four_files(idx_dir):
    sums = mnist.file_checksums(idx_dir)
    assert len(sums) == 4 and all(len(v) == 64 for v in sums.values())


def test_data_dir_env(monkeypatch):
    monkeypatch.setenv("ADVBENCH_DATA_DIR", "/somewhere")
    assert mnist.default_data_dir() == "/somewhere"


@needs_real
def test_official_files():
    test = mnist.load_split(REAL_DATA, "test")
    assert test.images.shape == (10_000, 1, 28, 28)
    train, holdout = mnist.train_test_split(mnist.load_split(REAL_DATA, "train"))
    assert (len(train), len(holdout)) == (50_000, 10_000)
    assert np.bincount(test.labels).tolist() == [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009]
