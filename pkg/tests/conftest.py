import numpy as np
import pytest

from advbench import mnist

FD_STEP = 1e-5
FD_RTOL = 1e-4


def numeric_grad(f, x, coords, step=FD_STEP):
    """Central differences of scalar ``f`` at the flat indices ``coords`` of ``x`` (in place)."""
    flat = x.reshape(-1)
    out = np.empty(len(coords))
    for n, i in enumerate(coords):
        keep = flat[i]
        flat[i] = keep + step
        up = f()
        flat[i] = keep - step
        down = f()
        flat[i] = keep
        out[n] = (up - down) / (2 * step)
    return out


def rel_error(analytic, numeric):
    analytic, numeric = np.ravel(analytic), np.ravel(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def sample_coords(size, k, seed):
    rng = np.random.default_rng(seed)
    return np.arange(size) if size <= k else np.sort(rng.choice(size, k, replace=False))


def make_idx_dir(path, n_train=120, n_test=40, seed=0, gz=False):
    """Write a tiny synthetic MNIST-shaped IDX data directory."""
    import gzip

    rng = np.random.default_rng(seed)
    path.mkdir(parents=True, exist_ok=True)
    parts = {}
    for split, n in (("train", n_train), ("t10k", n_test)):
        labels = np.arange(n) % 10
        images = rng.integers(0, 40, size=(n, 28, 28)).astype(np.uint8)
        for k in range(n):  # a bright class-dependent bar keeps the task learnable
            images[k, 2 + 2 * labels[k]: 4 + 2 * labels[k], 4:24] = 250
        parts[f"{split}-images-idx3-ubyte"] = mnist.images_to_idx(images)
        parts[f"{split}-labels-idx1-ubyte"] = mnist.labels_to_idx(labels)
    for name, data in parts.items():
        if gz:
            (path / (name + ".gz")).write_bytes(gzip.compress(data, mtime=0))
        else:
            (path / name).write_bytes(data)
    return path


@pytest.fixture
def idx_dir(tmp_path):
    return make_idx_dir(tmp_path / "mnist")


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(verdicts):
        terminalreporter.write_line(verdicts[number])
