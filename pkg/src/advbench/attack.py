"""White-box FGSM: one signed-gradient step on the input, clamped to [0, 1]."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, RangeError
from .mnist import Dataset

EPSILON_GRID = (0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.0, 5.0, 10.0, 16.0)


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float
    clamp_lo: float = 0.0
    clamp_hi: float = 1.0

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.clamp_lo < self.clamp_hi:
            raise ConfigError("clamp_lo must be below clamp_hi")


def check_grid(epsilons):
    eps = [float(e) for e in epsilons]
    if any(e <= 0 for e in eps) or any(b <= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("epsilon grid must be positive and strictly increasing")
    return tuple(eps)


def input_gradient(model, x, y):
    """Gradient of the mean cross-entropy loss with respect to ``x``."""
    _, acts = model.forward(x)
    _, grad_x, _ = model.backward(acts, y)
    return grad_x


def perturb(x, grad, cfg):
    """Unclamped and clamped FGSM images for a precomputed input gradient."""
    raw = x + cfg.epsilon * np.sign(grad)
    return raw, np.clip(raw, cfg.clamp_lo, cfg.clamp_hi)


def fgsm(model, x, y, cfg):
    """``clip(x + eps * sign(grad_x loss(model, x, y)), 0, 1)``.

    ``cfg`` may be an :class:`AttackConfig` or a bare epsilon. Pixels with a
    zero gradient are left unchanged. For eps >= 1 every other pixel is pushed
    to 0 or 1, so all such attacks give the same image.
    """
    if not isinstance(cfg, AttackConfig):
        cfg = AttackConfig(float(cfg))
    x = np.asarray(x, dtype=np.float64)
    if cfg.epsilon == 0:
        return x.copy()
    return perturb(x, input_gradient(model, x, y), cfg)[1]


def generate_adversarial_set(model, dataset, epsilon, batch_size=500):
    """FGSM counterpart of every image in ``dataset`` (labels unchanged)."""
    cfg = AttackConfig(float(epsilon))
    out = np.empty_like(dataset.images)
    for i in range(0, len(dataset), batch_size):
        sl = slice(i, i + batch_size)
        out[sl] = fgsm(model, dataset.images[sl], dataset.labels[sl], cfg)
    return Dataset(out, dataset.labels, f"{dataset.name}-fgsm{epsilon:g}")


def attack_all(model, dataset, epsilons, batch_size=500):
    """Adversarial sets for several epsilons from one gradient pass per batch.

    The input gradient does not depend on epsilon, so it is computed once and
    reused; results equal repeated :func:`generate_adversarial_set` calls.
    """
    cfgs = [AttackConfig(float(e)) for e in epsilons]
    outs = [np.empty_like(dataset.images) for _ in cfgs]
    for i in range(0, len(dataset), batch_size):
        sl = slice(i, i + batch_size)
        x = dataset.images[sl]
        grad = None
        for cfg, out in zip(cfgs, outs):
            if cfg.epsilon == 0:
                out[sl] = x
                continue
            if grad is None:
                grad = input_gradient(model, x, dataset.labels[sl])
            out[sl] = perturb(x, grad, cfg)[1]
    return [Dataset(o, dataset.labels, f"{dataset.name}-fgsm{c.epsilon:g}")
            for o, c in zip(outs, cfgs)]


def export_pgm(image, path):
    """Write a [0, 1] image as binary PGM (P5, maxval 255)."""
    image = np.asarray(image, dtype=np.float64)
    image = image.reshape(image.shape[-2:])
    if np.any(~np.isfinite(image)) or image.min() < 0 or image.max() > 1:
        raise RangeError("PGM export needs pixel values in [0, 1]")
    rows, cols = image.shape
    pixels = np.rint(image * 255).astype(np.uint8)
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode() + pixels.tobytes())


def read_pgm(path):
    """Read a binary P5 PGM with maxval < 256 back into [0, 1] floats."""
    data = Path(path).read_bytes()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM")
    cols, rows, maxval = (int(f) for f in fields[1:])
    pixels = np.frombuffer(data, dtype=np.uint8, count=rows * cols, offset=pos + 1)
    return pixels.reshape(rows, cols) / float(maxval)


def export_grid(model, dataset, index, epsilons, out_dir, prefix="digit"):
    """PGM files for one test digit at eps = 0 and every value in ``epsilons``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x = dataset.images[index:index + 1]
    y = dataset.labels[index:index + 1]
    paths = []
    for eps in (0.0, *epsilons):
        path = out_dir / f"{prefix}{index}-label{int(y[0])}-eps{eps:g}.pgm"
        export_pgm(fgsm(model, x, y, eps)[0, 0], path)
        paths.append(path)
    return paths
